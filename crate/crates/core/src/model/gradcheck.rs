//! Finite-difference verification of the analytic encoder gradients.
//!
//! Both sides are evaluated in `f64` from the same `f32` parameters, so the
//! comparison measures the derivation rather than single-precision rounding.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;

use super::loss::{loss_and_backward, sample_loss, Label};
use super::params::{init_params, CellKind, Dims, EncoderParams};
use crate::error::{Error, Result};
use crate::rng::{stream, streams};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSample {
    pub token_ids: Vec<usize>,
    pub target: Vec<f32>,
    pub label: Label,
    pub margin: f32,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central differences of `f` at `point`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, point: &[f64], epsilon: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..point.len())
        .map(|i| {
            x[i] = point[i] + epsilon;
            let plus = f(&x);
            x[i] = point[i] - epsilon;
            let minus = f(&x);
            x[i] = point[i];
            (plus - minus) / (2.0 * epsilon)
        })
        .collect()
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter coordinate.
pub fn grad_check(params: &EncoderParams<f32>, sample: &GradCheckSample, epsilon: f64) -> Result<f64> {
    check_coordinates(params, sample, epsilon, None)
}

/// As [`grad_check`], over `n_coords` coordinates drawn uniformly without
/// replacement (all of them when `n_coords` exceeds the parameter count).
pub fn grad_check_subsample(
    params: &EncoderParams<f32>,
    sample: &GradCheckSample,
    epsilon: f64,
    n_coords: usize,
    seed: u64,
) -> Result<f64> {
    check_coordinates(params, sample, epsilon, Some((n_coords, seed)))
}

fn check_coordinates(
    params: &EncoderParams<f32>,
    sample: &GradCheckSample,
    epsilon: f64,
    subsample: Option<(usize, u64)>,
) -> Result<f64> {
    if !(1e-4..=1e-2).contains(&epsilon) {
        return Err(Error::config(format!("finite-difference step {epsilon} outside [1e-4, 1e-2]")));
    }
    let mut p = params.cast::<f64>();
    let target: Vec<f64> = sample.target.iter().map(|&x| f64::from(x)).collect();
    let margin = f64::from(sample.margin);
    let (_, grads) = loss_and_backward(&p, &sample.token_ids, &target, sample.label, margin)?;
    let word_dim = p.dims.word_dim;

    let sizes: Vec<usize> = p.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut flat: Vec<usize> = match subsample {
        Some((n, seed)) if n < total => sample_indices(&mut stream(seed, streams::GRADCHECK), total, n).into_vec(),
        _ => (0..total).collect(),
    };
    flat.sort_unstable();

    let mut worst: f64 = 0.0;
    for f in flat {
        let (mut k, mut i) = (0, f);
        while i >= sizes[k] {
            i -= sizes[k];
            k += 1;
        }
        let original = p.tensors()[k][i];
        p.tensors_mut()[k][i] = original + epsilon;
        let plus = sample_loss(&p, &sample.token_ids, &target, sample.label, margin)?;
        p.tensors_mut()[k][i] = original - epsilon;
        let minus = sample_loss(&p, &sample.token_ids, &target, sample.label, margin)?;
        p.tensors_mut()[k][i] = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        worst = worst.max(relative_error(grads.coordinate(k, i, word_dim), numeric));
    }
    Ok(worst)
}

/// Dimensions of the randomized gradient-check configurations.
pub const GRADCHECK_DIMS: Dims = Dims {
    vocab: 50,
    word_dim: 16,
    hidden: 32,
    out: 64,
};

/// A random encoder and sample: sequence length 3-8, non-zero biases, and for
/// negative labels a margin low enough that the hinge is active.
pub fn random_case(seed: u64, cell: CellKind) -> (EncoderParams<f32>, GradCheckSample) {
    let mut rng = stream(seed, 0x6772_6164);
    let mut params = init_params(GRADCHECK_DIMS, cell, seed).expect("valid dims");
    for b in params.rnn_bias.iter_mut().chain(params.proj_bias.iter_mut()) {
        *b = rng.random_range(-0.1..0.1);
    }
    let len = rng.random_range(3..=8);
    let token_ids = (0..len).map(|_| rng.random_range(0..GRADCHECK_DIMS.vocab)).collect();
    let target = (0..GRADCHECK_DIMS.out).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (label, margin) = if rng.random_bool(0.5) {
        (Label::Positive, 0.0)
    } else {
        (Label::Negative, rng.random_range(-0.9..-0.5))
    };
    (
        params,
        GradCheckSample {
            token_ids,
            target,
            label,
            margin,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_layer_squared_distance() {
        // L(W) = 0.5 * |W x - t|^2, dL/dW = (W x - t) x^T
        let x = [0.5, -1.0, 2.0];
        let t = [1.0, 0.0];
        let w = [0.1, 0.2, -0.3, 0.4, -0.5, 0.6];
        let loss = |w: &[f64]| -> f64 {
            (0..2)
                .map(|r| {
                    let y: f64 = (0..3).map(|c| w[r * 3 + c] * x[c]).sum();
                    0.5 * (y - t[r]).powi(2)
                })
                .sum()
        };
        let analytic: Vec<f64> = (0..6)
            .map(|i| {
                let (r, c) = (i / 3, i % 3);
                let y: f64 = (0..3).map(|k| w[r * 3 + k] * x[k]).sum();
                (y - t[r]) * x[c]
            })
            .collect();
        let numeric = central_difference(loss, &w, 1e-3);
        let worst = analytic
            .iter()
            .zip(&numeric)
            .map(|(&a, &n)| relative_error(a, n))
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn elman_gradients_match() {
        let (p, s) = random_case(11, CellKind::Elman);
        let err = grad_check(&p, &s, 1e-3).unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn gated_gradients_match() {
        let (p, s) = random_case(12, CellKind::Gated);
        let err = grad_check(&p, &s, 1e-3).unwrap();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn flat_hinge_is_zero_on_both_sides() {
        let (p, mut s) = random_case(5, CellKind::Elman);
        s.label = Label::Negative;
        s.margin = 1.0;
        assert_eq!(grad_check(&p, &s, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn subsample_bounded_by_full_check() {
        let (p, s) = random_case(3, CellKind::Elman);
        let full = grad_check(&p, &s, 1e-3).unwrap();
        let part = grad_check_subsample(&p, &s, 1e-3, 200, 1).unwrap();
        assert!(part <= full);
        assert_eq!(grad_check_subsample(&p, &s, 1e-3, usize::MAX, 1).unwrap(), full);
    }

    #[test]
    fn error_is_second_order_in_step() {
        // Central-difference truncation is O(eps^2): a 10x smaller step
        // should shrink the worst error by roughly 100x.
        let (p, s) = random_case(1, CellKind::Elman);
        let coarse = grad_check(&p, &s, 1e-3).unwrap();
        let fine = grad_check(&p, &s, 1e-4).unwrap();
        let ratio = coarse / fine;
        assert!((50.0..200.0).contains(&ratio), "{coarse} {fine}");
    }

    #[test]
    fn step_out_of_range() {
        let (p, s) = random_case(5, CellKind::Elman);
        assert!(grad_check(&p, &s, 0.1).is_err());
    }
}
