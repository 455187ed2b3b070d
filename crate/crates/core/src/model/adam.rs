use serde::{Deserialize, Serialize};

use super::params::{EncoderParams, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Embedding rows are updated lazily: only rows
/// present in a gradient (and their moments) change on a step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: [Vec<f32>; 6],
    second: [Vec<f32>; 6],
}

impl AdamState {
    pub fn new(params: &EncoderParams<f32>, config: AdamConfig) -> Self {
        let zeros = params.tensors().map(|t| vec![0.0f32; t.len()]);
        AdamState {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn first_moment(&self, tensor: usize) -> &[f32] {
        &self.first[tensor]
    }

    pub fn second_moment(&self, tensor: usize) -> &[f32] {
        &self.second[tensor]
    }
}

struct Step {
    lr: f32,
    beta1: f32,
    beta2: f32,
    eps: f32,
    bc1: f32,
    bc2: f32,
}

impl Step {
    fn apply(&self, theta: &mut [f32], m: &mut [f32], v: &mut [f32], g: &[f32]) {
        for i in 0..g.len() {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = m[i] / self.bc1;
            let v_hat = v[i] / self.bc2;
            let delta = self.lr * m_hat / (v_hat.sqrt() + self.eps);
            if delta != 0.0 {
                theta[i] -= delta;
            }
        }
    }
}

/// One Adam update. Fails without touching anything if a gradient is non-finite.
pub fn adam_step(params: &mut EncoderParams<f32>, grads: &Gradients<f32>, state: &mut AdamState) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite(format!("gradient at Adam step {}", state.step + 1)));
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let step = Step {
        lr: c.lr as f32,
        beta1: c.beta1 as f32,
        beta2: c.beta2 as f32,
        eps: c.epsilon as f32,
        bc1: (1.0 - c.beta1.powi(t)) as f32,
        bc2: (1.0 - c.beta2.powi(t)) as f32,
    };
    let word_dim = params.dims.word_dim;
    let [emb, dense @ ..] = params.tensors_mut();
    let [m_emb, m_dense @ ..] = &mut state.first;
    let [v_emb, v_dense @ ..] = &mut state.second;
    for (&row, g) in &grads.embedding_rows {
        let span = row * word_dim..(row + 1) * word_dim;
        step.apply(&mut emb[span.clone()], &mut m_emb[span.clone()], &mut v_emb[span], g);
    }
    for (((theta, m), v), g) in dense
        .into_iter()
        .zip(m_dense.iter_mut())
        .zip(v_dense.iter_mut())
        .zip(grads.dense_tensors())
    {
        step.apply(theta, m, v, g);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{init_params, CellKind, Dims};

    fn params() -> EncoderParams<f32> {
        init_params(
            Dims {
                vocab: 10,
                word_dim: 4,
                hidden: 5,
                out: 6,
            },
            CellKind::Elman,
            3,
        )
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut p = params();
        let before = p.clone();
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &Gradients::zeros_like(&before), &mut s).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = params();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.proj_bias[0] = 1.0;
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut s).unwrap();
        let delta = f64::from(p.proj_bias[0]) - f64::from(before.proj_bias[0]);
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        assert!((delta + 1e-4 / (1.0 + 1e-8)).abs() < 1e-9, "{delta}");
        assert_eq!(p.proj_bias[1..], before.proj_bias[1..]);
    }

    #[test]
    fn only_touched_embedding_rows_change() {
        let mut p = params();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.embedding_rows.insert(2, vec![0.5, -0.5, 1.0, 0.0]);
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &g, &mut s).unwrap();
        for row in 0..10 {
            assert_eq!(p.word_embeddings.row(row) == before.word_embeddings.row(row), row != 2);
        }
        assert!(s.first_moment(0)[..8].iter().all(|&m| m == 0.0));
        assert!(s.first_moment(0)[8..11].iter().all(|&m| m != 0.0));
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = params();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.rnn_bias.iter_mut().for_each(|x| *x = 2.0);
        g.embedding_rows.insert(1, vec![1.0; 4]);
        let mut s = AdamState::new(&p, AdamConfig { lr: 0.0, ..AdamConfig::default() });
        for _ in 0..3 {
            adam_step(&mut p, &g, &mut s).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = params();
        let mut g = Gradients::zeros_like(&p);
        g.proj_weights.as_mut_slice()[0] = f32::NAN;
        let mut s = AdamState::new(&p, AdamConfig::default());
        assert!(matches!(adam_step(&mut p, &g, &mut s), Err(Error::NonFinite(_))));
        assert_eq!(s.step, 0);
    }

    #[test]
    fn identical_runs_match() {
        let run = || {
            let mut p = params();
            let mut s = AdamState::new(&p, AdamConfig::default());
            let mut g = Gradients::zeros_like(&p);
            g.rnn_recurrent_weights.as_mut_slice().iter_mut().enumerate().for_each(|(i, x)| *x = (i as f32).sin());
            for _ in 0..5 {
                adam_step(&mut p, &g, &mut s).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
