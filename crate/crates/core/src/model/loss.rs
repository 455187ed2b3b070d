use super::encoder::{encoder_backward, encoder_forward};
use super::params::{EncoderParams, Gradients};
use super::tensor::{dot, norm, Real};
use crate::error::{Error, Result};

/// Target of a cosine embedding loss term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn from_sign(y: i8) -> Result<Self> {
        match y {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            _ => Err(Error::data(format!("label must be +1 or -1, got {y}"))),
        }
    }
}

/// `a.b / (|a||b|)` clamped to `[-1, 1]`.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na.is_zero() || nb.is_zero() {
        return Err(Error::ZeroNorm);
    }
    let cos = dot(a, b) / (na * nb);
    if !cos.is_finite() {
        return Err(Error::NonFinite("cosine similarity".into()));
    }
    Ok(cos.max(-T::one()).min(T::one()))
}

/// `1 - cos` for positives, `max(0, cos - margin)` for negatives.
pub fn cosine_embedding_loss<T: Real>(x1: &[T], x2: &[T], y: Label, margin: T) -> Result<T> {
    let cos = cosine_similarity(x1, x2)?;
    Ok(match y {
        Label::Positive => T::one() - cos,
        Label::Negative => (cos - margin).max(T::zero()),
    })
}

/// Loss and its gradient with respect to `x1`; `x2` is held constant.
pub fn cosine_embedding_loss_grad<T: Real>(x1: &[T], x2: &[T], y: Label, margin: T) -> Result<(T, Vec<T>)> {
    let loss = cosine_embedding_loss(x1, x2, y, margin)?;
    let sign = match y {
        Label::Positive => -T::one(),
        Label::Negative if loss > T::zero() => T::one(),
        Label::Negative => return Ok((loss, vec![T::zero(); x1.len()])),
    };
    let (n1, n2) = (norm(x1), norm(x2));
    let cos = dot(x1, x2) / (n1 * n2);
    // d cos / d x1 = x2 / (|x1||x2|) - cos * x1 / |x1|^2
    let grad = x1
        .iter()
        .zip(x2)
        .map(|(&a, &b)| sign * (b / (n1 * n2) - cos * a / (n1 * n1)))
        .collect();
    Ok((loss, grad))
}

/// Loss of one (command, feature, label) sample and exact parameter gradients.
///
/// The feature side is frozen: gradients flow only into the encoder.
pub fn loss_and_backward<T: Real>(
    params: &EncoderParams<T>,
    token_ids: &[usize],
    target: &[T],
    y: Label,
    margin: T,
) -> Result<(T, Gradients<T>)> {
    if target.len() != params.dims.out {
        return Err(Error::DimMismatch {
            expected: params.dims.out,
            found: target.len(),
        });
    }
    let (embedding, cache) = encoder_forward(params, token_ids)?;
    let (loss, grad_out) = cosine_embedding_loss_grad(&embedding, target, y, margin)?;
    if grad_out.iter().all(|g| g.is_zero()) {
        return Ok((loss, Gradients::zeros_like(params)));
    }
    Ok((loss, encoder_backward(params, &cache, &grad_out)))
}

/// Forward-only loss, used by finite differences.
pub fn sample_loss<T: Real>(params: &EncoderParams<T>, token_ids: &[usize], target: &[T], y: Label, margin: T) -> Result<T> {
    let (embedding, _) = encoder_forward(params, token_ids)?;
    cosine_embedding_loss(&embedding, target, y, margin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_trivial_cases() {
        let a = [1.0f64, 2.0, -3.0];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine_similarity(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(cosine_similarity(&[1.0f64, 0.0], &[0.0, 5.0]).unwrap().abs() < 1e-12);
        assert!(matches!(cosine_similarity(&[0.0f32, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn loss_trivial_cases() {
        let a = [0.3f32, -0.4, 1.2];
        assert!(cosine_embedding_loss(&a, &a, Label::Positive, 0.0).unwrap().abs() < 1e-6);
        let l = cosine_embedding_loss(&[1.0f32, 0.0], &[0.0, 2.0], Label::Positive, 0.0).unwrap();
        assert!((l - 1.0).abs() < 1e-6);
        // cos = -0.3 exactly for these vectors
        let l = cosine_embedding_loss(&[1.0f64, 0.0], &[-0.3, 0.91f64.sqrt()], Label::Negative, 0.0).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn flat_hinge_has_zero_gradient() {
        let (l, g) = cosine_embedding_loss_grad(&[1.0f64, 0.0], &[-1.0, 1.0], Label::Negative, 0.0).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn positive_gradient_vanishes_when_aligned() {
        let x2 = [0.5f64, -1.0, 2.0];
        let x1: Vec<f64> = x2.iter().map(|v| 3.0 * v).collect();
        let (l, g) = cosine_embedding_loss_grad(&x1, &x2, Label::Positive, 0.0).unwrap();
        assert!(l.abs() < 1e-12);
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn nan_is_not_clamped() {
        assert!(cosine_similarity(&[f32::NAN, 1.0], &[1.0, 1.0]).unwrap_err().is_numerical());
        assert!(cosine_similarity(&[f32::INFINITY, 1.0], &[1.0, 1.0]).unwrap_err().is_numerical());
    }

    #[test]
    fn label_parsing() {
        assert_eq!(Label::from_sign(1).unwrap(), Label::Positive);
        assert_eq!(Label::from_sign(-1).unwrap(), Label::Negative);
        assert!(Label::from_sign(0).is_err());
    }
}
