use crate::error::{NnError, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// NaN passes through so a non-finite input still surfaces in the loss.
pub fn relu<F: Real>(x: &Tensor<F>) -> Tensor<F> {
    Tensor::from_fn(x.dims(), |i| {
        let v = x.data()[i];
        if v < F::zero() {
            F::zero()
        } else {
            v
        }
    })
}

/// Passes gradient where the input was strictly positive.
pub fn relu_backward<F: Real>(x: &Tensor<F>, dy: &Tensor<F>) -> Tensor<F> {
    Tensor::from_fn(x.dims(), |i| if x.data()[i] > F::zero() { dy.data()[i] } else { F::zero() })
}

/// Softmax over a vector, with max subtraction.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    softmax_f64(logits).into_iter().map(F::from_f64).collect()
}

pub(crate) fn softmax_f64<F: Real>(logits: &[F]) -> Vec<f64> {
    let m = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v.as_f64() - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax applied over the last axis.
pub fn softmax_forward<F: Real>(x: &Tensor<F>) -> Result<Tensor<F>> {
    let k = *x.dims().last().ok_or_else(|| NnError::shape("softmax", "at least one axis", x.dims()))?;
    let data = x.data().chunks(k.max(1)).flat_map(softmax).collect();
    Tensor::new(x.dims(), data)
}

/// Uses the cached output `s`: `dx = s ⊙ (dy − Σ dy·s)` per row.
pub fn softmax_backward<F: Real>(s: &Tensor<F>, dy: &Tensor<F>) -> Tensor<F> {
    let k = s.dims().last().copied().unwrap_or(1).max(1);
    let mut dx = Vec::with_capacity(s.len());
    for (srow, grow) in s.data().chunks(k).zip(dy.data().chunks(k)) {
        let dot: f64 = srow.iter().zip(grow).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
        dx.extend(srow.iter().zip(grow).map(|(a, b)| F::from_f64(a.as_f64() * (b.as_f64() - dot))));
    }
    Tensor::new(s.dims(), dx).expect("same length as s")
}

/// Returns `(−log softmax(logits)[label], softmax − onehot)`.
pub fn softmax_cross_entropy<F: Real>(logits: &[F], label: usize) -> (f64, Vec<F>) {
    let m = logits.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|v| (v.as_f64() - m).exp()).sum::<f64>().ln();
    let loss = lse - logits[label].as_f64();
    let grad = logits
        .iter()
        .enumerate()
        .map(|(i, v)| F::from_f64((v.as_f64() - lse).exp() - if i == label { 1.0 } else { 0.0 }))
        .collect();
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let (loss, grad) = softmax_cross_entropy(&[0.0f64; 4], 2);
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert_eq!(grad, vec![0.25, 0.25, -0.75, 0.25]);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let (loss, grad) = softmax_cross_entropy(&[1000.0f32, -1000.0, 0.0], 1);
        assert!(loss.is_finite() && grad.iter().all(|g| g.is_finite()));
        assert!((loss - 2000.0).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_central_differences() {
        let logits = [0.3f64, -1.2, 2.5, 0.7, -0.1];
        let (_, grad) = softmax_cross_entropy(&logits, 3);
        for i in 0..logits.len() {
            let h = 1e-5;
            let (mut p, mut m) = (logits, logits);
            p[i] += h;
            m[i] -= h;
            let num = (softmax_cross_entropy(&p, 3).0 - softmax_cross_entropy(&m, 3).0) / (2.0 * h);
            assert!((num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn relu_sign_pattern() {
        let x = Tensor::new(&[4], vec![-0.5f32, 0.2, -0.1, 3.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.2, 0.0, 3.0]);
        let dy = Tensor::new(&[4], vec![1.0f32; 4]).unwrap();
        assert_eq!(relu_backward(&x, &dy).data(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_keeps_nan() {
        let x = Tensor::new(&[2], vec![f64::NAN, -1.0]).unwrap();
        assert!(relu(&x).data()[0].is_nan());
    }

    proptest! {
        #[test]
        fn cross_entropy_shift_invariant(logits in prop::collection::vec(-20.0f64..20.0, 2..12), c in -50.0f64..50.0, pick in 0usize..12) {
            let label = pick % logits.len();
            let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
            let (l0, g0) = softmax_cross_entropy(&logits, label);
            let (l1, g1) = softmax_cross_entropy(&shifted, label);
            prop_assert!((l0 - l1).abs() < 1e-9);
            for (a, b) in g0.iter().zip(&g1) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn softmax_is_distribution(logits in prop::collection::vec(-80.0f32..80.0, 1..20)) {
            let s = softmax(&logits);
            prop_assert!(s.iter().all(|&v| v >= 0.0));
            let sum: f64 = s.iter().map(|&v| v as f64).sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
        }
    }
}
