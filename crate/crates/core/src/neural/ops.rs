/// Numerically stable softmax (max subtraction).
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `-log softmax(logits)[label]`.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

/// Cross-entropy and its gradient w.r.t. the logits (`softmax - onehot`).
pub fn cross_entropy_with_grad(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let loss = cross_entropy(logits, label);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (loss, grad)
}

/// Backward through softmax: given `p = softmax(z)` and `dp`, returns `dz`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, di)| pi * (di - inner)).collect()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_single() {
        assert_eq!(softmax(&[42.0]), vec![1.0]);
    }

    #[test]
    fn softmax_large_logits() {
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] < 1e-300 || p[1] == 0.0);
    }

    #[test]
    fn cross_entropy_values() {
        assert!((cross_entropy(&[0.0, 0.0], 0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(cross_entropy(&[30.0, -30.0], 0) < 1e-20);
        // ln(1 + e^60) - (-30) ... = 60 + ln(1 + e^-60)
        assert!((cross_entropy(&[30.0, -30.0], 1) - 60.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_symmetry() {
        for x in [-50.0, -1.0, 0.0, 0.3, 20.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_backward_finite_difference() {
        let z = [0.3, -1.2, 2.0];
        let dp = [0.5, -0.25, 1.0];
        let dz = softmax_backward(&softmax(&z), &dp);
        let f = |z: &[f64]| softmax(z).iter().zip(&dp).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..3 {
            let mut zp = z;
            let mut zm = z;
            zp[i] += 1e-6;
            zm[i] -= 1e-6;
            let num = (f(&zp) - f(&zm)) / 2e-6;
            assert!((num - dz[i]).abs() < 1e-8);
        }
    }
}
