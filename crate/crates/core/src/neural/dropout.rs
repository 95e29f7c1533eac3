use crate::rng::SplitMix64;

/// Inverted dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut SplitMix64) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&rate));
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect()
}

/// Forward-pass mode. Dropout is only active in `Train`.
pub enum Mode<'a> {
    Infer,
    Train { rng: &'a mut SplitMix64, rate: f64 },
}

impl Mode<'_> {
    /// Mask for `len` activations; `None` means identity.
    pub fn mask(&mut self, len: usize) -> Option<Vec<f64>> {
        match self {
            Mode::Infer => None,
            Mode::Train { rate, .. } if *rate == 0.0 => None,
            Mode::Train { rng, rate } => Some(dropout_mask(len, *rate, rng)),
        }
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

pub fn apply_mask(data: &mut [f64], mask: Option<&[f64]>) {
    if let Some(m) = mask {
        for (x, k) in data.iter_mut().zip(m) {
            *x *= k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_ones() {
        let mut rng = SplitMix64::new(1);
        assert!(dropout_mask(100, 0.0, &mut rng).iter().all(|&x| x == 1.0));
    }

    #[test]
    fn mean_is_preserved() {
        let mut rng = SplitMix64::new(2024);
        let m = dropout_mask(100_000, 0.2, &mut rng);
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!(m.iter().all(|&x| x == 0.0 || (x - 1.25).abs() < 1e-15));
    }

    #[test]
    fn inference_is_identity() {
        let mut mode = Mode::Infer;
        assert!(mode.mask(10).is_none());
    }

    #[test]
    fn reproducible() {
        let a = dropout_mask(64, 0.5, &mut SplitMix64::new(9));
        let b = dropout_mask(64, 0.5, &mut SplitMix64::new(9));
        assert_eq!(a, b);
    }
}
