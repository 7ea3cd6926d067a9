use crate::numerics::Rng;

/// Inverted-dropout source used during training.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut Rng,
}

impl<'a> Dropout<'a> {
    pub fn new(rate: f64, rng: &'a mut Rng) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0, 1)");
        Dropout { rate, rng }
    }

    /// Multiplicative mask: each entry is `0` with probability `rate` and
    /// `1 / (1 − rate)` otherwise.
    pub fn mask(&mut self, len: usize) -> Vec<f64> {
        let keep = 1.0 / (1.0 - self.rate);
        (0..len)
            .map(|_| if self.rng.uniform() < self.rate { 0.0 } else { keep })
            .collect()
    }

    /// Draws a mask (or `None` when the rate is zero) and applies it in place.
    pub fn apply_in_place(&mut self, v: &mut [f64]) -> Option<Vec<f64>> {
        if self.rate == 0.0 {
            return None;
        }
        let m = self.mask(v.len());
        v.iter_mut().zip(&m).for_each(|(x, k)| *x *= k);
        Some(m)
    }
}

/// Inverted dropout on a vector; identity at inference or when `rate == 0`.
pub fn dropout_apply(v: &[f64], rate: f64, rng: &mut Rng, training: bool) -> Vec<f64> {
    let mut out = v.to_vec();
    if training && rate > 0.0 {
        Dropout::new(rate, rng).apply_in_place(&mut out);
    }
    out
}

/// Multiplies `grad` by an optional mask recorded in the forward pass.
pub(crate) fn mask_grad(grad: &mut [f64], mask: Option<&Vec<f64>>) {
    if let Some(m) = mask {
        grad.iter_mut().zip(m).for_each(|(g, k)| *g *= k);
    }
}
