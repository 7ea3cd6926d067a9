use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::ParamTensors;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub enum OptimizerKind {
    #[default]
    Adagrad,
    Rmsprop,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adagrad => "adagrad",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adagrad" => Ok(OptimizerKind::Adagrad),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            _ => Err(format!("expected adagrad or rmsprop, got {s:?}")),
        }
    }
}

fn check_shapes(theta: &[f64], g: &[f64], state: &[f64]) -> Result<()> {
    if g.len() != theta.len() {
        return Err(Error::dim("gradient", theta.len(), g.len()));
    }
    if state.len() != theta.len() {
        return Err(Error::dim("optimizer state", theta.len(), state.len()));
    }
    Ok(())
}

/// `state += g²; θ −= lr · g / (√state + ε)`.
pub fn adagrad_update(theta: &mut [f64], g: &[f64], state: &mut [f64], lr: f64, eps: f64) -> Result<()> {
    check_shapes(theta, g, state)?;
    for ((t, &g), s) in theta.iter_mut().zip(g).zip(state.iter_mut()) {
        *s += g * g;
        *t -= lr * g / (s.sqrt() + eps);
    }
    Ok(())
}

/// `state = ρ·state + (1 − ρ)·g²; θ −= lr · g / √(state + ε)`.
pub fn rmsprop_update(theta: &mut [f64], g: &[f64], state: &mut [f64], lr: f64, rho: f64, eps: f64) -> Result<()> {
    check_shapes(theta, g, state)?;
    for ((t, &g), s) in theta.iter_mut().zip(g).zip(state.iter_mut()) {
        *s = rho * *s + (1.0 - rho) * g * g;
        *t -= lr * g / (*s + eps).sqrt();
    }
    Ok(())
}

/// Per-tensor accumulators, in the order of `ParamTensors::tensors`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub accumulators: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new<P: ParamTensors>(params: &P, kind: OptimizerKind, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        OptimizerState {
            kind,
            learning_rate,
            decay,
            epsilon,
            accumulators: params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect(),
        }
    }

    pub fn step<P: ParamTensors>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grads: Vec<&[f64]> = grads.tensors().into_iter().map(|t| t.data).collect();
        let targets = params.tensors_mut();
        if grads.len() != targets.len() || targets.len() != self.accumulators.len() {
            return Err(Error::dim("parameter tensor count", self.accumulators.len(), grads.len()));
        }
        for ((theta, g), state) in targets.into_iter().zip(grads).zip(&mut self.accumulators) {
            match self.kind {
                OptimizerKind::Adagrad => adagrad_update(theta, g, state, self.learning_rate, self.epsilon)?,
                OptimizerKind::Rmsprop => {
                    rmsprop_update(theta, g, state, self.learning_rate, self.decay, self.epsilon)?
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adagrad_hand_arithmetic() {
        let (mut t, mut s) = ([0.0], [0.0]);
        adagrad_update(&mut t, &[3.0], &mut s, 0.1, 1e-8).unwrap();
        assert!((t[0] - (-0.1 * 3.0 / (3.0 + 1e-8))).abs() < 1e-16);
        let before = t[0];
        adagrad_update(&mut t, &[4.0], &mut s, 0.1, 1e-8).unwrap();
        assert_eq!(s[0], 25.0);
        assert!((t[0] - before + 0.08).abs() < 1e-9);
        let frozen = t[0];
        adagrad_update(&mut t, &[0.0], &mut s, 0.1, 1e-8).unwrap();
        assert_eq!(t[0], frozen);
    }

    #[test]
    fn adagrad_steps_shrink_under_constant_sign() {
        let (mut t, mut s) = ([0.0], [0.0]);
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let before = t[0];
            adagrad_update(&mut t, &[1.5], &mut s, 0.1, 1e-8).unwrap();
            let step = before - t[0];
            assert!(step <= last);
            last = step;
        }
    }

    #[test]
    fn rmsprop_hand_arithmetic() {
        let (mut t, mut s) = ([0.0], [0.0]);
        rmsprop_update(&mut t, &[3.0], &mut s, 0.1, 0.9, 1e-8).unwrap();
        assert!((s[0] - 0.9).abs() < 1e-15);
        assert!((t[0] + 0.31623).abs() < 1e-5);
        for k in 1..=5 {
            rmsprop_update(&mut t, &[0.0], &mut s, 0.1, 0.9, 1e-8).unwrap();
            assert!((s[0] - 0.9 * 0.9f64.powi(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn rmsprop_constant_gradient_step_tends_to_lr() {
        let (mut t, mut s) = ([0.0], [0.0]);
        let mut step = 0.0;
        for _ in 0..200 {
            let before = t[0];
            rmsprop_update(&mut t, &[2.0], &mut s, 0.1, 0.9, 1e-8).unwrap();
            step = before - t[0];
        }
        assert!((step - 0.1).abs() / 0.1 < 0.01, "{step}");
    }

    #[test]
    fn elementwise_over_concatenation() {
        let g = [0.3, -1.2, 2.0, 0.0, 5.0];
        let mut joint = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mut js = [0.1, 0.0, 2.0, 0.5, 0.0];
        let (mut a, mut b) = ([1.0, 2.0], [3.0, 4.0, 5.0]);
        let (mut sa, mut sb) = ([0.1, 0.0], [2.0, 0.5, 0.0]);
        rmsprop_update(&mut joint, &g, &mut js, 0.05, 0.9, 1e-8).unwrap();
        rmsprop_update(&mut a, &g[..2], &mut sa, 0.05, 0.9, 1e-8).unwrap();
        rmsprop_update(&mut b, &g[2..], &mut sb, 0.05, 0.9, 1e-8).unwrap();
        assert_eq!(joint[..2], a);
        assert_eq!(joint[2..], b);
    }

    #[test]
    fn shape_mismatch() {
        assert!(adagrad_update(&mut [0.0; 2], &[1.0], &mut [0.0; 2], 0.1, 1e-8).is_err());
        assert!(rmsprop_update(&mut [0.0; 2], &[1.0, 1.0], &mut [0.0], 0.1, 0.9, 1e-8).is_err());
    }

    #[test]
    fn state_step_over_tensors() {
        let mut p = vec![1.0, 2.0];
        let mut opt = OptimizerState::new(&p, OptimizerKind::Adagrad, 0.1, 0.9, 1e-8);
        opt.step(&mut p, &vec![3.0, 0.0]).unwrap();
        assert!((p[0] - (1.0 - 0.1 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(p[1], 2.0);
        assert!(opt.accumulators.iter().flatten().all(|v| *v >= 0.0));
    }
}
