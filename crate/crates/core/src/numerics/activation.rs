//! Elementwise activations.
//!
//! Arguments are clamped to `[-CLAMP, CLAMP]` and results are kept strictly
//! inside the open codomain interval, so `σ(x) ∈ (0, 1)` and `tanh(x) ∈ (-1, 1)`
//! hold for every finite input even where `f64` rounding would reach the bound.

/// Pre-activation clamp applied before `exp`/`tanh`.
pub const CLAMP: f64 = 40.0;

/// Largest `f64` strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    let x = x.clamp(-CLAMP, CLAMP);
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.min(BELOW_ONE)
}

#[inline]
pub fn tanh_scalar(x: f64) -> f64 {
    x.clamp(-CLAMP, CLAMP).tanh().clamp(-BELOW_ONE, BELOW_ONE)
}

pub fn sigmoid(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| sigmoid_scalar(v)).collect()
}

pub fn tanh_act(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| tanh_scalar(v)).collect()
}

pub fn sigmoid_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
}

pub fn tanh_in_place(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = tanh_scalar(*v));
}

/// Recurrent activation for the plain RNN cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => tanh_scalar(x),
            Activation::Sigmoid => sigmoid_scalar(x),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Activation::parse(s).ok_or_else(|| format!("expected tanh or sigmoid, got {s:?}"))
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
