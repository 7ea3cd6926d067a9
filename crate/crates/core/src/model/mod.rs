//! Prediction architectures: the static/dynamic fusion network over any
//! recurrent cell, and the TLE, logistic-regression, static-only and random
//! baselines.
//!
//! Every architecture maps one encoded patient to one probability row per
//! visit, starting at the first visit.

mod fusion;
mod logreg;
mod random;
mod static_only;
mod tle;

use std::fmt;
use std::str::FromStr;

pub use fusion::{FusionParams, FusionTrace};
pub use logreg::{logreg_features, logreg_forward, LogRegParams, LogRegTrace};
pub use random::{random_predict, RandomModel};
pub use static_only::{StaticOnlyParams, StaticTrace};
pub use tle::{TleParams, TleTrace};

use crate::cells::CellKind;
use crate::data::EncodedPatient;
use crate::error::{Error, Result};
use crate::numerics::{gemv, sigmoid_scalar, Activation, Matrix, ParamTensors, Rng, TensorRef};
use crate::train::{bce_grad, bce_loss, bce_terms, Dropout};

/// Probability clamp: every emitted prediction lies in `[EPSILON, 1 − EPSILON]`.
pub const EPSILON: f64 = 1e-7;

/// Number of target labels: {rejection, loss, death} × {6, 12} months.
pub const NUM_LABELS: usize = 6;

#[inline]
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

pub(crate) fn probabilities(logits: &[f64]) -> Vec<f64> {
    logits
        .iter()
        .map(|&z| clamp_probability(sigmoid_scalar(z)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arch {
    Rnn,
    Lstm,
    Gru,
    Tle,
    Logreg,
    Static,
    Random,
}

impl Arch {
    pub const ALL: [Arch; 7] = [
        Arch::Gru,
        Arch::Lstm,
        Arch::Rnn,
        Arch::Tle,
        Arch::Logreg,
        Arch::Static,
        Arch::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Rnn => "rnn",
            Arch::Lstm => "lstm",
            Arch::Gru => "gru",
            Arch::Tle => "tle",
            Arch::Logreg => "logreg",
            Arch::Static => "static",
            Arch::Random => "random",
        }
    }

    /// Row label used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Arch::Rnn => "RNN + static",
            Arch::Lstm => "LSTM + static",
            Arch::Gru => "GRU + static",
            Arch::Tle => "TLE",
            Arch::Logreg => "Logistic Regression",
            Arch::Static => "Static embeddings",
            Arch::Random => "Random",
        }
    }

    pub fn cell_kind(self) -> Option<CellKind> {
        match self {
            Arch::Rnn => Some(CellKind::Rnn),
            Arch::Lstm => Some(CellKind::Lstm),
            Arch::Gru => Some(CellKind::Gru),
            _ => None,
        }
    }

    pub fn is_trainable(self) -> bool {
        self != Arch::Random
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("arch", format!("unknown architecture `{s}`")))
    }
}

/// Input/output sizes and capacity hyperparameters shared by all architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub static_dim: usize,
    pub dynamic_dim: usize,
    pub labels: usize,
    pub rank: usize,
    pub hidden: usize,
    /// Number of recent visits seen by TLE.
    pub window: usize,
}

/// A per-visit probability row with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub patient_id: String,
    pub visit: usize,
    pub probs: Vec<f64>,
    pub truth: Vec<f64>,
    pub mask: Vec<bool>,
}

/// `x̃ᵉ = A x̃`
pub fn embed_static(a: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if a.cols() != x.len() {
        return Err(Error::dim("embed_static", a.cols(), x.len()));
    }
    Ok(gemv(a, x))
}

/// `xᵉ_t = B x_t`
pub fn embed_visit(b: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if b.cols() != x.len() {
        return Err(Error::dim("embed_visit", b.cols(), x.len()));
    }
    Ok(gemv(b, x))
}

pub(crate) fn check_patient(p: &EncodedPatient, static_dim: usize, dynamic_dim: usize) -> Result<()> {
    if p.visits.is_empty() {
        return Err(Error::EmptySequence(p.id.clone()));
    }
    if p.static_features.len() != static_dim {
        return Err(Error::dim("static features", static_dim, p.static_features.len()));
    }
    for v in &p.visits {
        if v.len() != dynamic_dim {
            return Err(Error::dim("visit vector", dynamic_dim, v.len()));
        }
    }
    Ok(())
}

/// Architectures trained by backpropagation.
pub trait SequenceModel: ParamTensors + Send + Sync {
    type Trace;

    /// Clamped probabilities for every visit plus whatever the backward pass needs.
    fn forward(&self, patient: &EncodedPatient, dropout: Option<&mut Dropout>) -> Result<(Vec<Vec<f64>>, Self::Trace)>;

    /// Parameter gradients given the loss gradient at each visit's logits.
    fn backward(&self, trace: &Self::Trace, dlogits: &[Vec<f64>]) -> Result<Self>;

    /// Masked summed BCE for one patient and its gradient.
    fn loss_and_grad(&self, patient: &EncodedPatient, dropout: Option<&mut Dropout>) -> Result<(f64, Self)>
    where
        Self: Sized,
    {
        let (probs, trace) = self.forward(patient, dropout)?;
        let loss = bce_loss(&probs, &patient.targets, Some(&patient.mask))?;
        let dlogits = bce_grad(&probs, &patient.targets, Some(&patient.mask))?;
        Ok((loss, self.backward(&trace, &dlogits)?))
    }

    /// The per-entry terms whose sum is the loss of [`Self::loss_and_grad`].
    fn loss_terms(&self, patient: &EncodedPatient, dropout: Option<&mut Dropout>) -> Result<Vec<f64>> {
        let (probs, _) = self.forward(patient, dropout)?;
        bce_terms(&probs, &patient.targets, Some(&patient.mask))
    }
}

/// Any trained (or stub) model.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Fusion(FusionParams),
    Tle(TleParams),
    Logreg(LogRegParams),
    Static(StaticOnlyParams),
    Random(RandomModel),
}

/// Initial parameters: Glorot-uniform weights, zero biases, deterministic in `rng`.
pub fn init_params(arch: Arch, dims: &ModelDims, activation: Activation, rng: &mut Rng) -> Model {
    match arch {
        Arch::Rnn | Arch::Lstm | Arch::Gru => Model::Fusion(FusionParams::init(
            arch.cell_kind().unwrap(),
            dims,
            activation,
            rng,
        )),
        Arch::Tle => Model::Tle(TleParams::init(dims, rng)),
        Arch::Logreg => Model::Logreg(LogRegParams::init(dims, rng)),
        Arch::Static => Model::Static(StaticOnlyParams::init(dims, rng)),
        Arch::Random => Model::Random(RandomModel { seed: rng.next_u64() }),
    }
}

impl Model {
    pub fn arch(&self) -> Arch {
        match self {
            Model::Fusion(p) => match p.cell.kind() {
                CellKind::Rnn => Arch::Rnn,
                CellKind::Lstm => Arch::Lstm,
                CellKind::Gru => Arch::Gru,
            },
            Model::Tle(_) => Arch::Tle,
            Model::Logreg(_) => Arch::Logreg,
            Model::Static(_) => Arch::Static,
            Model::Random(_) => Arch::Random,
        }
    }

    pub fn predict(&self, patient: &EncodedPatient) -> Result<Vec<Vec<f64>>> {
        match self {
            Model::Fusion(p) => Ok(p.forward(patient, None)?.0),
            Model::Tle(p) => Ok(p.forward(patient, None)?.0),
            Model::Logreg(p) => Ok(p.forward(patient, None)?.0),
            Model::Static(p) => Ok(p.forward(patient, None)?.0),
            Model::Random(r) => Ok(r.predict_patient(patient)),
        }
    }

    /// Per-visit predictions with truth and mask attached.
    pub fn predictions(&self, patient: &EncodedPatient) -> Result<Vec<Prediction>> {
        let probs = self.predict(patient)?;
        Ok(probs
            .into_iter()
            .enumerate()
            .map(|(t, probs)| Prediction {
                patient_id: patient.id.clone(),
                visit: t,
                probs,
                truth: patient.targets[t].clone(),
                mask: patient.mask[t].clone(),
            })
            .collect())
    }

    pub fn loss_and_grad(&self, patient: &EncodedPatient, dropout: Option<&mut Dropout>) -> Result<(f64, Model)> {
        Ok(match self {
            Model::Fusion(p) => {
                let (l, g) = p.loss_and_grad(patient, dropout)?;
                (l, Model::Fusion(g))
            }
            Model::Tle(p) => {
                let (l, g) = p.loss_and_grad(patient, dropout)?;
                (l, Model::Tle(g))
            }
            Model::Logreg(p) => {
                let (l, g) = p.loss_and_grad(patient, dropout)?;
                (l, Model::Logreg(g))
            }
            Model::Static(p) => {
                let (l, g) = p.loss_and_grad(patient, dropout)?;
                (l, Model::Static(g))
            }
            Model::Random(r) => {
                let probs = r.predict_patient(patient);
                (bce_loss(&probs, &patient.targets, Some(&patient.mask))?, self.clone())
            }
        })
    }

    /// Per-entry loss terms without dropout.
    pub fn loss_terms(&self, patient: &EncodedPatient) -> Result<Vec<f64>> {
        let probs = self.predict(patient)?;
        bce_terms(&probs, &patient.targets, Some(&patient.mask))
    }

    /// Gradient of the model's summed loss given externally supplied logit
    /// gradients (one row per visit).
    pub fn backward_from_logits(&self, patient: &EncodedPatient, dlogits: &[Vec<f64>]) -> Result<Model> {
        if dlogits.len() != patient.visits.len() {
            return Err(Error::TraceMismatch(format!(
                "{} loss-gradient rows for {} visits",
                dlogits.len(),
                patient.visits.len()
            )));
        }
        Ok(match self {
            Model::Fusion(p) => Model::Fusion(p.backward(&p.forward(patient, None)?.1, dlogits)?),
            Model::Tle(p) => Model::Tle(p.backward(&p.forward(patient, None)?.1, dlogits)?),
            Model::Logreg(p) => Model::Logreg(p.backward(&p.forward(patient, None)?.1, dlogits)?),
            Model::Static(p) => Model::Static(p.backward(&p.forward(patient, None)?.1, dlogits)?),
            Model::Random(_) => self.clone(),
        })
    }

    pub fn dims(&self) -> Option<ModelDims> {
        match self {
            Model::Fusion(p) => Some(p.dims()),
            Model::Tle(p) => Some(p.dims()),
            Model::Logreg(p) => Some(p.dims()),
            Model::Static(p) => Some(p.dims()),
            Model::Random(_) => None,
        }
    }
}

impl ParamTensors for Model {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        match self {
            Model::Fusion(p) => p.tensors(),
            Model::Tle(p) => p.tensors(),
            Model::Logreg(p) => p.tensors(),
            Model::Static(p) => p.tensors(),
            Model::Random(_) => Vec::new(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Model::Fusion(p) => p.tensors_mut(),
            Model::Tle(p) => p.tensors_mut(),
            Model::Logreg(p) => p.tensors_mut(),
            Model::Static(p) => p.tensors_mut(),
            Model::Random(_) => Vec::new(),
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn dims() -> ModelDims {
        ModelDims {
            static_dim: 5,
            dynamic_dim: 9,
            labels: NUM_LABELS,
            rank: 3,
            hidden: 4,
            window: 3,
        }
    }

    /// Random patient with binary visits, real static features, and a
    /// random evaluability mask.
    pub fn patient(dims: &ModelDims, visits: usize, rng: &mut Rng) -> EncodedPatient {
        let static_features = (0..dims.static_dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let visit_vecs: Vec<Vec<f64>> = (0..visits)
            .map(|_| (0..dims.dynamic_dim).map(|_| if rng.bernoulli(0.5) { 1.0 } else { 0.0 }).collect())
            .collect();
        let targets = (0..visits)
            .map(|_| (0..dims.labels).map(|_| if rng.bernoulli(0.3) { 1.0 } else { 0.0 }).collect())
            .collect();
        let mask = (0..visits)
            .map(|_| (0..dims.labels).map(|_| rng.bernoulli(0.9)).collect())
            .collect();
        EncodedPatient {
            id: format!("p{}", rng.next_u64() % 1000),
            static_features,
            visits: visit_vecs,
            targets,
            mask,
        }
    }

    /// Replaces every parameter by a draw from `[-scale, scale]`.
    pub fn randomize<P: ParamTensors>(p: &mut P, scale: f64, rng: &mut Rng) {
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.uniform_range(-scale, scale);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::numerics::{finite_diff_check_terms, DEFAULT_STEP};

    #[test]
    fn every_architecture_passes_gradient_check() {
        let dims = dims();
        for arch in [Arch::Rnn, Arch::Lstm, Arch::Gru, Arch::Tle, Arch::Logreg, Arch::Static] {
            let mut rng = Rng::new(17);
            let mut model = init_params(arch, &dims, Activation::Tanh, &mut rng);
            randomize(&mut model, 0.5, &mut rng);
            let patient = patient(&dims, 6, &mut rng);
            let (_, grad) = model.loss_and_grad(&patient, None).unwrap();
            let report = finite_diff_check_terms(|m: &Model| m.loss_terms(&patient).unwrap(), &model, &grad, DEFAULT_STEP).unwrap();
            assert!(report.max_rel_error < 1e-5, "{arch}: {report:?}");
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let dims = ModelDims { static_dim: 3, dynamic_dim: 3, labels: 3, rank: 3, hidden: 3, window: 1 };
        let a = init_params(Arch::Gru, &dims, Activation::Tanh, &mut Rng::new(5));
        let b = init_params(Arch::Gru, &dims, Activation::Tanh, &mut Rng::new(5));
        assert_eq!(a, b);
        // All matrices here are 3x3 (plus the 3x6 output map), so s <= 1.
        for t in a.tensors() {
            assert!(t.data.iter().all(|v| v.abs() <= 1.0));
        }
        let Model::Fusion(p) = &a else { unreachable!() };
        assert!(p.b_o.iter().all(|v| *v == 0.0));
        assert!(p.b_s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn glorot_mean_is_centered() {
        let mut rng = Rng::new(8);
        let m = crate::numerics::glorot_uniform(100, 100, &mut rng);
        let s = (6.0f64 / 200.0).sqrt();
        let mean = m.as_slice().iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 3.0 * s / (3.0f64 * 1e4).sqrt());
        assert!(m.as_slice().iter().all(|v| v.abs() <= s));
    }

    #[test]
    fn embeddings() {
        let x = vec![0.3, -1.0, 2.0];
        assert_eq!(embed_static(&Matrix::identity(3), &x).unwrap(), x);
        let mut rng = Rng::new(3);
        let a = crate::numerics::glorot_uniform(2, 3, &mut rng);
        assert_eq!(embed_static(&a, &[0.0; 3]).unwrap(), vec![0.0; 2]);
        assert!(embed_visit(&a, &[1.0; 2]).is_err());
        let y = vec![1.0, 0.5, -0.25];
        let lhs = embed_visit(&a, &x.iter().zip(&y).map(|(p, q)| 2.0 * p - 3.0 * q).collect::<Vec<_>>()).unwrap();
        let ex = embed_visit(&a, &x).unwrap();
        let ey = embed_visit(&a, &y).unwrap();
        for i in 0..2 {
            assert!((lhs[i] - (2.0 * ex[i] - 3.0 * ey[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_respect_clamp() {
        let dims = dims();
        let mut rng = Rng::new(4);
        for arch in [Arch::Gru, Arch::Tle, Arch::Logreg, Arch::Static] {
            let mut model = init_params(arch, &dims, Activation::Tanh, &mut rng);
            randomize(&mut model, 50.0, &mut rng);
            let p = patient(&dims, 5, &mut rng);
            for row in model.predict(&p).unwrap() {
                assert!(row.iter().all(|v| (EPSILON..=1.0 - EPSILON).contains(v)));
            }
        }
    }

    #[test]
    fn zero_logit_gradients_give_zero_parameter_gradients() {
        let dims = dims();
        let mut rng = Rng::new(6);
        for arch in [Arch::Rnn, Arch::Lstm, Arch::Gru, Arch::Tle, Arch::Logreg, Arch::Static] {
            let model = init_params(arch, &dims, Activation::Tanh, &mut rng);
            let p = patient(&dims, 4, &mut rng);
            let g = model.backward_from_logits(&p, &vec![vec![0.0; NUM_LABELS]; 4]).unwrap();
            assert!(g.tensors().iter().all(|t| t.data.iter().all(|v| *v == 0.0)), "{arch}");
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let dims = dims();
        let mut rng = Rng::new(7);
        let model = init_params(Arch::Gru, &dims, Activation::Tanh, &mut rng);
        let mut p = patient(&dims, 1, &mut rng);
        p.visits.clear();
        p.targets.clear();
        p.mask.clear();
        assert!(matches!(model.predict(&p), Err(Error::EmptySequence(_))));
    }

    #[test]
    fn arch_names_round_trip() {
        for a in Arch::ALL {
            assert_eq!(a.name().parse::<Arch>().unwrap(), a);
        }
        assert!("transformer".parse::<Arch>().is_err());
    }
}
