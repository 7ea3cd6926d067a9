//! Logistic regression over `static ⊕ current visit ⊕ mean of prior visits`.

use super::{check_patient, probabilities, ModelDims, SequenceModel};
use crate::data::EncodedPatient;
use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, sparse_nonzeros, Matrix, ParamTensors, Rng, TensorRef};
use crate::train::Dropout;

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegParams {
    pub w_static: Matrix,
    pub w_visit: Matrix,
    pub w_history: Matrix,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LogRegTrace {
    static_input: Vec<(usize, f64)>,
    visit_inputs: Vec<Vec<(usize, f64)>>,
}

/// Dense feature vector seen at visit `t`.
pub fn logreg_features(patient: &EncodedPatient, t: usize) -> Vec<f64> {
    let d = patient.visits[t].len();
    let mut f = patient.static_features.clone();
    f.extend_from_slice(&patient.visits[t]);
    let mut mean = vec![0.0; d];
    if t > 0 {
        for v in &patient.visits[..t] {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= t as f64);
    }
    f.extend(mean);
    f
}

/// `σ(W · features + b)`, clamped.
pub fn logreg_forward(w: &Matrix, b: &[f64], features: &[f64]) -> Result<Vec<f64>> {
    if w.cols() != features.len() {
        return Err(Error::dim("logreg features", w.cols(), features.len()));
    }
    if w.rows() != b.len() {
        return Err(Error::dim("logreg bias", w.rows(), b.len()));
    }
    let mut z = b.to_vec();
    w.mul_vec_add(features, &mut z);
    Ok(probabilities(&z))
}

impl LogRegParams {
    pub fn init(dims: &ModelDims, rng: &mut Rng) -> Self {
        // Glorot scale of the full concatenated map, split into blocks.
        let fan_in = dims.static_dim + 2 * dims.dynamic_dim;
        let full = glorot_uniform(dims.labels, fan_in, rng);
        let block = |from: usize, width: usize| Matrix::from_fn(dims.labels, width, |i, j| full.get(i, from + j));
        LogRegParams {
            w_static: block(0, dims.static_dim),
            w_visit: block(dims.static_dim, dims.dynamic_dim),
            w_history: block(dims.static_dim + dims.dynamic_dim, dims.dynamic_dim),
            b: vec![0.0; dims.labels],
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            static_dim: self.w_static.cols(),
            dynamic_dim: self.w_visit.cols(),
            labels: self.b.len(),
            rank: 0,
            hidden: 0,
            window: 1,
        }
    }

    /// The three weight blocks as one `labels × features` matrix.
    pub fn full_weights(&self) -> Matrix {
        let s = self.w_static.cols();
        let d = self.w_visit.cols();
        Matrix::from_fn(self.b.len(), s + 2 * d, |i, j| {
            if j < s {
                self.w_static.get(i, j)
            } else if j < s + d {
                self.w_visit.get(i, j - s)
            } else {
                self.w_history.get(i, j - s - d)
            }
        })
    }
}

impl SequenceModel for LogRegParams {
    type Trace = LogRegTrace;

    fn forward(&self, patient: &EncodedPatient, _dropout: Option<&mut Dropout>) -> Result<(Vec<Vec<f64>>, LogRegTrace)> {
        check_patient(patient, self.w_static.cols(), self.w_visit.cols())?;
        let k = self.b.len();
        let static_input = sparse_nonzeros(&patient.static_features);
        let mut base = self.b.clone();
        self.w_static.mul_sparse_add(&static_input, &mut base);

        let visit_inputs: Vec<Vec<(usize, f64)>> = patient.visits.iter().map(|x| sparse_nonzeros(x)).collect();
        let mut history_sum = vec![0.0; k];
        let mut probs = Vec::with_capacity(visit_inputs.len());
        for (t, nz) in visit_inputs.iter().enumerate() {
            let mut z = base.clone();
            self.w_visit.mul_sparse_add(nz, &mut z);
            if t > 0 {
                for (z, h) in z.iter_mut().zip(&history_sum) {
                    *z += h / t as f64;
                }
            }
            probs.push(probabilities(&z));
            self.w_history.mul_sparse_add(nz, &mut history_sum);
        }
        Ok((probs, LogRegTrace { static_input, visit_inputs }))
    }

    fn backward(&self, trace: &LogRegTrace, dlogits: &[Vec<f64>]) -> Result<Self> {
        let steps = trace.visit_inputs.len();
        if dlogits.len() != steps {
            return Err(Error::TraceMismatch(format!("{steps} visits but {} gradient rows", dlogits.len())));
        }
        let k = self.b.len();
        let mut g = self.zeros_like();
        let mut total = vec![0.0; k];
        for dl in dlogits {
            if dl.len() != k {
                return Err(Error::dim("logit gradient", k, dl.len()));
            }
            total.iter_mut().zip(dl).for_each(|(a, d)| *a += d);
        }
        g.b.copy_from_slice(&total);
        g.w_static.add_outer_sparse(&total, &trace.static_input);

        let mut suffix = vec![0.0; k];
        for s in (0..steps).rev() {
            g.w_visit.add_outer_sparse(&dlogits[s], &trace.visit_inputs[s]);
            g.w_history.add_outer_sparse(&suffix, &trace.visit_inputs[s]);
            if s > 0 {
                for (a, d) in suffix.iter_mut().zip(&dlogits[s]) {
                    *a += d / s as f64;
                }
            }
        }
        Ok(g)
    }
}

impl ParamTensors for LogRegParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef::matrix("w.static", &self.w_static),
            TensorRef::matrix("w.visit", &self.w_visit),
            TensorRef::matrix("w.history", &self.w_history),
            TensorRef::vector("b", &self.b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_static.as_mut_slice(),
            self.w_visit.as_mut_slice(),
            self.w_history.as_mut_slice(),
            &mut self.b,
        ]
    }
}
