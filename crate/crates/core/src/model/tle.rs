//! Temporal latent embeddings: a feedforward network over the latent of a
//! background vector and the latents of the `n` most recent visits, stacked
//! side by side.
//!
//! The background at visit `t` is the static vector concatenated with the
//! per-feature mean of visits `1..t−1` (zero at the first visit). The recent
//! slots hold visits `t, t−1, …, t−n+1`, zero-padded when the history is
//! shorter than `n`.

use super::{check_patient, probabilities, ModelDims, SequenceModel};
use crate::data::EncodedPatient;
use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, sparse_nonzeros, tanh_scalar, Matrix, ParamTensors, Rng, TensorRef};
use crate::train::dropout::mask_grad;
use crate::train::Dropout;

#[derive(Clone, Debug, PartialEq)]
pub struct TleParams {
    pub window: usize,
    /// Background map, static block (`rank × static_dim`).
    pub bg_static: Matrix,
    /// Background map, history-mean block (`rank × dynamic_dim`).
    pub bg_history: Matrix,
    /// Shared map for each recent visit (`rank × dynamic_dim`).
    pub visit: Matrix,
    pub w_h: Matrix,
    pub b_h: Vec<f64>,
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TleTrace {
    static_input: Vec<(usize, f64)>,
    visit_inputs: Vec<Vec<(usize, f64)>>,
    stacks: Vec<Vec<f64>>,
    stack_masks: Vec<Option<Vec<f64>>>,
    hidden: Vec<Vec<f64>>,
    hidden_masks: Vec<Option<Vec<f64>>>,
}

impl TleParams {
    pub fn init(dims: &ModelDims, rng: &mut Rng) -> Self {
        assert!(dims.window >= 1, "TLE window must be at least 1");
        let r = dims.rank;
        TleParams {
            window: dims.window,
            bg_static: glorot_uniform(r, dims.static_dim, rng),
            bg_history: glorot_uniform(r, dims.dynamic_dim, rng),
            visit: glorot_uniform(r, dims.dynamic_dim, rng),
            w_h: glorot_uniform(dims.hidden, (dims.window + 1) * r, rng),
            b_h: vec![0.0; dims.hidden],
            w_o: glorot_uniform(dims.labels, dims.hidden, rng),
            b_o: vec![0.0; dims.labels],
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            static_dim: self.bg_static.cols(),
            dynamic_dim: self.visit.cols(),
            labels: self.w_o.rows(),
            rank: self.visit.rows(),
            hidden: self.w_h.rows(),
            window: self.window,
        }
    }

    fn rank(&self) -> usize {
        self.visit.rows()
    }

    /// Prediction for a single visit from an explicit background vector
    /// (static ⊕ history mean) and up to `window` recent visits, most recent
    /// first. Missing slots are zero vectors.
    pub fn tle_forward(&self, background: &[f64], recent: &[Vec<f64>]) -> Result<Vec<f64>> {
        let s = self.bg_static.cols();
        let d = self.visit.cols();
        if background.len() != s + d {
            return Err(Error::dim("TLE background", s + d, background.len()));
        }
        if recent.len() > self.window {
            return Err(Error::dim("TLE recent visits", self.window, recent.len()));
        }
        let r = self.rank();
        let mut stack = vec![0.0; (self.window + 1) * r];
        self.bg_static.mul_vec_add(&background[..s], &mut stack[..r]);
        self.bg_history.mul_vec_add(&background[s..], &mut stack[..r]);
        for (j, x) in recent.iter().enumerate() {
            if x.len() != d {
                return Err(Error::dim("TLE visit", d, x.len()));
            }
            self.visit.mul_vec_add(x, &mut stack[(j + 1) * r..(j + 2) * r]);
        }
        let mut hidden = self.b_h.clone();
        self.w_h.mul_vec_add(&stack, &mut hidden);
        hidden.iter_mut().for_each(|v| *v = tanh_scalar(*v));
        let mut logits = self.b_o.clone();
        self.w_o.mul_vec_add(&hidden, &mut logits);
        Ok(probabilities(&logits))
    }
}

impl SequenceModel for TleParams {
    type Trace = TleTrace;

    fn forward(&self, patient: &EncodedPatient, mut dropout: Option<&mut Dropout>) -> Result<(Vec<Vec<f64>>, TleTrace)> {
        check_patient(patient, self.bg_static.cols(), self.visit.cols())?;
        let r = self.rank();
        let n = self.window;
        let steps = patient.visits.len();

        let static_input = sparse_nonzeros(&patient.static_features);
        let mut static_latent = vec![0.0; r];
        self.bg_static.mul_sparse_add(&static_input, &mut static_latent);

        let visit_inputs: Vec<Vec<(usize, f64)>> = patient.visits.iter().map(|x| sparse_nonzeros(x)).collect();
        let mut visit_latents = Vec::with_capacity(steps);
        let mut history_latents = Vec::with_capacity(steps);
        for nz in &visit_inputs {
            let mut v = vec![0.0; r];
            self.visit.mul_sparse_add(nz, &mut v);
            visit_latents.push(v);
            let mut h = vec![0.0; r];
            self.bg_history.mul_sparse_add(nz, &mut h);
            history_latents.push(h);
        }

        let mut probs = Vec::with_capacity(steps);
        let mut trace = TleTrace {
            static_input,
            visit_inputs,
            stacks: Vec::with_capacity(steps),
            stack_masks: Vec::with_capacity(steps),
            hidden: Vec::with_capacity(steps),
            hidden_masks: Vec::with_capacity(steps),
        };
        let mut history_sum = vec![0.0; r];
        for t in 0..steps {
            let mut stack = vec![0.0; (n + 1) * r];
            for k in 0..r {
                let mean = if t == 0 { 0.0 } else { history_sum[k] / t as f64 };
                stack[k] = static_latent[k] + mean;
            }
            for j in 0..n.min(t + 1) {
                stack[(j + 1) * r..(j + 2) * r].copy_from_slice(&visit_latents[t - j]);
            }
            let stack_mask = dropout.as_deref_mut().and_then(|d| d.apply_in_place(&mut stack));

            let mut hidden = self.b_h.clone();
            self.w_h.mul_vec_add(&stack, &mut hidden);
            hidden.iter_mut().for_each(|v| *v = tanh_scalar(*v));
            let mut dropped = hidden.clone();
            let hidden_mask = dropout.as_deref_mut().and_then(|d| d.apply_in_place(&mut dropped));

            let mut logits = self.b_o.clone();
            self.w_o.mul_vec_add(&dropped, &mut logits);
            probs.push(probabilities(&logits));

            trace.stacks.push(stack);
            trace.stack_masks.push(stack_mask);
            trace.hidden.push(hidden);
            trace.hidden_masks.push(hidden_mask);
            for (s, h) in history_sum.iter_mut().zip(&history_latents[t]) {
                *s += h;
            }
        }
        Ok((probs, trace))
    }

    fn backward(&self, trace: &TleTrace, dlogits: &[Vec<f64>]) -> Result<Self> {
        let steps = trace.stacks.len();
        if dlogits.len() != steps {
            return Err(Error::TraceMismatch(format!("{steps} visits but {} gradient rows", dlogits.len())));
        }
        let r = self.rank();
        let n = self.window;
        let mut g = self.zeros_like();
        let mut d_static_latent = vec![0.0; r];
        let mut d_background = vec![vec![0.0; r]; steps];
        let mut d_visit_latent = vec![vec![0.0; r]; steps];

        for t in 0..steps {
            let dl = &dlogits[t];
            if dl.len() != self.w_o.rows() {
                return Err(Error::dim("logit gradient", self.w_o.rows(), dl.len()));
            }
            let mut dropped = trace.hidden[t].clone();
            mask_grad(&mut dropped, trace.hidden_masks[t].as_ref());
            g.w_o.add_outer(dl, &dropped);
            g.b_o.iter_mut().zip(dl).for_each(|(g, d)| *g += d);

            let mut dh = vec![0.0; self.w_o.cols()];
            self.w_o.mul_t_vec_add(dl, &mut dh);
            mask_grad(&mut dh, trace.hidden_masks[t].as_ref());
            let d_pre: Vec<f64> = dh
                .iter()
                .zip(&trace.hidden[t])
                .map(|(d, h)| d * (1.0 - h * h))
                .collect();
            g.w_h.add_outer(&d_pre, &trace.stacks[t]);
            g.b_h.iter_mut().zip(&d_pre).for_each(|(g, d)| *g += d);

            let mut d_stack = vec![0.0; (n + 1) * r];
            self.w_h.mul_t_vec_add(&d_pre, &mut d_stack);
            mask_grad(&mut d_stack, trace.stack_masks[t].as_ref());
            for k in 0..r {
                d_static_latent[k] += d_stack[k];
                d_background[t][k] = d_stack[k];
            }
            for j in 0..n.min(t + 1) {
                for k in 0..r {
                    d_visit_latent[t - j][k] += d_stack[(j + 1) * r + k];
                }
            }
        }

        g.bg_static.add_outer_sparse(&d_static_latent, &trace.static_input);

        // Visit s contributes 1/t of the history mean at every later visit t.
        let mut suffix = vec![0.0; r];
        for s in (0..steps).rev() {
            g.visit.add_outer_sparse(&d_visit_latent[s], &trace.visit_inputs[s]);
            g.bg_history.add_outer_sparse(&suffix, &trace.visit_inputs[s]);
            let t = s as f64;
            if s > 0 {
                for k in 0..r {
                    suffix[k] += d_background[s][k] / t;
                }
            }
        }
        Ok(g)
    }
}

impl ParamTensors for TleParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef::matrix("background.static", &self.bg_static),
            TensorRef::matrix("background.history", &self.bg_history),
            TensorRef::matrix("visit", &self.visit),
            TensorRef::matrix("hidden.w", &self.w_h),
            TensorRef::vector("hidden.b", &self.b_h),
            TensorRef::matrix("out.w", &self.w_o),
            TensorRef::vector("out.b", &self.b_o),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.bg_static.as_mut_slice(),
            self.bg_history.as_mut_slice(),
            self.visit.as_mut_slice(),
            self.w_h.as_mut_slice(),
            &mut self.b_h,
            self.w_o.as_mut_slice(),
            &mut self.b_o,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::numerics::{finite_diff_check_terms, DEFAULT_STEP};

    fn background(p: &EncodedPatient, t: usize) -> Vec<f64> {
        let d = p.visits[0].len();
        let mut bg = p.static_features.clone();
        let mut mean = vec![0.0; d];
        for s in 0..t {
            for k in 0..d {
                mean[k] += p.visits[s][k] / t as f64;
            }
        }
        bg.extend(mean);
        bg
    }

    fn recent(p: &EncodedPatient, t: usize, n: usize) -> Vec<Vec<f64>> {
        (0..n.min(t + 1)).map(|j| p.visits[t - j].clone()).collect()
    }

    #[test]
    fn zero_weights_give_half() {
        let dims = dims();
        let mut rng = Rng::new(1);
        let mut p = TleParams::init(&dims, &mut rng);
        p.w_o.fill(0.0);
        let patient = patient(&dims, 3, &mut rng);
        assert!(p.forward(&patient, None).unwrap().0.iter().flatten().all(|v| *v == 0.5));
    }

    #[test]
    fn sequence_forward_matches_single_visit_forward() {
        let dims = dims();
        let mut rng = Rng::new(2);
        let mut p = TleParams::init(&dims, &mut rng);
        randomize(&mut p, 0.6, &mut rng);
        let patient = patient(&dims, 7, &mut rng);
        let (probs, _) = p.forward(&patient, None).unwrap();
        for t in 0..7 {
            let single = p.tle_forward(&background(&patient, t), &recent(&patient, t, 3)).unwrap();
            for k in 0..dims.labels {
                assert!((single[k] - probs[t][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn short_history_is_zero_padded() {
        let dims = dims();
        let mut rng = Rng::new(3);
        let p = TleParams::init(&dims, &mut rng);
        let patient = patient(&dims, 1, &mut rng);
        let explicit = p
            .tle_forward(&background(&patient, 0), &[patient.visits[0].clone(), vec![0.0; 9], vec![0.0; 9]])
            .unwrap();
        let padded = p.tle_forward(&background(&patient, 0), &recent(&patient, 0, 3)).unwrap();
        assert_eq!(explicit, padded);
        assert!(explicit.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ignores_visits_outside_window_given_background() {
        let dims = dims();
        let mut rng = Rng::new(4);
        let mut p = TleParams::init(&dims, &mut rng);
        randomize(&mut p, 0.6, &mut rng);
        let original = patient(&dims, 8, &mut rng);
        // Swapping two visits older than the window keeps the history mean fixed.
        let t = 7;
        let mut swapped = original.clone();
        swapped.visits.swap(t - 3 - 1, t - 3 - 2);
        let a = p.forward(&original, None).unwrap().0;
        let b = p.forward(&swapped, None).unwrap().0;
        for k in 0..dims.labels {
            assert!((a[t][k] - b[t][k]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_check() {
        let dims = dims();
        let mut rng = Rng::new(5);
        for window in [1, 3, 5] {
            let mut p = TleParams::init(&ModelDims { window, ..dims }, &mut rng);
            randomize(&mut p, 0.5, &mut rng);
            let patient = patient(&dims, 7, &mut rng);
            let (_, g) = p.loss_and_grad(&patient, None).unwrap();
            let report = finite_diff_check_terms(|q: &TleParams| q.loss_terms(&patient, None).unwrap(), &p, &g, DEFAULT_STEP).unwrap();
            assert!(report.max_rel_error < 1e-5, "window {window}: {report:?}");
        }
    }
}
