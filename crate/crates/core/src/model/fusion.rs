//! Static/dynamic fusion network.
//!
//! ```text
//! x̃ᵉ = A x̃            h̃ = tanh(W_s x̃ᵉ + b_s)
//! xᵉ_t = B x_t         h_t = cell(xᵉ_t, h_{t−1})
//! ŷ_t = σ(W_o [h̃; h_t] + b_o)
//! ```
//!
//! Dropout, when enabled, masks `x̃ᵉ`, every `xᵉ_t` and every concatenated
//! `[h̃; h_t]`; the recurrent transition itself is never masked.

use super::{check_patient, probabilities, ModelDims, SequenceModel};
use crate::cells::{CellKind, CellParams, StepTrace};
use crate::data::EncodedPatient;
use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, sparse_nonzeros, tanh_scalar, Activation, Matrix, ParamTensors, Rng, TensorRef};
use crate::train::dropout::mask_grad;
use crate::train::Dropout;

#[derive(Clone, Debug, PartialEq)]
pub struct FusionParams {
    /// Static embedding, `rank × static_dim`.
    pub a: Matrix,
    /// Visit embedding, `rank × dynamic_dim`.
    pub b: Matrix,
    /// Static branch hidden layer, `hidden × rank`.
    pub w_s: Matrix,
    pub b_s: Vec<f64>,
    pub cell: CellParams,
    /// Output map, `labels × (hidden_static + hidden_dynamic)`.
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FusionTrace {
    static_input: Vec<(usize, f64)>,
    static_embed: Vec<f64>,
    static_mask: Option<Vec<f64>>,
    static_hidden: Vec<f64>,
    visit_inputs: Vec<Vec<(usize, f64)>>,
    visit_masks: Vec<Option<Vec<f64>>>,
    cell: Vec<StepTrace>,
    concat: Vec<Vec<f64>>,
    concat_masks: Vec<Option<Vec<f64>>>,
}

impl FusionParams {
    pub fn init(kind: CellKind, dims: &ModelDims, activation: Activation, rng: &mut Rng) -> Self {
        FusionParams {
            a: glorot_uniform(dims.rank, dims.static_dim, rng),
            b: glorot_uniform(dims.rank, dims.dynamic_dim, rng),
            w_s: glorot_uniform(dims.hidden, dims.rank, rng),
            b_s: vec![0.0; dims.hidden],
            cell: CellParams::init(kind, dims.rank, dims.hidden, activation, rng),
            w_o: glorot_uniform(dims.labels, 2 * dims.hidden, rng),
            b_o: vec![0.0; dims.labels],
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            static_dim: self.a.cols(),
            dynamic_dim: self.b.cols(),
            labels: self.w_o.rows(),
            rank: self.b.rows(),
            hidden: self.cell.hidden_dim(),
            window: 0,
        }
    }

    fn static_hidden_dim(&self) -> usize {
        self.w_s.rows()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let hs = self.static_hidden_dim();
        let hd = self.cell.hidden_dim();
        if self.w_s.cols() != self.a.rows() {
            return Err(Error::dim("fusion static branch", self.a.rows(), self.w_s.cols()));
        }
        if self.cell.input_dim() != self.b.rows() {
            return Err(Error::dim("fusion cell input", self.b.rows(), self.cell.input_dim()));
        }
        if self.w_o.cols() != hs + hd {
            return Err(Error::dim("fusion output map", hs + hd, self.w_o.cols()));
        }
        if self.b_o.len() != self.w_o.rows() || self.b_s.len() != hs {
            return Err(Error::dim("fusion biases", self.w_o.rows(), self.b_o.len()));
        }
        Ok(())
    }

    /// Probabilities for every visit, plus the trace needed by [`SequenceModel::backward`].
    pub fn forward_sequence(
        &self,
        static_features: &[f64],
        visits: &[Vec<f64>],
        mut dropout: Option<&mut Dropout>,
    ) -> Result<(Vec<Vec<f64>>, FusionTrace)> {
        if static_features.len() != self.a.cols() {
            return Err(Error::dim("static features", self.a.cols(), static_features.len()));
        }
        let static_input = sparse_nonzeros(static_features);
        let mut static_embed = vec![0.0; self.a.rows()];
        self.a.mul_sparse_add(&static_input, &mut static_embed);
        let static_mask = dropout.as_deref_mut().and_then(|d| d.apply_in_place(&mut static_embed));
        let mut static_hidden = self.b_s.clone();
        self.w_s.mul_vec_add(&static_embed, &mut static_hidden);
        static_hidden.iter_mut().for_each(|v| *v = tanh_scalar(*v));

        let mut visit_inputs = Vec::with_capacity(visits.len());
        let mut visit_masks = Vec::with_capacity(visits.len());
        let mut embedded = Vec::with_capacity(visits.len());
        for x in visits {
            if x.len() != self.b.cols() {
                return Err(Error::dim("visit vector", self.b.cols(), x.len()));
            }
            let nz = sparse_nonzeros(x);
            let mut e = vec![0.0; self.b.rows()];
            self.b.mul_sparse_add(&nz, &mut e);
            visit_masks.push(dropout.as_deref_mut().and_then(|d| d.apply_in_place(&mut e)));
            visit_inputs.push(nz);
            embedded.push(e);
        }
        let cell = self.cell.forward(&embedded, None)?;

        let mut concat = Vec::with_capacity(visits.len());
        let mut concat_masks = Vec::with_capacity(visits.len());
        let mut probs = Vec::with_capacity(visits.len());
        for step in &cell {
            let mut joined = static_hidden.clone();
            joined.extend_from_slice(step.hidden());
            concat_masks.push(dropout.as_deref_mut().and_then(|d| d.apply_in_place(&mut joined)));
            let mut logits = self.b_o.clone();
            self.w_o.mul_vec_add(&joined, &mut logits);
            probs.push(probabilities(&logits));
            concat.push(joined);
        }
        Ok((
            probs,
            FusionTrace {
                static_input,
                static_embed,
                static_mask,
                static_hidden,
                visit_inputs,
                visit_masks,
                cell,
                concat,
                concat_masks,
            },
        ))
    }
}

impl SequenceModel for FusionParams {
    type Trace = FusionTrace;

    fn forward(&self, patient: &EncodedPatient, dropout: Option<&mut Dropout>) -> Result<(Vec<Vec<f64>>, FusionTrace)> {
        check_patient(patient, self.a.cols(), self.b.cols())?;
        self.forward_sequence(&patient.static_features, &patient.visits, dropout)
    }

    fn backward(&self, trace: &FusionTrace, dlogits: &[Vec<f64>]) -> Result<Self> {
        let steps = trace.cell.len();
        if dlogits.len() != steps {
            return Err(Error::TraceMismatch(format!("{steps} visits but {} gradient rows", dlogits.len())));
        }
        let hs = self.static_hidden_dim();
        let mut g = self.zeros_like();
        let mut d_static_hidden = vec![0.0; hs];
        let mut upstream = Vec::with_capacity(steps);
        for (t, dl) in dlogits.iter().enumerate() {
            if dl.len() != self.w_o.rows() {
                return Err(Error::dim("logit gradient", self.w_o.rows(), dl.len()));
            }
            g.w_o.add_outer(dl, &trace.concat[t]);
            for (gb, d) in g.b_o.iter_mut().zip(dl) {
                *gb += d;
            }
            let mut d_joined = vec![0.0; self.w_o.cols()];
            self.w_o.mul_t_vec_add(dl, &mut d_joined);
            mask_grad(&mut d_joined, trace.concat_masks[t].as_ref());
            for (acc, d) in d_static_hidden.iter_mut().zip(&d_joined[..hs]) {
                *acc += d;
            }
            upstream.push(d_joined[hs..].to_vec());
        }

        let cell_grads = self.cell.backward(&trace.cell, &upstream)?;
        g.cell = cell_grads.params;
        for (t, mut dx) in cell_grads.inputs.into_iter().enumerate() {
            mask_grad(&mut dx, trace.visit_masks[t].as_ref());
            g.b.add_outer_sparse(&dx, &trace.visit_inputs[t]);
        }

        let d_pre: Vec<f64> = d_static_hidden
            .iter()
            .zip(&trace.static_hidden)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        g.w_s.add_outer(&d_pre, &trace.static_embed);
        for (gb, d) in g.b_s.iter_mut().zip(&d_pre) {
            *gb += d;
        }
        let mut d_embed = vec![0.0; self.a.rows()];
        self.w_s.mul_t_vec_add(&d_pre, &mut d_embed);
        mask_grad(&mut d_embed, trace.static_mask.as_ref());
        g.a.add_outer_sparse(&d_embed, &trace.static_input);
        Ok(g)
    }
}

impl ParamTensors for FusionParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = vec![
            TensorRef::matrix("a", &self.a),
            TensorRef::matrix("b", &self.b),
            TensorRef::matrix("static.w", &self.w_s),
            TensorRef::vector("static.b", &self.b_s),
        ];
        out.extend(self.cell.tensors().into_iter().map(|t| t.prefixed("cell.")));
        out.push(TensorRef::matrix("out.w", &self.w_o));
        out.push(TensorRef::vector("out.b", &self.b_o));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.a.as_mut_slice(),
            self.b.as_mut_slice(),
            self.w_s.as_mut_slice(),
            &mut self.b_s,
        ];
        out.extend(self.cell.tensors_mut());
        out.push(self.w_o.as_mut_slice());
        out.push(&mut self.b_o);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::numerics::{finite_diff_check_terms, DEFAULT_STEP};

    #[test]
    fn zero_output_map_gives_half() {
        let dims = dims();
        let mut rng = Rng::new(1);
        let mut p = FusionParams::init(CellKind::Gru, &dims, Activation::Tanh, &mut rng);
        p.w_o.fill(0.0);
        let patient = patient(&dims, 4, &mut rng);
        let (probs, _) = p.forward(&patient, None).unwrap();
        assert_eq!(probs.len(), 4);
        assert!(probs.iter().flatten().all(|v| *v == 0.5));
    }

    #[test]
    fn single_visit_single_row() {
        let dims = dims();
        let mut rng = Rng::new(2);
        let p = FusionParams::init(CellKind::Lstm, &dims, Activation::Tanh, &mut rng);
        let patient = patient(&dims, 1, &mut rng);
        assert_eq!(p.forward(&patient, None).unwrap().0.len(), 1);
    }

    #[test]
    fn causal_in_visits() {
        let dims = dims();
        let mut rng = Rng::new(3);
        for kind in [CellKind::Rnn, CellKind::Lstm, CellKind::Gru] {
            let mut p = FusionParams::init(kind, &dims, Activation::Tanh, &mut rng);
            randomize(&mut p, 0.7, &mut rng);
            let original = patient(&dims, 6, &mut rng);
            let mut perturbed = original.clone();
            for v in perturbed.visits[4].iter_mut() {
                *v = 1.0 - *v;
            }
            let a = p.forward(&original, None).unwrap().0;
            let b = p.forward(&perturbed, None).unwrap().0;
            assert_eq!(a[..4], b[..4]);
            assert_ne!(a[4], b[4]);
        }
    }

    #[test]
    fn full_gradient_with_unmasked_targets() {
        let dims = dims();
        let mut rng = Rng::new(4);
        for kind in [CellKind::Rnn, CellKind::Lstm, CellKind::Gru] {
            let mut p = FusionParams::init(kind, &dims, Activation::Tanh, &mut rng);
            randomize(&mut p, 0.5, &mut rng);
            let mut patient = patient(&dims, 6, &mut rng);
            patient.mask.iter_mut().for_each(|m| m.fill(true));
            let (_, g) = p.loss_and_grad(&patient, None).unwrap();
            let report = finite_diff_check_terms(|q: &FusionParams| q.loss_terms(&patient, None).unwrap(), &p, &g, DEFAULT_STEP).unwrap();
            assert!(report.max_rel_error < 1e-5, "{kind:?}: {report:?}");
            assert_eq!(report.tensors.len(), p.tensor_names().len());
        }
    }

    #[test]
    fn gradient_with_fixed_dropout_masks() {
        // Replaying the same dropout stream makes the objective deterministic,
        // so the masked backward pass can be checked too.
        let dims = dims();
        let mut rng = Rng::new(5);
        let mut p = FusionParams::init(CellKind::Gru, &dims, Activation::Tanh, &mut rng);
        randomize(&mut p, 0.5, &mut rng);
        let patient = patient(&dims, 5, &mut rng);
        let stream = Rng::new(77);
        let terms = |q: &FusionParams| {
            let mut r = stream.clone();
            q.loss_terms(&patient, Some(&mut Dropout::new(0.3, &mut r))).unwrap()
        };
        let mut r = stream.clone();
        let (_, g) = p.loss_and_grad(&patient, Some(&mut Dropout::new(0.3, &mut r))).unwrap();
        let report = finite_diff_check_terms(terms, &p, &g, DEFAULT_STEP).unwrap();
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn static_embedding_receives_gradient() {
        let dims = dims();
        let mut rng = Rng::new(6);
        let p = FusionParams::init(CellKind::Gru, &dims, Activation::Tanh, &mut rng);
        let mut patient = patient(&dims, 3, &mut rng);
        patient.mask.iter_mut().for_each(|m| m.fill(true));
        let (_, g) = p.loss_and_grad(&patient, None).unwrap();
        assert!(g.a.as_slice().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let dims = dims();
        let mut rng = Rng::new(7);
        let p = FusionParams::init(CellKind::Gru, &dims, Activation::Tanh, &mut rng);
        let mut patient = patient(&dims, 3, &mut rng);
        patient.visits[1].push(0.0);
        assert!(matches!(p.forward(&patient, None), Err(Error::Dimension { .. })));
        assert!(p.check_shapes().is_ok());
    }
}
