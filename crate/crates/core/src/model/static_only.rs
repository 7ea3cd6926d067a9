//! Feedforward model over the static vector alone; every visit of a patient
//! gets the same prediction.

use super::{check_patient, probabilities, ModelDims, SequenceModel};
use crate::data::EncodedPatient;
use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, sparse_nonzeros, tanh_scalar, Matrix, ParamTensors, Rng, TensorRef};
use crate::train::dropout::mask_grad;
use crate::train::Dropout;

#[derive(Clone, Debug, PartialEq)]
pub struct StaticOnlyParams {
    pub a: Matrix,
    pub w_h: Matrix,
    pub b_h: Vec<f64>,
    pub w_o: Matrix,
    pub b_o: Vec<f64>,
    /// Width of the (ignored) visit vectors, kept for input validation.
    pub dynamic_dim: usize,
}

#[derive(Clone, Debug)]
pub struct StaticTrace {
    steps: usize,
    input: Vec<(usize, f64)>,
    embed: Vec<f64>,
    embed_mask: Option<Vec<f64>>,
    hidden: Vec<f64>,
    hidden_mask: Option<Vec<f64>>,
}

impl StaticOnlyParams {
    pub fn init(dims: &ModelDims, rng: &mut Rng) -> Self {
        StaticOnlyParams {
            a: glorot_uniform(dims.rank, dims.static_dim, rng),
            w_h: glorot_uniform(dims.hidden, dims.rank, rng),
            b_h: vec![0.0; dims.hidden],
            w_o: glorot_uniform(dims.labels, dims.hidden, rng),
            b_o: vec![0.0; dims.labels],
            dynamic_dim: dims.dynamic_dim,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            static_dim: self.a.cols(),
            dynamic_dim: self.dynamic_dim,
            labels: self.w_o.rows(),
            rank: self.a.rows(),
            hidden: self.w_h.rows(),
            window: 0,
        }
    }
}

impl SequenceModel for StaticOnlyParams {
    type Trace = StaticTrace;

    fn forward(&self, patient: &EncodedPatient, mut dropout: Option<&mut Dropout>) -> Result<(Vec<Vec<f64>>, StaticTrace)> {
        check_patient(patient, self.a.cols(), self.dynamic_dim)?;
        let input = sparse_nonzeros(&patient.static_features);
        let mut embed = vec![0.0; self.a.rows()];
        self.a.mul_sparse_add(&input, &mut embed);
        let embed_mask = dropout.as_deref_mut().and_then(|d| d.apply_in_place(&mut embed));
        let mut hidden = self.b_h.clone();
        self.w_h.mul_vec_add(&embed, &mut hidden);
        hidden.iter_mut().for_each(|v| *v = tanh_scalar(*v));
        let mut dropped = hidden.clone();
        let hidden_mask = dropout.as_deref_mut().and_then(|d| d.apply_in_place(&mut dropped));
        let mut logits = self.b_o.clone();
        self.w_o.mul_vec_add(&dropped, &mut logits);
        let row = probabilities(&logits);
        let steps = patient.visits.len();
        Ok((
            vec![row; steps],
            StaticTrace {
                steps,
                input,
                embed,
                embed_mask,
                hidden,
                hidden_mask,
            },
        ))
    }

    fn backward(&self, trace: &StaticTrace, dlogits: &[Vec<f64>]) -> Result<Self> {
        if dlogits.len() != trace.steps {
            return Err(Error::TraceMismatch(format!("{} visits but {} gradient rows", trace.steps, dlogits.len())));
        }
        let k = self.w_o.rows();
        let mut total = vec![0.0; k];
        for dl in dlogits {
            if dl.len() != k {
                return Err(Error::dim("logit gradient", k, dl.len()));
            }
            total.iter_mut().zip(dl).for_each(|(a, d)| *a += d);
        }
        let mut g = self.zeros_like();
        let mut dropped = trace.hidden.clone();
        mask_grad(&mut dropped, trace.hidden_mask.as_ref());
        g.w_o.add_outer(&total, &dropped);
        g.b_o.copy_from_slice(&total);
        let mut dh = vec![0.0; self.w_h.rows()];
        self.w_o.mul_t_vec_add(&total, &mut dh);
        mask_grad(&mut dh, trace.hidden_mask.as_ref());
        let d_pre: Vec<f64> = dh.iter().zip(&trace.hidden).map(|(d, h)| d * (1.0 - h * h)).collect();
        g.w_h.add_outer(&d_pre, &trace.embed);
        g.b_h.copy_from_slice(&d_pre);
        let mut d_embed = vec![0.0; self.a.rows()];
        self.w_h.mul_t_vec_add(&d_pre, &mut d_embed);
        mask_grad(&mut d_embed, trace.embed_mask.as_ref());
        g.a.add_outer_sparse(&d_embed, &trace.input);
        Ok(g)
    }
}

impl ParamTensors for StaticOnlyParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef::matrix("a", &self.a),
            TensorRef::matrix("hidden.w", &self.w_h),
            TensorRef::vector("hidden.b", &self.b_h),
            TensorRef::matrix("out.w", &self.w_o),
            TensorRef::vector("out.b", &self.b_o),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.a.as_mut_slice(),
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

    #[test]
    fn visit_invariant() {
        let dims = dims();
        let mut rng = Rng::new(1);
        let mut p = StaticOnlyParams::init(&dims, &mut rng);
        randomize(&mut p, 0.8, &mut rng);
        let patient = patient(&dims, 5, &mut rng);
        let (probs, _) = p.forward(&patient, None).unwrap();
        assert!(probs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn zero_weights_give_half() {
        let dims = dims();
        let mut rng = Rng::new(2);
        let mut p = StaticOnlyParams::init(&dims, &mut rng);
        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        let patient = patient(&dims, 2, &mut rng);
        assert!(p.forward(&patient, None).unwrap().0.iter().flatten().all(|v| *v == 0.5));
    }

    #[test]
    fn gradient_check() {
        let dims = dims();
        let mut rng = Rng::new(3);
        let mut p = StaticOnlyParams::init(&dims, &mut rng);
        randomize(&mut p, 0.5, &mut rng);
        let patient = patient(&dims, 4, &mut rng);
        let (_, g) = p.loss_and_grad(&patient, None).unwrap();
        let report = finite_diff_check_terms(|q: &StaticOnlyParams| q.loss_terms(&patient, None).unwrap(), &p, &g, DEFAULT_STEP).unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
    }
}
