//! Recurrent cells: plain RNN, LSTM with diagonal peepholes, and GRU.
//!
//! Each cell has a single-step forward that records a trace, a single-step
//! backward that consumes it, and [`CellParams::backward`] runs full
//! backpropagation through time over a sequence of traces.

use crate::error::{Error, Result};
use crate::numerics::{
    add_into, glorot_uniform, sigmoid_scalar, tanh_scalar, Activation, Matrix, ParamTensors, Rng,
    TensorRef,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    Rnn,
    Lstm,
    Gru,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Rnn => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

/// Additive pre-activation offsets, used by tests to pin gates open or shut.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GateOffsets {
    pub input: f64,
    pub forget: f64,
    pub output: f64,
    pub candidate: f64,
    pub reset: f64,
    pub update: f64,
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::dim(context, expected, actual));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Plain RNN
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct RnnCellParams {
    pub w: Matrix,
    pub u: Matrix,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct RnnTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub h: Vec<f64>,
}

impl RnnCellParams {
    pub fn init(input: usize, hidden: usize, activation: Activation, rng: &mut Rng) -> Self {
        RnnCellParams {
            w: glorot_uniform(hidden, input, rng),
            u: glorot_uniform(hidden, hidden, rng),
            activation,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }
}

impl ParamTensors for RnnCellParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![TensorRef::matrix("w", &self.w), TensorRef::matrix("u", &self.u)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), self.u.as_mut_slice()]
    }
}

/// `h_t = act(W x_t + U h_{t−1})`
pub fn rnn_step(
    p: &RnnCellParams,
    x: &[f64],
    h_prev: &[f64],
    offsets: Option<&GateOffsets>,
) -> Result<(Vec<f64>, RnnTrace)> {
    check_len("rnn_step input", p.input_dim(), x.len())?;
    check_len("rnn_step state", p.hidden_dim(), h_prev.len())?;
    let off = offsets.map_or(0.0, |o| o.candidate);
    let mut a = vec![off; p.hidden_dim()];
    p.w.mul_vec_add(x, &mut a);
    p.u.mul_vec_add(h_prev, &mut a);
    let h: Vec<f64> = a.iter().map(|&v| p.activation.apply(v)).collect();
    let trace = RnnTrace {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        h: h.clone(),
    };
    Ok((h, trace))
}

/// Accumulates parameter gradients into `grad`; returns `(dx, dh_prev)`.
pub fn rnn_step_backward(
    p: &RnnCellParams,
    trace: &RnnTrace,
    dh: &[f64],
    grad: &mut RnnCellParams,
) -> (Vec<f64>, Vec<f64>) {
    let da: Vec<f64> = dh
        .iter()
        .zip(&trace.h)
        .map(|(&g, &h)| g * p.activation.derivative_from_output(h))
        .collect();
    grad.w.add_outer(&da, &trace.x);
    grad.u.add_outer(&da, &trace.h_prev);
    let mut dx = vec![0.0; p.input_dim()];
    p.w.mul_t_vec_add(&da, &mut dx);
    let mut dh_prev = vec![0.0; p.hidden_dim()];
    p.u.mul_t_vec_add(&da, &mut dh_prev);
    (dx, dh_prev)
}

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

/// LSTM weights. Peephole weights `w_c*` are diagonal and stored as vectors;
/// the forget gate is named `r` throughout.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    pub w_xi: Matrix,
    pub w_xr: Matrix,
    pub w_xc: Matrix,
    pub w_xo: Matrix,
    pub w_hi: Matrix,
    pub w_hr: Matrix,
    pub w_hc: Matrix,
    pub w_ho: Matrix,
    pub w_ci: Vec<f64>,
    pub w_cr: Vec<f64>,
    pub w_co: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LstmTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCellParams {
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        LstmCellParams {
            w_xi: glorot_uniform(hidden, input, rng),
            w_xr: glorot_uniform(hidden, input, rng),
            w_xc: glorot_uniform(hidden, input, rng),
            w_xo: glorot_uniform(hidden, input, rng),
            w_hi: glorot_uniform(hidden, hidden, rng),
            w_hr: glorot_uniform(hidden, hidden, rng),
            w_hc: glorot_uniform(hidden, hidden, rng),
            w_ho: glorot_uniform(hidden, hidden, rng),
            w_ci: vec![0.0; hidden],
            w_cr: vec![0.0; hidden],
            w_co: vec![0.0; hidden],
            b_i: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xi.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols()
    }
}

impl ParamTensors for LstmCellParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef::matrix("w_xi", &self.w_xi),
            TensorRef::matrix("w_xr", &self.w_xr),
            TensorRef::matrix("w_xc", &self.w_xc),
            TensorRef::matrix("w_xo", &self.w_xo),
            TensorRef::matrix("w_hi", &self.w_hi),
            TensorRef::matrix("w_hr", &self.w_hr),
            TensorRef::matrix("w_hc", &self.w_hc),
            TensorRef::matrix("w_ho", &self.w_ho),
            TensorRef::vector("w_ci", &self.w_ci),
            TensorRef::vector("w_cr", &self.w_cr),
            TensorRef::vector("w_co", &self.w_co),
            TensorRef::vector("b_i", &self.b_i),
            TensorRef::vector("b_r", &self.b_r),
            TensorRef::vector("b_c", &self.b_c),
            TensorRef::vector("b_o", &self.b_o),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_xi.as_mut_slice(),
            self.w_xr.as_mut_slice(),
            self.w_xc.as_mut_slice(),
            self.w_xo.as_mut_slice(),
            self.w_hi.as_mut_slice(),
            self.w_hr.as_mut_slice(),
            self.w_hc.as_mut_slice(),
            self.w_ho.as_mut_slice(),
            &mut self.w_ci,
            &mut self.w_cr,
            &mut self.w_co,
            &mut self.b_i,
            &mut self.b_r,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }
}

fn affine(
    wx: &Matrix,
    x: &[f64],
    wh: &Matrix,
    h: &[f64],
    peephole: Option<(&[f64], &[f64])>,
    bias: &[f64],
    offset: f64,
) -> Vec<f64> {
    let mut a: Vec<f64> = bias.iter().map(|b| b + offset).collect();
    wx.mul_vec_add(x, &mut a);
    wh.mul_vec_add(h, &mut a);
    if let Some((w, c)) = peephole {
        for ((a, w), c) in a.iter_mut().zip(w).zip(c) {
            *a += w * c;
        }
    }
    a
}

/// One LSTM step. Every gate's peephole reads the previous cell state,
/// including the output gate.
pub fn lstm_step(
    p: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    offsets: Option<&GateOffsets>,
) -> Result<(Vec<f64>, Vec<f64>, LstmTrace)> {
    check_len("lstm_step input", p.input_dim(), x.len())?;
    check_len("lstm_step state", p.hidden_dim(), h_prev.len())?;
    check_len("lstm_step cell", p.hidden_dim(), c_prev.len())?;
    let off = offsets.copied().unwrap_or_default();

    let mut i = affine(&p.w_xi, x, &p.w_hi, h_prev, Some((&p.w_ci, c_prev)), &p.b_i, off.input);
    let mut r = affine(&p.w_xr, x, &p.w_hr, h_prev, Some((&p.w_cr, c_prev)), &p.b_r, off.forget);
    let mut g = affine(&p.w_xc, x, &p.w_hc, h_prev, None, &p.b_c, off.candidate);
    let mut o = affine(&p.w_xo, x, &p.w_ho, h_prev, Some((&p.w_co, c_prev)), &p.b_o, off.output);
    i.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    r.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));
    g.iter_mut().for_each(|v| *v = tanh_scalar(*v));
    o.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

    let n = p.hidden_dim();
    let mut c = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for k in 0..n {
        c[k] = r[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = tanh_scalar(c[k]);
        h[k] = o[k] * tanh_c[k];
    }
    let trace = LstmTrace {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        r,
        g,
        o,
        c: c.clone(),
        tanh_c,
        h: h.clone(),
    };
    Ok((h, c, trace))
}

/// Accumulates parameter gradients; returns `(dx, dh_prev, dc_prev)`.
/// `dc_next` is the gradient arriving at `c_t` from step `t+1`.
pub fn lstm_step_backward(
    p: &LstmCellParams,
    t: &LstmTrace,
    dh: &[f64],
    dc_next: &[f64],
    grad: &mut LstmCellParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = p.hidden_dim();
    let mut dai = vec![0.0; n];
    let mut dar = vec![0.0; n];
    let mut dag = vec![0.0; n];
    let mut dao = vec![0.0; n];
    let mut dc_prev = vec![0.0; n];
    for k in 0..n {
        let d_o = dh[k] * t.tanh_c[k];
        dao[k] = d_o * t.o[k] * (1.0 - t.o[k]);
        let dc = dc_next[k] + dh[k] * t.o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]);
        dai[k] = dc * t.g[k] * t.i[k] * (1.0 - t.i[k]);
        dag[k] = dc * t.i[k] * (1.0 - t.g[k] * t.g[k]);
        dar[k] = dc * t.c_prev[k] * t.r[k] * (1.0 - t.r[k]);
        dc_prev[k] = dc * t.r[k] + p.w_ci[k] * dai[k] + p.w_cr[k] * dar[k] + p.w_co[k] * dao[k];

        grad.w_ci[k] += dai[k] * t.c_prev[k];
        grad.w_cr[k] += dar[k] * t.c_prev[k];
        grad.w_co[k] += dao[k] * t.c_prev[k];
        grad.b_i[k] += dai[k];
        grad.b_r[k] += dar[k];
        grad.b_c[k] += dag[k];
        grad.b_o[k] += dao[k];
    }
    grad.w_xi.add_outer(&dai, &t.x);
    grad.w_xr.add_outer(&dar, &t.x);
    grad.w_xc.add_outer(&dag, &t.x);
    grad.w_xo.add_outer(&dao, &t.x);
    grad.w_hi.add_outer(&dai, &t.h_prev);
    grad.w_hr.add_outer(&dar, &t.h_prev);
    grad.w_hc.add_outer(&dag, &t.h_prev);
    grad.w_ho.add_outer(&dao, &t.h_prev);

    let mut dx = vec![0.0; p.input_dim()];
    let mut dh_prev = vec![0.0; n];
    for (wx, wh, da) in [
        (&p.w_xi, &p.w_hi, &dai),
        (&p.w_xr, &p.w_hr, &dar),
        (&p.w_xc, &p.w_hc, &dag),
        (&p.w_xo, &p.w_ho, &dao),
    ] {
        wx.mul_t_vec_add(da, &mut dx);
        wh.mul_t_vec_add(da, &mut dh_prev);
    }
    (dx, dh_prev, dc_prev)
}

// ---------------------------------------------------------------------------
// GRU
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct GruCellParams {
    pub w_r: Matrix,
    pub w_z: Matrix,
    pub w: Matrix,
    pub u_r: Matrix,
    pub u_z: Matrix,
    pub u: Matrix,
}

#[derive(Clone, Debug)]
pub struct GruTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub reset_h: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruCellParams {
    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        GruCellParams {
            w_r: glorot_uniform(hidden, input, rng),
            w_z: glorot_uniform(hidden, input, rng),
            w: glorot_uniform(hidden, input, rng),
            u_r: glorot_uniform(hidden, hidden, rng),
            u_z: glorot_uniform(hidden, hidden, rng),
            u: glorot_uniform(hidden, hidden, rng),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }
}

impl ParamTensors for GruCellParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![
            TensorRef::matrix("w_r", &self.w_r),
            TensorRef::matrix("w_z", &self.w_z),
            TensorRef::matrix("w", &self.w),
            TensorRef::matrix("u_r", &self.u_r),
            TensorRef::matrix("u_z", &self.u_z),
            TensorRef::matrix("u", &self.u),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_r.as_mut_slice(),
            self.w_z.as_mut_slice(),
            self.w.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u.as_mut_slice(),
        ]
    }
}

/// `h_t = (1 − z_t) h_{t−1} + z_t h̃_t`
pub fn gru_step(
    p: &GruCellParams,
    x: &[f64],
    h_prev: &[f64],
    offsets: Option<&GateOffsets>,
) -> Result<(Vec<f64>, GruTrace)> {
    check_len("gru_step input", p.input_dim(), x.len())?;
    check_len("gru_step state", p.hidden_dim(), h_prev.len())?;
    let off = offsets.copied().unwrap_or_default();
    let n = p.hidden_dim();

    let mut r = vec![off.reset; n];
    p.w_r.mul_vec_add(x, &mut r);
    p.u_r.mul_vec_add(h_prev, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

    let mut z = vec![off.update; n];
    p.w_z.mul_vec_add(x, &mut z);
    p.u_z.mul_vec_add(h_prev, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid_scalar(*v));

    let reset_h: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let mut candidate = vec![off.candidate; n];
    p.w.mul_vec_add(x, &mut candidate);
    p.u.mul_vec_add(&reset_h, &mut candidate);
    candidate.iter_mut().for_each(|v| *v = tanh_scalar(*v));

    let h: Vec<f64> = (0..n)
        .map(|k| (1.0 - z[k]) * h_prev[k] + z[k] * candidate[k])
        .collect();
    let trace = GruTrace {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        r,
        z,
        reset_h,
        candidate,
        h: h.clone(),
    };
    Ok((h, trace))
}

/// Accumulates parameter gradients; returns `(dx, dh_prev)`.
pub fn gru_step_backward(
    p: &GruCellParams,
    t: &GruTrace,
    dh: &[f64],
    grad: &mut GruCellParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = p.hidden_dim();
    let mut daz = vec![0.0; n];
    let mut dac = vec![0.0; n];
    let mut dh_prev = vec![0.0; n];
    for k in 0..n {
        daz[k] = dh[k] * (t.candidate[k] - t.h_prev[k]) * t.z[k] * (1.0 - t.z[k]);
        dac[k] = dh[k] * t.z[k] * (1.0 - t.candidate[k] * t.candidate[k]);
        dh_prev[k] = dh[k] * (1.0 - t.z[k]);
    }
    let mut d_reset_h = vec![0.0; n];
    p.u.mul_t_vec_add(&dac, &mut d_reset_h);
    let mut dar = vec![0.0; n];
    for k in 0..n {
        dh_prev[k] += d_reset_h[k] * t.r[k];
        dar[k] = d_reset_h[k] * t.h_prev[k] * t.r[k] * (1.0 - t.r[k]);
    }

    grad.w.add_outer(&dac, &t.x);
    grad.u.add_outer(&dac, &t.reset_h);
    grad.w_r.add_outer(&dar, &t.x);
    grad.u_r.add_outer(&dar, &t.h_prev);
    grad.w_z.add_outer(&daz, &t.x);
    grad.u_z.add_outer(&daz, &t.h_prev);

    p.u_r.mul_t_vec_add(&dar, &mut dh_prev);
    p.u_z.mul_t_vec_add(&daz, &mut dh_prev);

    let mut dx = vec![0.0; p.input_dim()];
    p.w.mul_t_vec_add(&dac, &mut dx);
    p.w_r.mul_t_vec_add(&dar, &mut dx);
    p.w_z.mul_t_vec_add(&daz, &mut dx);
    (dx, dh_prev)
}

// ---------------------------------------------------------------------------
// Sequence-level dispatch
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum CellParams {
    Rnn(RnnCellParams),
    Lstm(LstmCellParams),
    Gru(GruCellParams),
}

#[derive(Clone, Debug)]
pub enum StepTrace {
    Rnn(RnnTrace),
    Lstm(LstmTrace),
    Gru(GruTrace),
}

impl StepTrace {
    pub fn hidden(&self) -> &[f64] {
        match self {
            StepTrace::Rnn(t) => &t.h,
            StepTrace::Lstm(t) => &t.h,
            StepTrace::Gru(t) => &t.h,
        }
    }
}

/// Gradients from a backward pass over one sequence.
#[derive(Clone, Debug)]
pub struct CellGradients {
    pub params: CellParams,
    /// Gradient with respect to each input `x_t`.
    pub inputs: Vec<Vec<f64>>,
    /// Gradient with respect to the initial hidden state.
    pub h0: Vec<f64>,
}

impl CellParams {
    pub fn init(kind: CellKind, input: usize, hidden: usize, activation: Activation, rng: &mut Rng) -> Self {
        match kind {
            CellKind::Rnn => CellParams::Rnn(RnnCellParams::init(input, hidden, activation, rng)),
            CellKind::Lstm => CellParams::Lstm(LstmCellParams::init(input, hidden, rng)),
            CellKind::Gru => CellParams::Gru(GruCellParams::init(input, hidden, rng)),
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellParams::Rnn(_) => CellKind::Rnn,
            CellParams::Lstm(_) => CellKind::Lstm,
            CellParams::Gru(_) => CellKind::Gru,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.hidden_dim(),
            CellParams::Lstm(p) => p.hidden_dim(),
            CellParams::Gru(p) => p.hidden_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            CellParams::Rnn(p) => p.input_dim(),
            CellParams::Lstm(p) => p.input_dim(),
            CellParams::Gru(p) => p.input_dim(),
        }
    }

    /// Runs the cell over `xs` from a zero initial state.
    pub fn forward(&self, xs: &[Vec<f64>], offsets: Option<&GateOffsets>) -> Result<Vec<StepTrace>> {
        let n = self.hidden_dim();
        let mut h = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut traces = Vec::with_capacity(xs.len());
        for x in xs {
            let trace = match self {
                CellParams::Rnn(p) => {
                    let (h_next, t) = rnn_step(p, x, &h, offsets)?;
                    h = h_next;
                    StepTrace::Rnn(t)
                }
                CellParams::Lstm(p) => {
                    let (h_next, c_next, t) = lstm_step(p, x, &h, &c, offsets)?;
                    h = h_next;
                    c = c_next;
                    StepTrace::Lstm(t)
                }
                CellParams::Gru(p) => {
                    let (h_next, t) = gru_step(p, x, &h, offsets)?;
                    h = h_next;
                    StepTrace::Gru(t)
                }
            };
            traces.push(trace);
        }
        Ok(traces)
    }

    /// Backpropagation through time. `upstream[t]` is the gradient of the
    /// objective with respect to `h_t` coming from outside the recurrence.
    pub fn backward(&self, traces: &[StepTrace], upstream: &[Vec<f64>]) -> Result<CellGradients> {
        if traces.len() != upstream.len() {
            return Err(Error::TraceMismatch(format!(
                "{} traces but {} upstream gradients",
                traces.len(),
                upstream.len()
            )));
        }
        let n = self.hidden_dim();
        let mut grad = self.zeros_like();
        let mut inputs = vec![Vec::new(); traces.len()];
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        for (t, (trace, up)) in traces.iter().zip(upstream).enumerate().rev() {
            check_len("cell_backward upstream", n, up.len())?;
            let mut dh = up.clone();
            add_into(&mut dh, &dh_next);
            let (dx, dh_prev) = match (self, trace, &mut grad) {
                (CellParams::Rnn(p), StepTrace::Rnn(tr), CellParams::Rnn(g)) => {
                    rnn_step_backward(p, tr, &dh, g)
                }
                (CellParams::Lstm(p), StepTrace::Lstm(tr), CellParams::Lstm(g)) => {
                    let (dx, dh_prev, dc_prev) = lstm_step_backward(p, tr, &dh, &dc_next, g);
                    dc_next = dc_prev;
                    (dx, dh_prev)
                }
                (CellParams::Gru(p), StepTrace::Gru(tr), CellParams::Gru(g)) => {
                    gru_step_backward(p, tr, &dh, g)
                }
                _ => {
                    return Err(Error::TraceMismatch(format!(
                        "trace at step {t} does not belong to a {} cell",
                        self.kind().name()
                    )))
                }
            };
            inputs[t] = dx;
            dh_next = dh_prev;
        }
        Ok(CellGradients {
            params: grad,
            inputs,
            h0: dh_next,
        })
    }
}

impl ParamTensors for CellParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        match self {
            CellParams::Rnn(p) => p.tensors(),
            CellParams::Lstm(p) => p.tensors(),
            CellParams::Gru(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            CellParams::Rnn(p) => p.tensors_mut(),
            CellParams::Lstm(p) => p.tensors_mut(),
            CellParams::Gru(p) => p.tensors_mut(),
        }
    }
}
