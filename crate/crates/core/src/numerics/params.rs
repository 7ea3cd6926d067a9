use super::Matrix;

/// Borrowed view of one named parameter tensor.
#[derive(Debug, Clone)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub fn matrix(name: impl Into<String>, m: &'a Matrix) -> Self {
        TensorRef {
            name: name.into(),
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice(),
        }
    }

    pub fn vector(name: impl Into<String>, v: &'a [f64]) -> Self {
        TensorRef {
            name: name.into(),
            shape: vec![v.len()],
            data: v,
        }
    }

    pub fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}{}", self.name);
        self
    }
}

/// A fixed, ordered collection of named parameter tensors.
///
/// `tensors` and `tensors_mut` must enumerate the same tensors in the same
/// order; optimizers, gradient checks and checkpoints all rely on it.
pub trait ParamTensors: Clone {
    fn tensors(&self) -> Vec<TensorRef<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn add_assign(&mut self, other: &Self) {
        let src: Vec<&[f64]> = other.tensors().into_iter().map(|t| t.data).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.tensors().into_iter().map(|t| t.name).collect()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Copies values from `flat` tensors (same order and sizes).
    fn load_tensors(&mut self, values: &[Vec<f64>]) {
        for (dst, src) in self.tensors_mut().into_iter().zip(values) {
            dst.copy_from_slice(src);
        }
    }
}

/// A single free vector, named `theta`.
impl ParamTensors for Vec<f64> {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        vec![TensorRef::vector("theta", self)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}
