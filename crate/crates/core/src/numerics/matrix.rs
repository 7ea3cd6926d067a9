use std::fmt;

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics when the length does not
    /// match `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "Matrix::from_vec: {} values for a {}x{} matrix",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "Matrix::from_rows: ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn check_in(&self, len: usize, op: &str) {
        assert_eq!(
            self.cols, len,
            "{op}: matrix is {}x{} but vector has length {len}",
            self.rows, self.cols
        );
    }

    fn check_out(&self, len: usize, op: &str) {
        assert_eq!(
            self.rows, len,
            "{op}: matrix is {}x{} but output has length {len}",
            self.rows, self.cols
        );
    }

    /// `out += self · x`
    pub fn mul_vec_add(&self, x: &[f64], out: &mut [f64]) {
        self.check_in(x.len(), "mul_vec_add");
        self.check_out(out.len(), "mul_vec_add");
        for (i, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(i), x);
        }
    }

    /// `out += selfᵀ · v`
    pub fn mul_t_vec_add(&self, v: &[f64], out: &mut [f64]) {
        self.check_out(v.len(), "mul_t_vec_add");
        self.check_in(out.len(), "mul_t_vec_add");
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o += w * vi;
            }
        }
    }

    /// `out += self · x` for a sparse `x` given as `(index, value)` pairs.
    pub fn mul_sparse_add(&self, x: &[(usize, f64)], out: &mut [f64]) {
        self.check_out(out.len(), "mul_sparse_add");
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            let mut acc = 0.0;
            for &(j, v) in x {
                acc += row[j] * v;
            }
            *o += acc;
        }
    }

    /// `self += u · vᵀ`
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        self.check_out(u.len(), "add_outer");
        self.check_in(v.len(), "add_outer");
        let cols = self.cols;
        for (i, &ui) in u.iter().enumerate() {
            if ui == 0.0 {
                continue;
            }
            for (m, &vj) in self.data[i * cols..(i + 1) * cols].iter_mut().zip(v) {
                *m += ui * vj;
            }
        }
    }

    /// `self += u · vᵀ` for a sparse `v`.
    pub fn add_outer_sparse(&mut self, u: &[f64], v: &[(usize, f64)]) {
        self.check_out(u.len(), "add_outer_sparse");
        let cols = self.cols;
        for (i, &ui) in u.iter().enumerate() {
            let row = &mut self.data[i * cols..(i + 1) * cols];
            for &(j, vj) in v {
                row[j] += ui * vj;
            }
        }
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Standard matrix-vector product. Panics with both shapes on a dimension
/// mismatch.
pub fn gemv(w: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.rows()];
    w.mul_vec_add(x, &mut out);
    out
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nonzero entries of a dense vector as `(index, value)` pairs.
pub fn sparse_nonzeros(x: &[f64]) -> Vec<(usize, f64)> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i, *v))
        .collect()
}
