//! Dense complex arrays with shape metadata.
//!
//! `ComplexArray` is the universal numeric carrier of the crate: filter
//! coefficients, input spectra, optimizer hidden states, and gradients are
//! all stored in it. Arrays are one- or two-dimensional; a scalar is a
//! one-element vector. Every arithmetic kernel lives here so that the tape
//! executor and the plain value paths run bit-identical code.

use num_complex::Complex64;

/// Dense array of `Complex64` values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexArray {
    data: Vec<Complex64>,
    shape: Vec<usize>,
}

impl ComplexArray {
    /// Build from raw data and shape. Panics if the element count does not
    /// match the shape product.
    pub fn new(data: Vec<Complex64>, shape: Vec<usize>) -> Self {
        let count: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            count,
            "shape {:?} expects {} elements, got {}",
            shape,
            count,
            data.len()
        );
        Self { data, shape }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let count: usize = shape.iter().product();
        Self {
            data: vec![Complex64::new(0.0, 0.0); count],
            shape,
        }
    }

    pub fn ones(shape: Vec<usize>) -> Self {
        let count: usize = shape.iter().product();
        Self {
            data: vec![Complex64::new(1.0, 0.0); count],
            shape,
        }
    }

    /// Scalar (one-element) array.
    pub fn scalar(value: Complex64) -> Self {
        Self {
            data: vec![value],
            shape: vec![1],
        }
    }

    pub fn real_scalar(value: f64) -> Self {
        Self::scalar(Complex64::new(value, 0.0))
    }

    /// 1-D array from real samples (imaginary parts zero).
    pub fn from_real(samples: &[f64]) -> Self {
        Self {
            data: samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            shape: vec![samples.len()],
        }
    }

    pub fn from_complex(values: &[Complex64]) -> Self {
        Self {
            data: values.to_vec(),
            shape: vec![values.len()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Number of rows when interpreted as a matrix (1 for vectors).
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    /// Length of the trailing axis.
    pub fn row_len(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        let w = self.row_len();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn scalar_value(&self) -> Complex64 {
        assert!(self.is_scalar(), "expected scalar, got shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Self {
        Self::new(self.data.clone(), shape)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Squared Euclidean norm over real and imaginary parts.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            data: self.data.iter().map(|&z| f(z)).collect(),
            shape: self.shape.clone(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(
            self.shape, other.shape,
            "shape mismatch: {:?} vs {:?}",
            self.shape, other.shape
        );
        Self {
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn div(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a / b)
    }

    pub fn neg(&self) -> Self {
        self.map(|z| -z)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }

    pub fn add_scalar(&self, c: Complex64) -> Self {
        self.map(|z| z + c)
    }

    pub fn exp(&self) -> Self {
        self.map(|z| z.exp())
    }

    pub fn ln(&self) -> Self {
        self.map(|z| z.ln())
    }

    pub fn sqrt(&self) -> Self {
        self.map(|z| z.sqrt())
    }

    /// |z|² per element, stored with zero imaginary part.
    pub fn abs_sqr(&self) -> Self {
        self.map(|z| Complex64::new(z.norm_sqr(), 0.0))
    }

    /// |z| per element, stored with zero imaginary part.
    pub fn abs(&self) -> Self {
        self.map(|z| Complex64::new(z.norm(), 0.0))
    }

    pub fn re(&self) -> Self {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    pub fn im(&self) -> Self {
        self.map(|z| Complex64::new(z.im, 0.0))
    }

    /// ReLU applied independently to real and imaginary parts.
    pub fn split_relu(&self) -> Self {
        self.map(|z| Complex64::new(z.re.max(0.0), z.im.max(0.0)))
    }

    /// Logistic sigmoid applied independently to real and imaginary parts.
    pub fn split_sigmoid(&self) -> Self {
        self.map(|z| Complex64::new(sigmoid(z.re), sigmoid(z.im)))
    }

    /// tanh applied independently to real and imaginary parts.
    pub fn split_tanh(&self) -> Self {
        self.map(|z| Complex64::new(z.re.tanh(), z.im.tanh()))
    }

    /// Clamp the real part to `[lo, hi]`; the imaginary part passes through
    /// unchanged.
    pub fn clamp_re(&self, lo: f64, hi: f64) -> Self {
        self.map(|z| Complex64::new(z.re.clamp(lo, hi), z.im))
    }

    /// Sum of all elements as a scalar array.
    pub fn sum(&self) -> Self {
        let s = self.data.iter().fold(Complex64::new(0.0, 0.0), |acc, &z| acc + z);
        Self::scalar(s)
    }

    /// Column-wise sum over the leading axis: [M, N] -> [N], [N] -> [N].
    pub fn sum_axis0(&self) -> Self {
        let w = self.row_len();
        let mut out = vec![Complex64::new(0.0, 0.0); w];
        for r in 0..self.rows() {
            let row = self.row(r);
            for (o, &v) in out.iter_mut().zip(row.iter()) {
                *o += v;
            }
        }
        Self::new(out, vec![w])
    }

    pub fn broadcast_scalar(&self, shape: Vec<usize>) -> Self {
        let v = self.scalar_value();
        let count: usize = shape.iter().product();
        Self::new(vec![v; count], shape)
    }

    /// Tile a vector [N] into [m, N] identical rows.
    pub fn repeat_rows(&self, m: usize) -> Self {
        assert_eq!(self.shape.len(), 1, "repeat_rows expects a vector");
        let mut data = Vec::with_capacity(self.data.len() * m);
        for _ in 0..m {
            data.extend_from_slice(&self.data);
        }
        Self::new(data, vec![m, self.data.len()])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.shape.len(), 2, "matmul lhs must be 2-D");
        assert_eq!(other.shape.len(), 2, "matmul rhs must be 2-D");
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        assert_eq!(k, k2, "matmul inner dims: {} vs {}", k, k2);
        let mut out = vec![Complex64::new(0.0, 0.0); m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                let rhs = &other.data[p * n..(p + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(rhs.iter()) {
                    *d += a * b;
                }
            }
        }
        Self::new(out, vec![m, n])
    }

    pub fn transpose(&self) -> Self {
        assert_eq!(self.shape.len(), 2, "transpose expects a matrix");
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![Complex64::new(0.0, 0.0); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Self::new(out, vec![n, m])
    }

    /// Add a vector [N] to every row of [M, N].
    pub fn add_row(&self, row: &Self) -> Self {
        assert_eq!(row.shape.len(), 1, "add_row rhs must be a vector");
        assert_eq!(self.row_len(), row.len(), "add_row width mismatch");
        let w = self.row_len();
        let mut out = self.data.clone();
        for r in 0..self.rows() {
            for j in 0..w {
                out[r * w + j] += row.data[j];
            }
        }
        Self::new(out, self.shape.clone())
    }

    /// Concatenate along the leading axis. Vectors concatenate end to end;
    /// matrices must share their row length.
    pub fn concat0(&self, other: &Self) -> Self {
        if self.shape.len() == 1 && other.shape.len() == 1 {
            let mut data = self.data.clone();
            data.extend_from_slice(&other.data);
            let n = data.len();
            return Self::new(data, vec![n]);
        }
        let w = self.row_len();
        assert_eq!(w, other.row_len(), "concat0 row width mismatch");
        let rows = self.rows() + other.rows();
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(data, vec![rows, w])
    }

    /// Slice `count` rows (or elements, for vectors) starting at `start`.
    pub fn slice0(&self, start: usize, count: usize) -> Self {
        if self.shape.len() == 1 {
            assert!(start + count <= self.len(), "slice0 out of range");
            return Self::new(self.data[start..start + count].to_vec(), vec![count]);
        }
        let w = self.row_len();
        assert!(start + count <= self.rows(), "slice0 out of range");
        Self::new(
            self.data[start * w..(start + count) * w].to_vec(),
            vec![count, w],
        )
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
