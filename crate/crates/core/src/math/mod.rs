//! Dense row-major linear algebra and activations.
//!
//! Everything is `f64`. The batched kernels used by training (`*_nt`, `*_tn`,
//! `*_nn`) delegate to `matrixmultiply::dgemm`; the single-vector operations
//! are plain loops.

pub mod rng;

pub use rng::Rng;

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Dense vector of `f64`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Vector(vec![value; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Vector(v.to_vec())
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;
    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::from_vec(raw.rows, raw.cols, raw.data)
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("matrix data", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// Entries drawn uniformly from `[-scale, scale)`.
    pub fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.uniform(-scale, scale)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `self += bias` broadcast over rows.
    pub fn add_row_vector(&mut self, bias: &[f64]) {
        debug_assert_eq!(bias.len(), self.cols);
        for row in self.data.chunks_exact_mut(self.cols) {
            for (x, b) in row.iter_mut().zip(bias) {
                *x += b;
            }
        }
    }

    /// `acc[j] += sum_i self[i][j]`.
    pub fn sum_rows_into(&self, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.cols);
        for row in self.data.chunks_exact(self.cols) {
            for (a, x) in acc.iter_mut().zip(row) {
                *a += x;
            }
        }
    }

    /// Horizontal concatenation `[a, b]` of two matrices with equal row counts.
    pub fn hcat(a: &Matrix, b: &Matrix) -> Matrix {
        assert_eq!(a.rows, b.rows, "hcat row mismatch");
        let cols = a.cols + b.cols;
        let mut data = Vec::with_capacity(a.rows * cols);
        for r in 0..a.rows {
            data.extend_from_slice(a.row(r));
            data.extend_from_slice(b.row(r));
        }
        Matrix {
            rows: a.rows,
            cols,
            data,
        }
    }

    /// Splits columns at `at`, returning `(left, right)`.
    pub fn hsplit(&self, at: usize) -> (Matrix, Matrix) {
        assert!(at <= self.cols);
        let mut left = Matrix::zeros(self.rows, at);
        let mut right = Matrix::zeros(self.rows, self.cols - at);
        for r in 0..self.rows {
            let row = self.row(r);
            left.row_mut(r).copy_from_slice(&row[..at]);
            right.row_mut(r).copy_from_slice(&row[at..]);
        }
        (left, right)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise combination of two equally shaped matrices.
    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `x · wᵀ` for `x: [n × k]`, `w: [m × k]`, giving `[n × m]`.
    ///
    /// A single-row `x` takes the sequential dot-product path shared with
    /// [`affine`], so one-sequence steps agree bit-for-bit with it.
    pub fn matmul_nt(x: &Matrix, w: &Matrix) -> Matrix {
        assert_eq!(x.cols, w.cols, "matmul_nt inner dimension");
        let mut out = Matrix::zeros(x.rows, w.rows);
        if x.rows == 1 {
            for (o, r) in out.data.iter_mut().zip(0..w.rows) {
                *o = dot(w.row(r), &x.data);
            }
            return out;
        }
        gemm(
            1.0,
            Operand::plain(x),
            Operand::transposed(w),
            0.0,
            &mut out,
        );
        out
    }

    /// `acc += aᵀ · b` for `a: [n × m]`, `b: [n × k]`, `acc: [m × k]`.
    pub fn acc_tn(acc: &mut Matrix, a: &Matrix, b: &Matrix) {
        assert_eq!(a.rows, b.rows, "acc_tn inner dimension");
        assert_eq!(acc.shape(), (a.cols, b.cols), "acc_tn output shape");
        gemm(1.0, Operand::transposed(a), Operand::plain(b), 1.0, acc);
    }

    /// `acc += a · b` for `a: [n × m]`, `b: [m × k]`, `acc: [n × k]`.
    pub fn acc_nn(acc: &mut Matrix, a: &Matrix, b: &Matrix) {
        assert_eq!(a.cols, b.rows, "acc_nn inner dimension");
        assert_eq!(acc.shape(), (a.rows, b.cols), "acc_nn output shape");
        gemm(1.0, Operand::plain(a), Operand::plain(b), 1.0, acc);
    }
}

struct Operand<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> Operand<'a> {
    fn plain(m: &'a Matrix) -> Self {
        Operand {
            data: &m.data,
            rows: m.rows,
            cols: m.cols,
            row_stride: m.cols as isize,
            col_stride: 1,
        }
    }

    fn transposed(m: &'a Matrix) -> Self {
        Operand {
            data: &m.data,
            rows: m.cols,
            cols: m.rows,
            row_stride: 1,
            col_stride: m.cols as isize,
        }
    }
}

/// `c = alpha·a·b + beta·c`.
fn gemm(alpha: f64, a: Operand<'_>, b: Operand<'_>, beta: f64, c: &mut Matrix) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!((a.rows, b.cols), c.shape());
    if a.rows == 0 || b.cols == 0 {
        return;
    }
    if a.cols == 0 {
        c.data.iter_mut().for_each(|x| *x *= beta);
        return;
    }
    let c_cols = c.cols as isize;
    // SAFETY: every pointer/stride pair describes memory fully inside the
    // borrowed slices, and `c` does not alias `a` or `b` (it is `&mut`).
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            c.data.as_mut_ptr(),
            c_cols,
            1,
        );
    }
}

/// Sequential left-to-right dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `W · concat(inputs) + b`.
pub fn affine(w: &Matrix, inputs: &[&[f64]], b: &[f64]) -> Result<Vector> {
    let total: usize = inputs.iter().map(|x| x.len()).sum();
    check_dim("inputs (sum of lengths vs W.cols)", w.cols, total)?;
    check_dim("b", w.rows, b.len())?;
    let mut out = Vector::zeros(w.rows);
    for (r, o) in out.iter_mut().enumerate() {
        let row = w.row(r);
        let mut acc = 0.0;
        let mut off = 0;
        for x in inputs {
            for (wv, xv) in row[off..off + x.len()].iter().zip(x.iter()) {
                acc += wv * xv;
            }
            off += x.len();
        }
        *o = acc + b[r];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y = apply(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(kind: Activation, x: &[f64]) -> Vector {
    x.iter().map(|&v| kind.apply(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Mul,
    Add,
    Sub,
}

pub fn elementwise(op: Elementwise, a: &[f64], b: &[f64]) -> Result<Vector> {
    check_dim("b", a.len(), b.len())?;
    let f = match op {
        Elementwise::Mul => |x: f64, y: f64| x * y,
        Elementwise::Add => |x: f64, y: f64| x + y,
        Elementwise::Sub => |x: f64, y: f64| x - y,
    };
    Ok(a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
}

/// Numerically stable `ln(sum(exp(x)))`.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_affine(w: &Matrix, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.rows()];
        for i in 0..w.rows() {
            let mut s = 0.0;
            for j in 0..w.cols() {
                s += w.get(i, j) * x[j];
            }
            out[i] = s + b[i];
        }
        out
    }

    #[test]
    fn affine_identity() {
        let out = affine(&Matrix::identity(2), &[&[1.0, 2.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(&*out, &[1.0, 2.0]);
    }

    #[test]
    fn affine_concatenates_inputs_in_order() {
        let w = Matrix::from_rows(&[[1.0, 1.0, 1.0]]);
        let out = affine(&w, &[&[1.0], &[2.0, 3.0]], &[10.0]).unwrap();
        assert_eq!(&*out, &[16.0]);
    }

    #[test]
    fn affine_matches_naive_loop() {
        let mut rng = Rng::new(7);
        let w = Matrix::uniform(4, 6, 1.0, &mut rng);
        let x1: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let x2: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let got = affine(&w, &[&x1, &x2], &b).unwrap();
        let cat: Vec<f64> = x1.iter().chain(&x2).copied().collect();
        for (g, e) in got.iter().zip(naive_affine(&w, &cat, &b)) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_rejects_bad_dims() {
        let w = Matrix::zeros(2, 3);
        let err = affine(&w, &[&[1.0, 2.0]], &[0.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("inputs"));
        let err = affine(&w, &[&[1.0, 2.0, 3.0]], &[0.0]).unwrap_err();
        assert!(err.to_string().contains("`b`"));
    }

    #[test]
    fn activations_at_known_points() {
        assert_eq!(activation(Activation::Sigmoid, &[0.0])[0], 0.5);
        assert_eq!(activation(Activation::Tanh, &[0.0])[0], 0.0);
        assert_eq!(&*activation(Activation::Relu, &[-3.2, 1.5]), &[0.0, 1.5]);
    }

    #[test]
    fn elementwise_ops() {
        assert_eq!(
            &*elementwise(Elementwise::Mul, &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            &[3.0, 8.0]
        );
        assert_eq!(
            &*elementwise(Elementwise::Add, &[1.0, 2.0], &[0.0, 0.0]).unwrap(),
            &[1.0, 2.0]
        );
        assert!(elementwise(Elementwise::Sub, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn elementwise_mul_matches_scalar_loop() {
        let mut rng = Rng::new(3);
        let a: Vec<f64> = (0..50).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let got = elementwise(Elementwise::Mul, &a, &b).unwrap();
        for i in 0..50 {
            assert_eq!(got[i], a[i] * b[i]);
        }
    }

    #[test]
    fn gemm_helpers_match_naive() {
        let mut rng = Rng::new(11);
        let x = Matrix::uniform(5, 7, 1.0, &mut rng);
        let w = Matrix::uniform(3, 7, 1.0, &mut rng);
        let y = Matrix::matmul_nt(&x, &w);
        for i in 0..5 {
            let e = naive_affine(&w, x.row(i), &[0.0; 3]);
            for j in 0..3 {
                assert!((y.get(i, j) - e[j]).abs() < 1e-12);
            }
        }
        // acc_tn: yᵀ x, acc_nn: y w
        let mut g = Matrix::zeros(3, 7);
        Matrix::acc_tn(&mut g, &y, &x);
        let mut back = Matrix::zeros(5, 7);
        Matrix::acc_nn(&mut back, &y, &w);
        for a in 0..3 {
            for b in 0..7 {
                let e: f64 = (0..5).map(|n| y.get(n, a) * x.get(n, b)).sum();
                assert!((g.get(a, b) - e).abs() < 1e-12);
            }
        }
        for a in 0..5 {
            for b in 0..7 {
                let e: f64 = (0..3).map(|k| y.get(a, k) * w.get(k, b)).sum();
                assert!((back.get(a, b) - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hcat_hsplit_inverse() {
        let mut rng = Rng::new(1);
        let a = Matrix::uniform(3, 2, 1.0, &mut rng);
        let b = Matrix::uniform(3, 4, 1.0, &mut rng);
        let (l, r) = Matrix::hcat(&a, &b).hsplit(2);
        assert_eq!(l, a);
        assert_eq!(r, b);
    }

    #[test]
    fn matrix_json_rejects_bad_length() {
        let bad = r#"{"rows":2,"cols":2,"data":[1.0,2.0,3.0]}"#;
        assert!(serde_json::from_str::<Matrix>(bad).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use crate::math::Rng;

        fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-10.0f64..10.0, n)
        }

        proptest! {
            #[test]
            fn affine_is_linear(seed in any::<u64>(), x in vec_strategy(6), y in vec_strategy(6)) {
                let mut rng = Rng::new(seed);
                let w = Matrix::uniform(4, 6, 2.0, &mut rng);
                let zero = [0.0; 4];
                let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                let lhs = affine(&w, &[&sum], &zero).unwrap();
                let fx = affine(&w, &[&x], &zero).unwrap();
                let fy = affine(&w, &[&y], &zero).unwrap();
                for i in 0..4 {
                    prop_assert!((lhs[i] - (fx[i] + fy[i])).abs() < 1e-12);
                }
            }

            #[test]
            fn sigmoid_is_symmetric(x in -700.0f64..700.0) {
                let s = activation(Activation::Sigmoid, &[x, -x]);
                prop_assert!((s[0] + s[1] - 1.0).abs() <= 1e-15);
            }

            #[test]
            fn activation_ranges(x in -50.0f64..50.0) {
                let s = Activation::Sigmoid.apply(x);
                prop_assert!(s >= 0.0 && s <= 1.0);
                let t = Activation::Tanh.apply(x);
                prop_assert!((-1.0..=1.0).contains(&t));
                prop_assert!(Activation::Relu.apply(x) >= 0.0);
            }
        }
    }
}
