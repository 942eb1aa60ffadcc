use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Row-major dense matrix of f64.
#[derive(Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list()
                .entries(self.data.chunks(self.cols.max(1)))
                .finish()?;
        }
        Ok(())
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

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Rejects wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Length {
                op: "Matrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Matrix::from_vec input".into(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Length {
                    op: "Matrix::from_rows",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn row_vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Matrix::from_vec(1, n, data)
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dim("hcat", self.shape(), other.shape()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Matrix {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }

    /// Standard product `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul", self.shape(), other.shape()));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_nn(self, other, &mut out);
        out.checked("matmul")
    }

    /// `selfᵀ · other`.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::dim("matmul_tn", self.shape(), other.shape()));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm_tn_acc(self, other, &mut out);
        out.checked("matmul_tn")
    }

    /// `self · otherᵀ`.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dim("matmul_nt", self.shape(), other.shape()));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm_nn(self, &other.transpose(), &mut out);
        out.checked("matmul_nt")
    }

    fn checked(self, op: &str) -> Result<Matrix> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite {
                what: alloc::format!("{op} result"),
            })
        }
    }
}

// Register tile: MR output rows by NR output columns held in accumulators.
const MR: usize = 4;
const NR: usize = 8;
// Inner-dimension block so the active panel of `b` stays in L2.
const KC: usize = 128;

/// Multiplies a strided view of `a` with rows of `b` into `c`.
///
/// Output element `(i, j)` of the tile is `c[i,j] (+)= Σ_k a(i,k)·b[k,j]`,
/// summed in ascending `k` starting from zero (or from the existing `c`
/// value when `accumulate` is set). `a(i, k)` lives at
/// `a[a_off + i·a_rs + k·a_ks]`. Every kernel below keeps this order, so
/// tiled and untiled paths agree bit for bit.
struct Gemm<'a> {
    a: &'a [f64],
    a_rs: usize,
    a_ks: usize,
    b: &'a [f64],
    ldb: usize,
    kdim: usize,
}

#[derive(Clone, Copy)]
struct KRange {
    start: usize,
    end: usize,
}

impl Gemm<'_> {
    #[inline(always)]
    fn tile(&self, i: usize, j: usize, ks: KRange, c: &mut [f64], ldc: usize, accumulate: bool) {
        let mut acc = [[0.0f64; NR]; MR];
        if accumulate {
            for (r, row) in acc.iter_mut().enumerate() {
                row.copy_from_slice(&c[(i + r) * ldc + j..(i + r) * ldc + j + NR]);
            }
        }
        for k in ks.start..ks.end {
            let brow: &[f64; NR] = self.b[k * self.ldb + j..k * self.ldb + j + NR]
                .try_into()
                .expect("tile width");
            for (r, row) in acc.iter_mut().enumerate() {
                let av = self.a[(i + r) * self.a_rs + k * self.a_ks];
                for (acc_v, &bv) in row.iter_mut().zip(brow) {
                    *acc_v += av * bv;
                }
            }
        }
        for (r, row) in acc.iter().enumerate() {
            c[(i + r) * ldc + j..(i + r) * ldc + j + NR].copy_from_slice(row);
        }
    }

    #[inline(always)]
    fn scalar(&self, i: usize, j: usize, ks: KRange, c: &mut [f64], ldc: usize, accumulate: bool) {
        let mut s = if accumulate { c[i * ldc + j] } else { 0.0 };
        for k in ks.start..ks.end {
            s += self.a[i * self.a_rs + k * self.a_ks] * self.b[k * self.ldb + j];
        }
        c[i * ldc + j] = s;
    }

    fn run(&self, m: usize, n: usize, c: &mut [f64], accumulate: bool) {
        let ldc = n;
        let m_full = m - m % MR;
        let n_full = n - n % NR;
        if self.kdim == 0 && !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        for start in (0..self.kdim).step_by(KC) {
            let ks = KRange {
                start,
                end: (start + KC).min(self.kdim),
            };
            // Later blocks continue the running sum already stored in `c`.
            let acc = accumulate || start > 0;
            for i in (0..m_full).step_by(MR) {
                for j in (0..n_full).step_by(NR) {
                    self.tile(i, j, ks, c, ldc, acc);
                }
                for ii in i..i + MR {
                    for j in n_full..n {
                        self.scalar(ii, j, ks, c, ldc, acc);
                    }
                }
            }
            for i in m_full..m {
                for j in 0..n {
                    self.scalar(i, j, ks, c, ldc, acc);
                }
            }
        }
    }
}

/// `out = a · b`. Shapes are the caller's responsibility.
pub(crate) fn gemm_nn(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!(out.shape(), (a.rows, b.cols));
    Gemm {
        a: &a.data,
        a_rs: a.cols,
        a_ks: 1,
        b: &b.data,
        ldb: b.cols,
        kdim: a.cols,
    }
    .run(a.rows, b.cols, &mut out.data, false);
}

/// `out += aᵀ · b`.
pub(crate) fn gemm_tn_acc(a: &Matrix, b: &Matrix, out: &mut Matrix) {
    debug_assert_eq!(a.rows, b.rows);
    debug_assert_eq!(out.shape(), (a.cols, b.cols));
    Gemm {
        a: &a.data,
        a_rs: 1,
        a_ks: a.cols,
        b: &b.data,
        ldb: b.cols,
        kdim: a.rows,
    }
    .run(a.cols, b.cols, &mut out.data, true);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::RngStream;

    fn random(rng: &mut RngStream, r: usize, c: usize) -> Matrix {
        let data = (0..r * c).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Matrix::from_vec(r, c, data).unwrap()
    }

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn identity_is_neutral() {
        let m = Matrix::from_rows(&[[1.0, -2.0, 3.5], [0.0, 4.0, 1.0], [7.0, 8.0, -9.0]]).unwrap();
        assert_eq!(Matrix::identity(3).matmul(&m).unwrap(), m);
    }

    #[test]
    fn two_by_two_times_column() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[5.0], [6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (2, 1));
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        let err = a.matmul(&b).unwrap_err();
        assert_eq!(err, Error::dim("matmul", (2, 3), (2, 2)));
        let msg = alloc::format!("{err}");
        assert!(msg.contains("2x3") && msg.contains("2x2"), "{msg}");
    }

    #[test]
    fn blocked_kernels_match_naive_bitwise() {
        let mut rng = RngStream::new(3);
        let a = random(&mut rng, 7, 5);
        let b = random(&mut rng, 5, 6);
        assert_eq!(a.matmul(&b).unwrap(), naive(&a, &b));
        let at = a.transpose();
        assert_eq!(at.matmul_tn(&b).unwrap(), naive(&a, &b));
        let bt = b.transpose();
        assert_eq!(a.matmul_nt(&bt).unwrap(), naive(&a, &b));
    }

    #[test]
    fn associativity_on_random_10x10() {
        let mut rng = RngStream::new(11);
        for _ in 0..20 {
            let a = random(&mut rng, 10, 10);
            let b = random(&mut rng, 10, 10);
            let c = random(&mut rng, 10, 10);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (l, r) in left.as_slice().iter().zip(right.as_slice()) {
                assert!((l - r).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn from_vec_rejects_nan_and_bad_length() {
        assert!(Matrix::from_vec(1, 2, alloc::vec![1.0]).is_err());
        assert!(Matrix::from_vec(1, 1, alloc::vec![f64::NAN]).is_err());
    }

    #[test]
    fn hcat_and_columns_round_trip() {
        let mut rng = RngStream::new(5);
        let a = random(&mut rng, 3, 2);
        let b = random(&mut rng, 3, 4);
        let ab = a.hcat(&b).unwrap();
        assert_eq!(ab.columns(0, 2), a);
        assert_eq!(ab.columns(2, 6), b);
    }
}
