//! Dense row-major matrices and small 3-vector helpers.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// 3x3 matrix-vector product, `m` given row-major.
#[inline]
pub fn mat3_mul(m: &[[f64; 3]; 3], v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks(0) panics, so empty-width matrices yield empty rows explicitly
        let cols = self.cols;
        (0..self.rows).map(move |i| &self.data[i * cols..(i + 1) * cols])
    }

    /// Stack matrices with equal column count vertically.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.cols != cols {
                return Err(Error::Shape(format!(
                    "cannot stack {} columns onto {cols}",
                    m.cols
                )));
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        matmul_into(&self.data, self.rows, self.cols, &other.data, other.cols, &mut out.data);
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "t_matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm(self.cols, self.rows, other.cols, &self.data, true, &other.data, false, 0.0, &mut out.data);
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "matmul_t {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        gemm(self.rows, self.cols, other.rows, &self.data, false, &other.data, true, 0.0, &mut out.data);
        Ok(out)
    }

    /// Add `bias` to every row.
    pub fn add_row(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols, "bias width");
        for r in 0..self.rows {
            for (x, b) in self.row_mut(r).iter_mut().zip(bias) {
                *x += *b;
            }
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// Column sums.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, x) in out.iter_mut().zip(self.row(r)) {
                *o += *x;
            }
        }
        out
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for x in &mut self.data {
            *x = f(*x);
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `c = beta·c + op(a) · op(b)` with `op(a)` of shape m×k and `op(b)` k×n.
///
/// The slices hold row-major storage of the untransposed operands: `a` is
/// m×k, or k×m when `a_t`; `b` is k×n, or n×k when `b_t`. `c` is m×n.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too short");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_t { (1, k) } else { (n, 1) };
    // with a transposed `a` the kernel rereads `b` once per row tile, so keep
    // it to short inner dimensions
    if n % NR == 0 && (!a_t || k <= 1024) {
        let ran = if b_t {
            let mut bt = vec![0.0; k * n];
            for (j, row) in b.chunks_exact(k).take(n).enumerate() {
                for (p, &v) in row.iter().enumerate() {
                    bt[p * n + j] = v;
                }
            }
            tiled::run(m, k, n, a, rsa, csa, &bt, beta, c)
        } else {
            tiled::run(m, k, n, a, rsa, csa, b, beta, c)
        };
        if ran {
            return;
        }
    }
    // SAFETY: the asserted lengths cover every element addressed by these
    // strides, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const MR: usize = 6;
const NR: usize = 32;

/// Register-tiled kernel for `n` a multiple of 32 with contiguous `b`,
/// compiled for AVX-512 and used only when the CPU has it.
mod tiled {
    use super::{MR, NR};

    #[allow(clippy::too_many_arguments)]
    pub(super) fn run(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        rsa: usize,
        csa: usize,
        b: &[f64],
        beta: f64,
        c: &mut [f64],
    ) -> bool {
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx512f") {
                // SAFETY: the feature was detected at runtime.
                unsafe { run_avx512(m, k, n, a, rsa, csa, b, beta, c) };
                return true;
            }
        }
        let _ = (m, k, n, a, rsa, csa, b, beta, c);
        false
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f,fma")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn run_avx512(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        rsa: usize,
        csa: usize,
        b: &[f64],
        beta: f64,
        c: &mut [f64],
    ) {
        use std::arch::x86_64::*;
        let ap = a.as_ptr();
        let bp = b.as_ptr();
        for j0 in (0..n).step_by(NR) {
            let full = m - m % MR;
            let mut i0 = 0;
            while i0 < full {
                let mut acc = [[_mm512_setzero_pd(); 4]; MR];
                for p in 0..k {
                    let brow = bp.add(p * n + j0);
                    let bv = [
                        _mm512_loadu_pd(brow),
                        _mm512_loadu_pd(brow.add(8)),
                        _mm512_loadu_pd(brow.add(16)),
                        _mm512_loadu_pd(brow.add(24)),
                    ];
                    for r in 0..MR {
                        let av = _mm512_set1_pd(*ap.add((i0 + r) * rsa + p * csa));
                        for q in 0..4 {
                            acc[r][q] = _mm512_fmadd_pd(av, bv[q], acc[r][q]);
                        }
                    }
                }
                let beta_v = _mm512_set1_pd(beta);
                for r in 0..MR {
                    let cp = c.as_mut_ptr().add((i0 + r) * n + j0);
                    for q in 0..4 {
                        let out = if beta == 0.0 {
                            acc[r][q]
                        } else {
                            _mm512_fmadd_pd(beta_v, _mm512_loadu_pd(cp.add(8 * q)), acc[r][q])
                        };
                        _mm512_storeu_pd(cp.add(8 * q), out);
                    }
                }
                i0 += MR;
            }
            for i in full..m {
                let mut acc = [0.0f64; NR];
                for p in 0..k {
                    let av = *ap.add(i * rsa + p * csa);
                    for j in 0..NR {
                        acc[j] += av * *bp.add(p * n + j0 + j);
                    }
                }
                let crow = &mut c[i * n + j0..i * n + j0 + NR];
                for j in 0..NR {
                    crow[j] = if beta == 0.0 { acc[j] } else { beta * crow[j] + acc[j] };
                }
            }
        }
    }
}

/// `out += a(m×k) · b(k×n)`, all row-major.
pub(crate) fn matmul_into(a: &[f64], m: usize, k: usize, b: &[f64], n: usize, out: &mut [f64]) {
    gemm(m, k, n, a, false, b, false, 1.0, out);
}

/// `a · wᵀ` with `w` stored row-major as `out_cols × a.cols()`.
pub(crate) fn matmul_bt(a: &Matrix, w: &[f64], out_cols: usize) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), out_cols);
    gemm(a.rows(), a.cols(), out_cols, a.as_slice(), false, w, true, 0.0, out.as_mut_slice());
    out
}
