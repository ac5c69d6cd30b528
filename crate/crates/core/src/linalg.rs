//! Dense complex matrices sized for desk-scale quantum states.
//!
//! Storage is row-major. Composite indices follow the `S ⊗ A ⊗ E` ordering
//! used throughout the crate: for factor dimensions `d_0, d_1, ...` the flat
//! index is `i_0 * (d_1 * d_2 * ...) + i_1 * (d_2 * ...) + ...`.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default tolerance for Hermiticity checks and eigen-reconstruction.
pub const EIG_TOL: f64 = 1e-10;

/// Sweep budget for the cyclic Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixText", try_from = "MatrixText")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Builds a square matrix from nested real rows; handy in tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        Self::from_fn(n, m, |i, j| C64::new(rows[i][j], 0.0))
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn projector(u: &[C64]) -> Self {
        Self::outer(u, u)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |A_ij - B_ij|`; panics on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |H - H^†|`, or infinity for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(H + H^†) / 2`
    pub fn hermitian_part(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// `max |A^†A - I|`
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.rows))
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `⟨u|A|v⟩`
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        self.mul_vec(v)
            .iter()
            .zip(u)
            .map(|(av, uu)| uu.conj() * av)
            .sum()
    }

    /// `A B A^†`
    pub fn conjugate_by(&self, a: &Self) -> Self {
        &(a * self) * &a.adjoint()
    }

    /// Real part of `Tr(A B)` without forming the product.
    pub fn trace_product_re(&self, other: &Self) -> f64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = 0.0;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += (self[(i, k)] * other[(k, i)]).re;
            }
        }
        acc
    }

    fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * p];
        for i in 0..n {
            let out_row = &mut out[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self {
            rows: n,
            cols: p,
            data: out,
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Wire form of a matrix: flat `[re, im]` pairs in row-major order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixText {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<ComplexMatrix> for MatrixText {
    fn from(m: ComplexMatrix) -> Self {
        Self {
            rows: m.rows,
            cols: m.cols,
            entries: m.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<MatrixText> for ComplexMatrix {
    type Error = Error;
    fn try_from(t: MatrixText) -> Result<Self> {
        let data = t.entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        ComplexMatrix::new(t.rows, t.cols, data)
    }
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascend; column `k`
/// of `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `V f(Λ) V^†`
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
        let mut fvals = Vec::with_capacity(self.dim());
        for &l in &self.values {
            let v = f(l);
            if !v.is_finite() {
                return Err(Error::Domain(l));
            }
            fvals.push(v);
        }
        Ok(self.with_values(&fvals))
    }

    /// `V diag(f(0), f(1), …) V^†`, with `f` given the eigenvalue index.
    pub fn apply_indexed(&self, f: impl Fn(usize) -> f64) -> ComplexMatrix {
        let fvals: Vec<f64> = (0..self.dim()).map(f).collect();
        self.with_values(&fvals)
    }

    fn with_values(&self, fvals: &[f64]) -> ComplexMatrix {
        let n = self.dim();
        let v = &self.vectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for (k, fk) in fvals.iter().enumerate() {
                    if *fk != 0.0 {
                        acc += v[(i, k)] * v[(j, k)].conj() * *fk;
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|x| x).expect("identity is finite on finite spectra")
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation first removes the phase of the pivot `h_pq` and then applies
/// the classical real Jacobi rotation, so the accumulated transform stays
/// unitary to machine precision.
pub fn hermitian_eig(h: &ComplexMatrix, eig_tol: f64) -> Result<Spectrum> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenproblem needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let defect = h.hermitian_defect();
    if !(defect <= eig_tol) {
        return Err(Error::NotHermitian { defect });
    }
    let n = h.rows();
    let mut a = h.hermitian_part();
    for i in 0..n {
        a[(i, i)].im = 0.0;
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 || n == 1 {
        return Ok(sorted_spectrum(&a, v));
    }
    let threshold = f64::EPSILON * scale;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE || r < 1e-3 * threshold {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / r;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = phase.conj() * (-s);
                let g_qq = phase.conj() * c;
                rotate_columns(&mut a, p, q, g_pp, g_pq, g_qp, g_qq);
                rotate_rows(&mut a, p, q, g_pp, g_pq, g_qp, g_qq);
                rotate_columns(&mut v, p, q, g_pp, g_pq, g_qp, g_qq);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(app - t * r, 0.0);
                a[(q, q)] = C64::new(aqq + t * r, 0.0);
            }
        }
    }
    if !converged {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() > eig_tol * scale.max(1.0) {
            return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
        }
    }
    Ok(sorted_spectrum(&a, v))
}

#[inline]
fn rotate_columns(m: &mut ComplexMatrix, p: usize, q: usize, gpp: C64, gpq: C64, gqp: C64, gqq: C64) {
    let n = m.rows;
    let cols = m.cols;
    for k in 0..n {
        let mp = m.data[k * cols + p];
        let mq = m.data[k * cols + q];
        m.data[k * cols + p] = mp * gpp + mq * gqp;
        m.data[k * cols + q] = mp * gpq + mq * gqq;
    }
}

#[inline]
fn rotate_rows(m: &mut ComplexMatrix, p: usize, q: usize, gpp: C64, gpq: C64, gqp: C64, gqq: C64) {
    let cols = m.cols;
    let (gpp, gpq, gqp, gqq) = (gpp.conj(), gpq.conj(), gqp.conj(), gqq.conj());
    for k in 0..cols {
        let mp = m.data[p * cols + k];
        let mq = m.data[q * cols + k];
        m.data[p * cols + k] = gpp * mp + gqp * mq;
        m.data[q * cols + k] = gpq * mp + gqq * mq;
    }
}

fn sorted_spectrum(a: &ComplexMatrix, v: ComplexMatrix) -> Spectrum {
    let n = a.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Spectrum { values, vectors }
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn spectral_apply(h: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    hermitian_eig(h, EIG_TOL)?.apply(f)
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca, rb, cb) = (a.rows, a.cols, b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(ra * rb, ca * cb);
    let oc = ca * cb;
    for i in 0..ra {
        for j in 0..ca {
            let s = a.data[i * ca + j];
            if s == ZERO {
                continue;
            }
            for k in 0..rb {
                let row = (i * rb + k) * oc + j * cb;
                for l in 0..cb {
                    out.data[row + l] = s * b.data[k * cb + l];
                }
            }
        }
    }
    out
}

/// Kronecker product of state vectors.
pub fn tensor_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

fn check_dims(dim: usize, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!("bad factor dims {dims:?}")));
    }
    let prod: usize = dims.iter().product();
    if prod != dim {
        return Err(Error::DimensionMismatch(format!(
            "factor dims {dims:?} multiply to {prod}, matrix is {dim}x{dim}"
        )));
    }
    Ok(())
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        s[f] = s[f + 1] * dims[f + 1];
    }
    s
}

/// Flat offsets contributed by every joint value of the listed factors.
fn offsets(dims: &[usize], strides: &[usize], factors: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &f in factors {
        let mut next = Vec::with_capacity(out.len() * dims[f]);
        for &base in &out {
            for d in 0..dims[f] {
                next.push(base + d * strides[f]);
            }
        }
        out = next;
    }
    out
}

/// Traces out every factor not listed in `keep`. Kept factors stay in
/// ascending order regardless of the order given.
pub fn partial_trace(rho: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch("partial trace of a non-square matrix".into()));
    }
    check_dims(rho.rows(), dims)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!(
            "keep set {keep:?} invalid for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !kept.contains(f)).collect();
    let st = strides(dims);
    let ko = offsets(dims, &st, &kept);
    let to = offsets(dims, &st, &traced);
    let dk = ko.len();
    let n = rho.rows();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (a1, &o1) in ko.iter().enumerate() {
        for (a2, &o2) in ko.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &to {
                acc += rho.data[(o1 + t) * n + o2 + t];
            }
            out[(a1, a2)] = acc;
        }
    }
    Ok(out)
}

/// Reduced density matrix of a pure vector, `Tr_rest |ψ⟩⟨ψ|`, without forming
/// the full projector.
pub fn reduce_pure(psi: &[C64], dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_dims(psi.len(), dims)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.iter().any(|&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!(
            "keep set {keep:?} invalid for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|f| !kept.contains(f)).collect();
    let st = strides(dims);
    let ko = offsets(dims, &st, &kept);
    let to = offsets(dims, &st, &traced);
    let dk = ko.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for (a1, &o1) in ko.iter().enumerate() {
        for a2 in a1..dk {
            let o2 = ko[a2];
            let acc: C64 = to.iter().map(|&t| psi[o1 + t] * psi[o2 + t].conj()).sum();
            out[(a1, a2)] = acc;
            out[(a2, a1)] = acc.conj();
        }
    }
    Ok(out)
}

/// Partial transpose on the listed factors.
pub fn partial_transpose(rho: &ComplexMatrix, dims: &[usize], factors: &[usize]) -> Result<ComplexMatrix> {
    if !rho.is_square() {
        return Err(Error::DimensionMismatch("partial transpose of a non-square matrix".into()));
    }
    check_dims(rho.rows(), dims)?;
    if factors.iter().any(|&f| f >= dims.len()) {
        return Err(Error::DimensionMismatch(format!("factor set {factors:?} out of range")));
    }
    let st = strides(dims);
    let n = rho.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (mut ii, mut jj) = (i, j);
            for &f in factors {
                let di = (i / st[f]) % dims[f];
                let dj = (j / st[f]) % dims[f];
                ii = ii - di * st[f] + dj * st[f];
                jj = jj - dj * st[f] + di * st[f];
            }
            out[(ii, jj)] = rho[(i, j)];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, m, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        random_matrix(n, n, rng).hermitian_part()
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    #[test]
    fn eig_diagonal_sorted() {
        let s = hermitian_eig(&ComplexMatrix::from_real_diagonal(&[0.75, 0.25]), EIG_TOL).unwrap();
        assert_eq!(s.values, vec![0.25, 0.75]);
    }

    #[test]
    fn eig_pauli_x() {
        let s = hermitian_eig(&pauli_x(), EIG_TOL).unwrap();
        assert!((s.values[0] + 1.0).abs() < 1e-14);
        assert!((s.values[1] - 1.0).abs() < 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // |⟨−|v_0⟩| = 1 and |⟨+|v_1⟩| = 1
        let minus = [C64::new(r, 0.0), C64::new(-r, 0.0)];
        let plus = [C64::new(r, 0.0), C64::new(r, 0.0)];
        let ov0: C64 = s.vector(0).iter().zip(&minus).map(|(a, b)| a.conj() * b).sum();
        let ov1: C64 = s.vector(1).iter().zip(&plus).map(|(a, b)| a.conj() * b).sum();
        assert!((ov0.norm() - 1.0).abs() < 1e-14);
        assert!((ov1.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [1, 2, 3, 8, 17, 40] {
            let h = random_hermitian(n, &mut rng);
            let s = hermitian_eig(&h, EIG_TOL).unwrap();
            assert!(s.reconstruct().max_abs_diff(&h) <= 1e-10, "n={n}");
            assert!(s.vectors.unitarity_defect() <= 1e-10, "n={n}");
            assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
            let tr = h.trace().re;
            let sum: f64 = s.values.iter().sum();
            assert!((tr - sum).abs() <= 1e-10 * n as f64);
        }
    }

    #[test]
    fn eig_degenerate_and_zero() {
        let s = hermitian_eig(&ComplexMatrix::zeros(3, 3), EIG_TOL).unwrap();
        assert_eq!(s.values, vec![0.0; 3]);
        let s = hermitian_eig(&ComplexMatrix::identity(4).scale_real(0.25), EIG_TOL).unwrap();
        assert!(s.values.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(hermitian_eig(&m, EIG_TOL), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn tensor_examples() {
        assert_eq!(
            tensor(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)),
            ComplexMatrix::identity(4)
        );
        let t = tensor(&ComplexMatrix::from_real_diagonal(&[1.0, 0.0]), &pauli_x());
        let expected = ComplexMatrix::from_real_rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
        ]);
        assert_eq!(t, expected);
    }

    #[test]
    fn tensor_trace_multiplies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(3, 3, &mut rng);
        let b = random_matrix(3, 3, &mut rng);
        let direct = a.trace() * b.trace();
        assert!((tensor(&a, &b).trace() - direct).norm() < 1e-13);
    }

    #[test]
    fn tensor_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(2, 3, &mut rng);
        let b = random_matrix(3, 2, &mut rng);
        let c = random_matrix(2, 2, &mut rng);
        let left = tensor(&tensor(&a, &b), &c);
        let right = tensor(&a, &tensor(&b, &c));
        assert!(left.max_abs_diff(&right) <= 1e-15);
    }

    #[test]
    fn partial_trace_bell() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell = [C64::new(r, 0.0), ZERO, ZERO, C64::new(r, 0.0)];
        let rho = ComplexMatrix::projector(&bell);
        let red = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!(red.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);
        let red_pure = reduce_pure(&bell, &[2, 2], &[1]).unwrap();
        assert!(red_pure.max_abs_diff(&red) < 1e-15);
    }

    #[test]
    fn partial_trace_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(3, &mut rng);
        let mut b = random_hermitian(2, &mut rng);
        let trb = b.trace();
        b = b.scale(trb.inv());
        let red = partial_trace(&tensor(&a, &b), &[3, 2], &[0]).unwrap();
        assert!(red.max_abs_diff(&a) < 1e-14);
    }

    #[test]
    fn partial_trace_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_hermitian(12, &mut rng);
        let dims = [2, 3, 2];
        let direct = partial_trace(&rho, &dims, &[1]).unwrap();
        let via0 = partial_trace(&partial_trace(&rho, &dims, &[1, 2]).unwrap(), &[3, 2], &[0]).unwrap();
        let via2 = partial_trace(&partial_trace(&rho, &dims, &[0, 1]).unwrap(), &[2, 3], &[1]).unwrap();
        assert!(direct.max_abs_diff(&via0) <= 1e-12);
        assert!(direct.max_abs_diff(&via2) <= 1e-12);
        assert!((direct.trace() - rho.trace()).norm() < 1e-12);
        assert!(direct.hermitian_defect() < 1e-14);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = ComplexMatrix::identity(4);
        assert!(partial_trace(&rho, &[2, 3], &[0]).is_err());
        assert!(partial_trace(&rho, &[2, 2], &[]).is_err());
        assert!(partial_trace(&rho, &[2, 2], &[2]).is_err());
    }

    #[test]
    fn partial_transpose_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_hermitian(6, &mut rng);
        let pt = partial_transpose(&rho, &[2, 3], &[1]).unwrap();
        let back = partial_transpose(&pt, &[2, 3], &[1]).unwrap();
        assert_eq!(back, rho);
        let full = partial_transpose(&rho, &[2, 3], &[0, 1]).unwrap();
        assert!(full.max_abs_diff(&rho.transpose()) == 0.0);
    }

    #[test]
    fn spectral_apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_hermitian(5, &mut rng);
        assert!(spectral_apply(&h, |x| x).unwrap().max_abs_diff(&h) <= 1e-12);
        let sq = spectral_apply(&ComplexMatrix::from_real_diagonal(&[2.0, 3.0]), |x| x * x).unwrap();
        assert!(sq.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[4.0, 9.0])) < 1e-14);
        let lg = spectral_apply(&ComplexMatrix::from_real_diagonal(&[0.5, 0.5]), f64::log2).unwrap();
        assert!(lg.max_abs_diff(&ComplexMatrix::from_real_diagonal(&[-1.0, -1.0])) < 1e-14);
        let bad = spectral_apply(&ComplexMatrix::from_real_diagonal(&[0.0, 1.0]), f64::log2);
        assert!(matches!(bad, Err(Error::Domain(_))));
    }

    #[test]
    fn matrix_text_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_matrix(2, 3, &mut rng);
        let s = serde_json::to_string(&m).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ComplexMatrix>(r#"{"rows":2,"cols":2,"entries":[[1,0]]}"#).is_err());
    }
}
