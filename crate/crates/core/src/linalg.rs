//! Small dense complex and real linear algebra.
//!
//! Everything here works on matrices of a handful of rows (at most a few
//! dozen), so all storage is dense and row-major and all algorithms are the
//! textbook ones: Cholesky, cyclic Jacobi, Gram-Schmidt.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-vector threshold, per dimension.
pub const EPS_ZERO: f64 = 1e-12;
/// PSD tolerance relative to the trace.
pub const EPS_PSD: f64 = 1e-9;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Complex column vector.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CVec {
    entries: Vec<Complex64>,
}

impl CVec {
    pub fn new(entries: Vec<Complex64>) -> Self {
        assert!(!entries.is_empty(), "vectors must have positive dimension");
        Self { entries }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Hermitian inner product `selfᴴ · other`.
    pub fn dot(&self, other: &CVec) -> Complex64 {
        assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: Complex64) -> CVec {
        CVec::new(self.entries.iter().map(|z| z * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> CVec {
        CVec::new(self.entries.iter().map(|z| z * s).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.norm() <= EPS_ZERO * self.dim() as f64
    }

    pub fn normalized(&self) -> Result<CVec> {
        if self.is_zero() {
            return Err(Error::ZeroVector);
        }
        Ok(self.scale_real(1.0 / self.norm()))
    }

    /// Rotates the global phase so that the largest-magnitude entry is real
    /// and positive. Ties go to the lowest index.
    pub fn with_canonical_phase(&self) -> CVec {
        let mut best = 0;
        for (i, z) in self.entries.iter().enumerate() {
            if z.norm() > self.entries[best].norm() * (1.0 + 1e-12) {
                best = i;
            }
        }
        let pivot = self.entries[best];
        if pivot.norm() == 0.0 {
            return self.clone();
        }
        self.scale(pivot.conj() / pivot.norm())
    }

    /// Rank-one Hermitian matrix `self · selfᴴ`.
    pub fn outer(&self) -> CMat {
        let n = self.dim();
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = self.entries[i] * self.entries[j].conj();
            }
        }
        m.hermitian = true;
        m
    }
}

impl Index<usize> for CVec {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.entries[i]
    }
}

impl fmt::Debug for CVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.iter()).finish()
    }
}

/// Square complex matrix. `hermitian` is set only by constructors that build
/// an exactly Hermitian matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CMat {
    n: usize,
    data: Vec<Complex64>,
    hermitian: bool,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
            hermitian: true,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a general matrix from rows. The Hermitian flag is set only if
    /// the data is exactly Hermitian.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        let mut m = Self {
            n,
            data,
            hermitian: false,
        };
        m.hermitian = m.is_exactly_hermitian();
        m
    }

    /// Hermitian part `(A + Aᴴ)/2`, flagged Hermitian.
    pub fn hermitian_part(&self) -> CMat {
        let n = self.n;
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        for i in 0..n {
            m.data[i * n + i].im = 0.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    fn is_exactly_hermitian(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self[(i, j)] == self[(j, i)].conj()))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// `Tr(self · other)`.
    pub fn trace_product(&self, other: &CMat) -> Complex64 {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        assert_eq!(self.n, v.dim());
        let n = self.n;
        CVec::new(
            (0..n)
                .map(|i| (0..n).map(|k| self[(i, k)] * v[k]).sum())
                .collect(),
        )
    }

    /// `vᴴ · self · v`.
    pub fn quadratic_form(&self, v: &CVec) -> Complex64 {
        v.dot(&self.mul_vec(v))
    }

    pub fn scale_real(&self, s: f64) -> CMat {
        CMat {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
            hermitian: self.hermitian,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Complex Cholesky factor `L` with `A = L Lᴴ`. Fails with `NotPsd` on a
    /// nonpositive pivot.
    pub fn cholesky(&self) -> Result<CMat> {
        let n = self.n;
        let mut l = CMat::zeros(n);
        l.hermitian = false;
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if d.is_nan() || d <= 0.0 {
                return Err(Error::NotPsd);
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in
    /// descending order with orthonormal eigenvectors.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, Vec<CVec>) {
        let n = self.n;
        let emb = real_embedding(self);
        let (vals, vecs) = emb.symmetric_eigen();
        let mut order: Vec<usize> = (0..2 * n).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

        // Each eigenvalue of A shows up twice in the embedding, with real
        // eigenvectors [u; v] and [-v; u] that both map to the complex
        // eigenvector u + iv (up to a phase). Gram-Schmidt keeps one per pair.
        let mut out_vals = Vec::with_capacity(n);
        let mut out_vecs: Vec<CVec> = Vec::with_capacity(n);
        for &k in &order {
            if out_vecs.len() == n {
                break;
            }
            let col = vecs.column(k);
            let mut x = CVec::new((0..n).map(|i| Complex64::new(col[i], col[n + i])).collect());
            for q in &out_vecs {
                let c = q.dot(&x);
                x = CVec::new(
                    x.entries
                        .iter()
                        .zip(q.entries())
                        .map(|(a, b)| a - b * c)
                        .collect(),
                );
            }
            let norm = x.norm();
            if norm > 0.5 {
                out_vecs.push(x.scale_real(1.0 / norm));
                out_vals.push(vals[k]);
            }
        }
        (out_vals, out_vecs)
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        self.hermitian = false;
        &mut self.data[i * self.n + j]
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs[(k, j)];
                }
            }
        }
        out.hermitian = false;
        out
    }
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[Complex64]> = self.data.chunks(self.n.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Orthogonal projector onto the complement of `h`: `I − h(hᴴh)⁻¹hᴴ`.
pub fn orth_projector(h: &CVec) -> Result<CMat> {
    if h.is_zero() {
        return Err(Error::ZeroVector);
    }
    let n = h.dim();
    let inv = 1.0 / h.norm_sqr();
    let mut p = CMat::identity(n);
    for i in 0..n {
        for j in 0..n {
            p.data[i * n + j] -= h[i] * h[j].conj() * inv;
        }
    }
    for i in 0..n {
        p.data[i * n + i].im = 0.0;
    }
    p.hermitian = true;
    Ok(p)
}

/// `log₂ det(A)` for Hermitian positive semidefinite `A`, via Cholesky.
///
/// Returns `-∞` when a pivot vanishes within `EPS_PSD · Tr(A)`, and
/// `NotPsd` when a pivot is more negative than that.
pub fn logdet2_psd(a: &CMat) -> Result<f64> {
    let n = a.dim();
    let tol = EPS_PSD * a.trace().re.abs().max(f64::MIN_POSITIVE);
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    let mut acc = 0.0;
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if d.is_nan() || d < -tol {
            return Err(Error::NotPsd);
        }
        if d <= tol {
            return Ok(f64::NEG_INFINITY);
        }
        let djj = d.sqrt();
        acc += d.log2();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(acc)
}

/// Real symmetric representation `[[Re A, −Im A], [Im A, Re A]]` of a
/// Hermitian matrix.
pub fn real_embedding(a: &CMat) -> RMat {
    let n = a.dim();
    let mut out = RMat::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(n + i, n + j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`real_embedding`]. Any real symmetric `X` of size `2n` is
/// first projected onto the embedded structure (averaging the two copies),
/// which maps PSD matrices to PSD matrices.
pub fn from_real_embedding(x: &RMat) -> CMat {
    assert!(x.dim().is_multiple_of(2));
    let n = x.dim() / 2;
    let mut rows = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(n + i, n + j)]);
            let im = 0.5 * (x[(n + i, j)] - x[(i, n + j)]);
            rows[i][j] = Complex64::new(re, im);
        }
    }
    CMat::from_rows(&rows).hermitian_part()
}

/// Square real matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct RMat {
    n: usize,
    data: Vec<f64>,
}

impl RMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.n + j]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// Frobenius inner product `Tr(selfᵀ · other)`.
    pub fn inner(&self, other: &RMat) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn transpose(&self) -> RMat {
        let n = self.n;
        let mut t = RMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.data[j * n + i] = self.data[i * n + j];
            }
        }
        t
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> RMat {
        let n = self.n;
        let mut s = RMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s.data[i * n + j] = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
            }
        }
        s
    }

    pub fn scale(&self, s: f64) -> RMat {
        RMat {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: f64, other: &RMat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Lower-triangular `L` with `A = L Lᵀ`; `None` on a nonpositive pivot.
    pub fn cholesky(&self) -> Option<RMat> {
        let n = self.n;
        let mut l = RMat::zeros(n);
        for j in 0..n {
            let mut d = self.data[j * n + j];
            for k in 0..j {
                d -= l.data[j * n + k] * l.data[j * n + k];
            }
            if d.is_nan() || d <= 0.0 {
                return None;
            }
            let djj = d.sqrt();
            l.data[j * n + j] = djj;
            for i in j + 1..n {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l.data[i * n + k] * l.data[j * n + k];
                }
                l.data[i * n + j] = s / djj;
            }
        }
        Some(l)
    }

    /// Solves `L Lᵀ x = b` given the Cholesky factor `L` in `self`.
    pub fn cholesky_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.data[i * n + k] * y[k];
            }
            y[i] /= self.data[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.data[k * n + i] * y[k];
            }
            y[i] /= self.data[i * n + i];
        }
        y
    }

    /// Inverse of `L` (lower triangular) held in `self`.
    pub fn lower_inverse(&self) -> RMat {
        let n = self.n;
        let mut inv = RMat::zeros(n);
        for j in 0..n {
            inv.data[j * n + j] = 1.0 / self.data[j * n + j];
            for i in j + 1..n {
                let mut s = 0.0;
                for k in j..i {
                    s -= self.data[i * n + k] * inv.data[k * n + j];
                }
                inv.data[i * n + j] = s / self.data[i * n + i];
            }
        }
        inv
    }

    /// Inverse of a symmetric positive definite matrix.
    pub fn spd_inverse(&self) -> Option<RMat> {
        let l = self.cholesky()?;
        let li = l.lower_inverse();
        Some(&li.transpose() * &li)
    }

    /// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
    /// eigenvalues (unordered) and the eigenvectors as columns.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, RMat) {
        let n = self.n;
        let mut a = self.symmetrized();
        let mut v = RMat::identity(n);
        let scale = a.frobenius_norm();
        if scale == 0.0 {
            return (vec![0.0; n], v);
        }
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a.data[p * n + q] * a.data[p * n + q];
                }
            }
            if off.sqrt() <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.data[p * n + q];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a.data[p * n + p];
                    let aqq = a.data[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.data[k * n + p];
                        let akq = a.data[k * n + q];
                        a.data[k * n + p] = c * akp - s * akq;
                        a.data[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a.data[p * n + k];
                        let aqk = a.data[q * n + k];
                        a.data[p * n + k] = c * apk - s * aqk;
                        a.data[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v.data[k * n + p];
                        let vkq = v.data[k * n + q];
                        v.data[k * n + p] = c * vkp - s * vkq;
                        v.data[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        ((0..n).map(|i| a.data[i * n + i]).collect(), v)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = self.symmetric_eigen();
        vals.into_iter().fold(f64::INFINITY, f64::min)
    }
}

impl Index<(usize, usize)> for RMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for RMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl Mul for &RMat {
    type Output = RMat;
    fn mul(self, rhs: &RMat) -> RMat {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = RMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &RMat {
    type Output = RMat;
    fn add(self, rhs: &RMat) -> RMat {
        RMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &RMat {
    type Output = RMat;
    fn sub(self, rhs: &RMat) -> RMat {
        RMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl fmt::Debug for RMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.n.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}
