//! Dense complex linear algebra: state vectors, matrices, and a cyclic
//! Jacobi eigensolver for Hermitian matrices.
//!
//! Everything here is small-dimension (at most [`MAX_DIM`]) and allocation
//! happy; the goal is accuracy and clarity at desk scale, not throughput.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the squared norm of anything treated as a physical state.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance on pairwise inner products of an orthonormal set.
pub const ORTHO_TOL: f64 = 1e-9;
/// Modulus below which a component is treated as zero when fixing global phase.
pub const CANON_TOL: f64 = 1e-12;
/// Maximum entry-wise deviation from `m = m†` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Maximum entry-wise error of `Σ a_i v_i v_i†` against the decomposed input.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Largest supported Hilbert-space dimension.
pub const MAX_DIM: usize = 64;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Complex amplitude vector.
///
/// A `StateVector` is any finite, non-empty amplitude vector. Values that
/// represent a physical state come out of [`normalize`]: unit norm, with the
/// first significant amplitude real and positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(components: &[f64]) -> Result<Self> {
        Self::new(components.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// The `index`-th standard basis vector of a `dim`-dimensional space.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            amplitudes: self.amplitudes.iter().map(|z| z * factor).collect(),
        }
    }

    /// True when the squared norm is within [`NORM_TOL`] of one.
    pub fn is_unit(&self) -> bool {
        (squared_norm(self) - 1.0).abs() <= NORM_TOL
    }

    /// Same vector with its global phase fixed: the first component with
    /// modulus above [`CANON_TOL`] becomes real and positive. The norm is
    /// left untouched.
    pub fn canonical(&self) -> Self {
        let mut amplitudes = self.amplitudes.clone();
        if let Some(k) = amplitudes.iter().position(|z| z.norm() > CANON_TOL) {
            let modulus = amplitudes[k].norm();
            let unphase = amplitudes[k].conj() / modulus;
            for z in amplitudes.iter_mut() {
                *z *= unphase;
            }
            amplitudes[k] = Complex64::new(modulus, 0.0);
        }
        Self { amplitudes }
    }

    /// Largest entry-wise modulus of `self - other`; infinite on dimension mismatch.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Complex64>> for StateVector {
    type Error = Error;

    fn try_from(amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::new(amplitudes)
    }
}

impl From<StateVector> for Vec<Complex64> {
    fn from(v: StateVector) -> Self {
        v.amplitudes
    }
}

impl Index<usize> for StateVector {
    type Output = Complex64;

    fn index(&self, k: usize) -> &Complex64 {
        &self.amplitudes[k]
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, z) in self.amplitudes.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6}{:+.6}i", z.re, z.im)?;
        }
        write!(f, ")")
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

/// `Σ a_k* b_k`: conjugate-linear in `a`, linear in `b`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    check_dims(a.dim(), b.dim())?;
    Ok(inner_unchecked(&a.amplitudes, &b.amplitudes))
}

pub(crate) fn inner_unchecked(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn squared_norm(a: &StateVector) -> f64 {
    a.amplitudes.iter().map(Complex64::norm_sqr).sum()
}

/// Unit-norm, phase-canonical representative of the direction of `a`.
pub fn normalize(a: &StateVector) -> Result<StateVector> {
    let norm_sq = squared_norm(a);
    if norm_sq <= CANON_TOL * CANON_TOL {
        return Err(Error::ZeroVector);
    }
    let norm = norm_sq.sqrt();
    let scaled = StateVector {
        amplitudes: a.amplitudes.iter().map(|z| z / norm).collect(),
    };
    Ok(scaled.canonical())
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Complex64>>", into = "Vec<Vec<Complex64>>")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        check_dims(rows * cols, entries.len())?;
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for k in 0..dim {
            m[(k, k)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::Dimension {
                expected: n_cols,
                found: bad.len(),
            });
        }
        Self::new(n_rows, n_cols, rows.into_iter().flatten().collect())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (k, &v) in values.iter().enumerate() {
            m[(k, k)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[StateVector]) -> Result<Self> {
        let rows = columns.first().map_or(0, StateVector::dim);
        let mut m = Self::zeros(rows.max(1), columns.len().max(1));
        if columns.is_empty() || rows == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        for (j, col) in columns.iter().enumerate() {
            check_dims(rows, col.dim())?;
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }

    /// `Σ_i weights[i] · v_i v_i†`.
    pub fn weighted_projector_sum(weights: &[f64], vectors: &[StateVector]) -> Result<Self> {
        check_dims(weights.len(), vectors.len())?;
        let dim = vectors.first().map_or(0, StateVector::dim);
        if dim == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        let mut m = Self::zeros(dim, dim);
        for (&w, v) in weights.iter().zip(vectors) {
            check_dims(dim, v.dim())?;
            for r in 0..dim {
                let vr = v[r] * w;
                for c in 0..dim {
                    m[(r, c)] += vr * v[c].conj();
                }
            }
        }
        Ok(m)
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

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn column(&self, j: usize) -> StateVector {
        StateVector {
            amplitudes: (0..self.rows).map(|i| self[(i, j)]).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        check_dims(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        check_dims(self.cols, v.dim())?;
        let amplitudes = (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self[(r, c)] * v[c]).sum())
            .collect();
        Ok(StateVector { amplitudes })
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|m_ij - conj(m_ji)|`; infinite for non-square matrices.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<Vec<Complex64>>> for ComplexMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<ComplexMatrix> for Vec<Vec<Complex64>> {
    fn from(m: ComplexMatrix) -> Self {
        m.entries.chunks(m.cols).map(<[Complex64]>::to_vec).collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.entries[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.entries[r * self.cols + c]
    }
}

/// True iff `max |(m†m - I)_ij| <= tol`.
pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let gram = m.adjoint().matmul(m)?;
    Ok(gram.max_abs_diff(&ComplexMatrix::identity(m.rows)) <= tol)
}

/// Spectrum of a Hermitian matrix: eigenvalues ascending, eigenvectors
/// orthonormal and phase-canonical, `eigenvectors[i]` paired with `eigenvalues[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ a_i v_i v_i†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        ComplexMatrix::weighted_projector_sum(&self.eigenvalues, &self.eigenvectors)
            .expect("decomposition is internally consistent")
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows;
    let mut sum = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                sum += a[(r, c)].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Each rotation first moves the phase of the pivot `a_pq` into column `q`,
/// then applies the real symmetric Jacobi rotation that annihilates it.
/// Sweeps continue until the off-diagonal Frobenius norm drops to
/// `1e-12 · ‖m‖_F`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    if n > MAX_DIM {
        return Err(Error::TooLarge(n));
    }
    let deviation = m.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian(deviation));
    }

    // Work on the exactly Hermitian part.
    let mut a = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            a[(r, c)] = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
        }
    }
    let mut v = ComplexMatrix::identity(n);

    let threshold = JACOBI_REL_TOL * m.frobenius_norm();
    let mut sweeps = 0;
    let mut off = off_diagonal_norm(&a);
    while off > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Convergence { sweeps, off_norm: off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    Ok(EigenDecomposition {
        eigenvalues: order.iter().map(|&i| a[(i, i)].re).collect(),
        eigenvectors: order.iter().map(|&i| v.column(i).canonical()).collect(),
    })
}

/// Applies `a <- U† a U`, `v <- v U` for the rotation that zeroes `a[p][q]`.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Phase that makes the pivot real: e^{-iφ} with a_pq = g e^{iφ}.
    let unphase = apq.conj() / g;

    let theta = (aqq - app) / (2.0 * g);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U restricted to (p, q):
    //   [ c            s          ]
    //   [ -s·unphase   c·unphase  ]
    let u_pp = Complex64::new(c, 0.0);
    let u_pq = Complex64::new(s, 0.0);
    let u_qp = unphase * -s;
    let u_qq = unphase * c;

    let n = a.rows;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * u_pp + akq * u_qp;
        a[(k, q)] = akp * u_pq + akq * u_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * u_pp + vkq * u_qp;
        v[(k, q)] = vkp * u_pq + vkq * u_qq;
    }
}
