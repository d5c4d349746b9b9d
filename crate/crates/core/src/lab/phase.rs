//! Phase retrieval: given the moduli of a state in basis A and in basis B,
//! find phases for the A components that reproduce the B moduli.
//!
//! The search fixes the first phase to zero (global phase) and runs a
//! damped Gauss–Newton (Levenberg–Marquardt) descent on the intensity
//! residuals `|y_k|² - b_k²` from several random starting points. The
//! reported residual is the modulus residual `Σ (|y_k| - b_k)²`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_unitary, ComplexMatrix};
use crate::random::{haar_state, RandomStream};

pub const MAX_PHASE_DIM: usize = 8;
/// A solution counts as converged when its modulus residual is at most this.
pub const PHASE_CONVERGENCE_TOL: f64 = 1e-9;
const INPUT_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 400;
const TARGET_RESIDUAL: f64 = 1e-26;
const DISTINCT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRetrievalProblem {
    n: usize,
    moduli_a: Vec<f64>,
    moduli_b: Vec<f64>,
    basis_change: ComplexMatrix,
}

#[derive(Deserialize)]
struct RawProblem {
    n: usize,
    moduli_a: Vec<f64>,
    moduli_b: Vec<f64>,
    basis_change: ComplexMatrix,
}

impl<'de> Deserialize<'de> for PhaseRetrievalProblem {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawProblem::deserialize(deserializer)?;
        if raw.n != raw.moduli_a.len() {
            return Err(serde::de::Error::custom(format!(
                "n = {} but moduli_a has {} entries",
                raw.n,
                raw.moduli_a.len()
            )));
        }
        PhaseRetrievalProblem::new(raw.moduli_a, raw.moduli_b, raw.basis_change).map_err(serde::de::Error::custom)
    }
}

fn check_moduli(name: &str, moduli: &[f64]) -> Result<()> {
    if moduli.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::Domain(format!("{name} must be finite and non-negative")));
    }
    let total: f64 = moduli.iter().map(|m| m * m).sum();
    if (total - 1.0).abs() > INPUT_TOL {
        return Err(Error::Domain(format!("{name} squares sum to {total}, not 1")));
    }
    Ok(())
}

impl PhaseRetrievalProblem {
    pub fn new(moduli_a: Vec<f64>, moduli_b: Vec<f64>, basis_change: ComplexMatrix) -> Result<Self> {
        let n = moduli_a.len();
        if n == 0 || n > MAX_PHASE_DIM {
            return Err(Error::Domain(format!(
                "phase retrieval supports 1 <= n <= {MAX_PHASE_DIM}, got {n}"
            )));
        }
        if moduli_b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: moduli_b.len(),
            });
        }
        if basis_change.rows() != n || basis_change.cols() != n {
            return Err(Error::Dimension {
                expected: n,
                found: basis_change.rows().max(basis_change.cols()),
            });
        }
        check_moduli("moduli_a", &moduli_a)?;
        check_moduli("moduli_b", &moduli_b)?;
        if !is_unitary(&basis_change, INPUT_TOL)? {
            return Err(Error::Domain("basis_change is not unitary".into()));
        }
        Ok(Self {
            n,
            moduli_a,
            moduli_b,
            basis_change,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn moduli_a(&self) -> &[f64] {
        &self.moduli_a
    }

    pub fn moduli_b(&self) -> &[f64] {
        &self.moduli_b
    }

    pub fn basis_change(&self) -> &ComplexMatrix {
        &self.basis_change
    }

    /// `basis_change · (moduli_a ⊙ e^{iφ})`.
    fn forward(&self, phases: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| self.basis_change[(k, j)] * Complex64::from_polar(self.moduli_a[j], phases[j]))
                    .sum()
            })
            .collect()
    }
}

/// Builds a feasible problem by pushing a random phased state through `basis_change`.
/// Returns the problem and the planted phases (first phase zero).
pub fn planted_problem(
    basis_change: ComplexMatrix,
    rng: &mut RandomStream,
) -> Result<(PhaseRetrievalProblem, Vec<f64>)> {
    let n = basis_change.rows();
    let state = haar_state(n, rng);
    let moduli_a: Vec<f64> = state.amplitudes().iter().map(|z| z.norm()).collect();
    let mut phases: Vec<f64> = state.amplitudes().iter().map(|z| z.arg()).collect();
    let reference = phases[0];
    for p in phases.iter_mut() {
        *p = wrap(*p - reference);
    }
    let image = basis_change.apply(&state)?;
    let mut moduli_b: Vec<f64> = image.amplitudes().iter().map(|z| z.norm()).collect();
    // Remove rounding drift so the validator's 1e-9 check cannot trip.
    let norm = moduli_b.iter().map(|m| m * m).sum::<f64>().sqrt();
    moduli_b.iter_mut().for_each(|m| *m /= norm);
    Ok((PhaseRetrievalProblem::new(moduli_a, moduli_b, basis_change)?, phases))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolution {
    pub n: usize,
    /// Best phases found, wrapped to `(-π, π]`, first entry zero.
    pub phases: Vec<f64>,
    /// `Σ (|y_k| - b_k)²` at `phases`.
    pub residual: f64,
    pub converged: bool,
    pub restarts: usize,
    /// Distinct converged phase vectors across all restarts (global phase fixed).
    pub distinct_solutions: Vec<Vec<f64>>,
}

fn wrap(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// `Σ (|y_k| - b_k)²` for the given phases (`phases.len() == n`).
pub fn phase_residual(problem: &PhaseRetrievalProblem, phases: &[f64]) -> f64 {
    problem
        .forward(phases)
        .iter()
        .zip(&problem.moduli_b)
        .map(|(y, b)| (y.norm() - b).powi(2))
        .sum()
}

fn intensity_cost(problem: &PhaseRetrievalProblem, phases: &[f64]) -> f64 {
    problem
        .forward(phases)
        .iter()
        .zip(&problem.moduli_b)
        .map(|(y, b)| (y.norm_sqr() - b * b).powi(2))
        .sum()
}

/// Residuals `r_k = |y_k|² - b_k²` and Jacobian `∂r_k/∂φ_j` for `j >= 1`.
fn residuals_and_jacobian(problem: &PhaseRetrievalProblem, phases: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = problem.n;
    let y = problem.forward(phases);
    let r = y
        .iter()
        .zip(&problem.moduli_b)
        .map(|(y, b)| y.norm_sqr() - b * b)
        .collect();
    let jac = (0..n)
        .map(|k| {
            (1..n)
                .map(|j| {
                    let w = problem.basis_change[(k, j)] * Complex64::from_polar(problem.moduli_a[j], phases[j]);
                    // d|y|²/dφ = 2 Re(conj(y) · i w) = -2 Im(conj(y) w)
                    -2.0 * (y[k].conj() * w).im
                })
                .collect()
        })
        .collect();
    (r, jac)
}

/// Solves the small dense system `a x = b` by Gaussian elimination with
/// partial pivoting. `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let (upper, lower) = a.split_at_mut(row);
            let pivot_row = &upper[col];
            let f = lower[0][col] / pivot_row[col];
            for (x, p) in lower[0][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = ((row + 1)..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Levenberg–Marquardt descent from `phases`; returns the refined phases.
fn descend(problem: &PhaseRetrievalProblem, mut phases: Vec<f64>) -> Vec<f64> {
    let free = problem.n - 1;
    if free == 0 {
        return phases;
    }
    let mut cost = intensity_cost(problem, &phases);
    let mut damping = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        if phase_residual(problem, &phases) <= TARGET_RESIDUAL {
            break;
        }
        let (r, jac) = residuals_and_jacobian(problem, &phases);
        let mut normal = vec![vec![0.0; free]; free];
        let mut gradient = vec![0.0; free];
        for (rk, row) in r.iter().zip(&jac) {
            for i in 0..free {
                gradient[i] += row[i] * rk;
                for j in 0..free {
                    normal[i][j] += row[i] * row[j];
                }
            }
        }
        if gradient.iter().all(|g| g.abs() < 1e-300) {
            break;
        }
        let mut improved = false;
        while damping < 1e12 {
            let mut system = normal.clone();
            for (i, row) in system.iter_mut().enumerate() {
                row[i] += damping * normal[i][i].max(1e-12);
            }
            let rhs: Vec<f64> = gradient.iter().map(|g| -g).collect();
            let Some(step) = solve(system, rhs) else {
                damping *= 4.0;
                continue;
            };
            let mut trial = phases.clone();
            for (p, s) in trial[1..].iter_mut().zip(&step) {
                *p += s;
            }
            let trial_cost = intensity_cost(problem, &trial);
            if trial_cost < cost {
                phases = trial;
                cost = trial_cost;
                damping = (damping / 3.0).max(1e-15);
                improved = true;
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
    phases
}

fn circular_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| wrap(x - y).abs()).fold(0.0, f64::max)
}

/// Multi-start search for phases reproducing `moduli_b`.
///
/// Every restart draws `φ_2..φ_n` uniformly from `[0, 2π)` (`φ_1 = 0`) and
/// descends. All restarts run; the best one is reported together with the
/// distinct converged solutions. `restarts` of zero is treated as one.
pub fn retrieve_phases(problem: &PhaseRetrievalProblem, restarts: usize, rng: &mut RandomStream) -> PhaseSolution {
    let restarts = restarts.max(1);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for _ in 0..restarts {
        let mut start = vec![0.0; problem.n];
        for p in start[1..].iter_mut() {
            *p = rng.angle();
        }
        let phases: Vec<f64> = descend(problem, start).into_iter().map(wrap).collect();
        let residual = phase_residual(problem, &phases);
        if residual <= PHASE_CONVERGENCE_TOL && distinct.iter().all(|d| circular_distance(d, &phases) > DISTINCT_TOL) {
            distinct.push(phases.clone());
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, phases));
        }
    }
    let (residual, phases) = best.expect("at least one restart");
    PhaseSolution {
        n: problem.n,
        phases,
        residual,
        converged: residual <= PHASE_CONVERGENCE_TOL,
        restarts,
        distinct_solutions: distinct,
    }
}
