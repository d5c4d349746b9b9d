//! Self-checks over every module, grouped into named suites.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::{
    classical_mixture_scan, fourier_basis, mub_pair, planted_problem, real_equal_modulus_search, retrieve_phases,
    spin_state, spin_transition, table_for_mub_pair, unbiasedness_deviation, PhaseRetrievalProblem, MAX_SEARCH_DIM,
    PHASE_CONVERGENCE_TOL,
};
use crate::linalg::{hermitian_eigen, ComplexMatrix, StateVector, MAX_DIM};
use crate::measurement::{build_operator, expectation, predict, sample, Measurement};
use crate::random::{haar_basis, haar_state, haar_unitary, RandomStream};
use crate::simulator::{classical_fit_check, order_effect, replay, run, spin_zx, table1_pair, ExperimentScript, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    All,
    Born,
    Mub,
    RealSearch,
    Phase,
    Spin,
    Simulator,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["all", "born", "mub", "real-search", "phase", "spin", "simulator"];

    fn parts(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Born,
                Suite::Mub,
                Suite::RealSearch,
                Suite::Phase,
                Suite::Spin,
                Suite::Simulator,
            ],
            other => vec![other],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let index = [
            Suite::All,
            Suite::Born,
            Suite::Mub,
            Suite::RealSearch,
            Suite::Phase,
            Suite::Spin,
            Suite::Simulator,
        ]
        .iter()
        .position(|s| s == self)
        .expect("listed");
        f.write_str(Self::NAMES[index])
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "born" => Suite::Born,
            "mub" => Suite::Mub,
            "real-search" => Suite::RealSearch,
            "phase" => Suite::Phase,
            "spin" => Suite::Spin,
            "simulator" => Suite::Simulator,
            other => {
                return Err(Error::Domain(format!(
                    "unknown suite {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Present when the real-search suite ran.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feasibility: Option<Vec<FeasibilityRow>>,
}

/// A row of the real equal-modulus feasibility table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub n: usize,
    pub candidates: u64,
    pub orthogonal: u64,
    pub feasible: bool,
}

struct Recorder {
    suite: Suite,
    checks: Vec<Check>,
}

impl Recorder {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            suite: self.suite,
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Random measurement in `dim` dimensions with Gaussian outcome values.
pub fn random_measurement(dim: usize, rng: &mut RandomStream) -> Measurement {
    let basis = haar_basis(dim, rng);
    let values: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    let labels: Vec<String> = (0..dim).map(|k| format!("m{k}")).collect();
    Measurement::from_basis("M", basis, labels, &values).expect("Haar basis is orthonormal")
}

/// `U·diag(spectrum)·U†` for a Haar-random `U`; returns the matrix and the
/// spectrum sorted ascending.
pub fn planted_hermitian(dim: usize, rng: &mut RandomStream) -> (ComplexMatrix, Vec<f64>) {
    let u = haar_unitary(dim, rng);
    let mut spectrum: Vec<f64> = (0..dim).map(|_| 3.0 * rng.standard_normal()).collect();
    let d = ComplexMatrix::diagonal(&spectrum);
    let m = u.matmul(&d).and_then(|ud| ud.matmul(&u.adjoint())).expect("square");
    spectrum.sort_by(f64::total_cmp);
    (m, spectrum)
}

fn born_suite(r: &mut Recorder, seed: u64) -> Result<()> {
    let mut rng = RandomStream::substream(seed, 1);
    let (mut worst_sum, mut worst_expect) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let dim = 2 + i % 7;
        let state = haar_state(dim, &mut rng);
        let m = random_measurement(dim, &mut rng);
        let dist = predict(&state, &m)?;
        worst_sum = worst_sum.max((dist.total() - 1.0).abs());
        let direct: f64 = dist.probabilities().iter().zip(m.values()).map(|(p, v)| p * v).sum();
        let via_operator = expectation(&state, &build_operator(&m))?;
        worst_expect = worst_expect.max((direct - via_operator).abs());
    }
    r.check(
        "probabilities sum to 1 (1000 pairs, dims 2-8)",
        worst_sum <= 1e-9,
        format!("max deviation {worst_sum:.2e}"),
    );
    r.check(
        "expectation via operator equals sum of value*probability",
        worst_expect <= 1e-9,
        format!("max deviation {worst_expect:.2e}"),
    );

    let mut rng = RandomStream::substream(seed, 2);
    let mut agree = 0usize;
    let pairs = 10_000;
    for i in 0..pairs {
        let dim = 2 + i % 7;
        let state = haar_state(dim, &mut rng);
        let m = random_measurement(dim, &mut rng);
        let (first, collapsed) = sample(&state, &m, &mut rng)?;
        let (second, _) = sample(&collapsed, &m, &mut rng)?;
        agree += usize::from(first == second);
    }
    r.check(
        "immediate re-measurement agrees (10^4 pairs)",
        agree == pairs,
        format!("{agree}/{pairs} agreements"),
    );

    let mut rng = RandomStream::substream(seed, 3);
    let (mut worst_spectrum, mut worst_reconstruction) = (0.0f64, 0.0f64);
    for i in 0..500 {
        let dim = 2 + i % 15;
        let (m, planted) = planted_hermitian(dim, &mut rng);
        let eig = hermitian_eigen(&m)?;
        for (a, b) in eig.eigenvalues.iter().zip(&planted) {
            worst_spectrum = worst_spectrum.max((a - b).abs());
        }
        worst_reconstruction = worst_reconstruction.max(eig.reconstruct().max_abs_diff(&m));
    }
    r.check(
        "eigensolver recovers planted spectra (500, dims 2-16)",
        worst_spectrum <= 1e-8,
        format!("max error {worst_spectrum:.2e}"),
    );
    r.check(
        "eigendecomposition reconstructs the matrix",
        worst_reconstruction <= 1e-8,
        format!("max error {worst_reconstruction:.2e}"),
    );
    Ok(())
}

fn mub_suite(r: &mut Recorder) -> Result<()> {
    let mut worst = 0.0f64;
    for n in 2..=MAX_DIM {
        let (a, _) = mub_pair(n)?;
        worst = worst.max(unbiasedness_deviation(&a, &fourier_basis(n)?)?);
    }
    r.check(
        "Fourier basis is unbiased to the standard basis, n = 2..64",
        worst <= 1e-9,
        format!("max deviation {worst:.2e}"),
    );

    let table = table_for_mub_pair(2)?;
    let expected = [
        [1.0, 0.0, 0.5, 0.5],
        [0.0, 1.0, 0.5, 0.5],
        [0.5, 0.5, 1.0, 0.0],
        [0.5, 0.5, 0.0, 1.0],
    ];
    let worst_table = table
        .p
        .iter()
        .zip(&expected)
        .flat_map(|(row, want)| row.iter().zip(want).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    r.check(
        "two-outcome conditional table is exact",
        worst_table <= 1e-12,
        format!("max deviation {worst_table:.2e}"),
    );

    let scan = classical_mixture_scan(&table, 100_000)?;
    r.check(
        "classical mixtures never predict a B outcome with certainty",
        (scan.max_b_probability - 0.5).abs() <= 1e-12 && !scan.reaches_determinism,
        format!(
            "max P(B) = {} over {} mixtures",
            scan.max_b_probability, scan.grid_steps
        ),
    );
    r.check(
        "superposing the A final states makes B deterministic",
        scan.quantum_reaches_determinism,
        format!("P(b+) = {}", scan.quantum_superposition_probability),
    );
    Ok(())
}

/// Feasibility of real `±1/√n` orthogonal matrices for `n = 2..=5`.
pub fn feasibility_table() -> Result<Vec<FeasibilityRow>> {
    (2..=MAX_SEARCH_DIM)
        .map(|n| {
            real_equal_modulus_search(n).map(|s| FeasibilityRow {
                n,
                candidates: s.candidates,
                orthogonal: s.orthogonal_count,
                feasible: s.feasible,
            })
        })
        .collect()
}

fn real_search_suite(r: &mut Recorder) -> Result<Vec<FeasibilityRow>> {
    let rows = feasibility_table()?;
    for row in &rows {
        r.check(
            &format!("n = {} feasible: {}", row.n, if row.feasible { "yes" } else { "no" }),
            row.feasible == (row.n % 2 == 0),
            format!("{} of {} sign matrices orthogonal", row.orthogonal, row.candidates),
        );
    }
    Ok(rows)
}

fn phase_suite(r: &mut Recorder, seed: u64) -> Result<()> {
    for n in 2..=4 {
        let f = fourier_basis(n)?;
        let change = ComplexMatrix::from_columns(&f.eigenstates())?.adjoint();
        let mut rng = RandomStream::substream(seed, 10 + n as u64);
        let mut converged = 0;
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let (problem, _) = planted_problem(change.clone(), &mut rng)?;
            let solution = retrieve_phases(&problem, 50, &mut rng);
            converged += usize::from(solution.converged);
            worst = worst.max(solution.residual);
        }
        r.check(
            &format!("planted problems converge, n = {n}"),
            converged >= 99,
            format!("{converged}/100 with residual <= {PHASE_CONVERGENCE_TOL:e}; worst {worst:.2e}"),
        );
    }

    let f2 = ComplexMatrix::from_columns(&fourier_basis(2)?.eigenstates())?.adjoint();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut rng = RandomStream::substream(seed, 20);
    let to_delta = PhaseRetrievalProblem::new(vec![h, h], vec![1.0, 0.0], f2.clone())?;
    let solution = retrieve_phases(&to_delta, 20, &mut rng);
    r.check(
        "uniform-to-delta problem recovers equal phases",
        solution.converged && solution.phases.iter().all(|p| p.abs() < 1e-6),
        format!("phases {:?}", solution.phases),
    );
    let infeasible = PhaseRetrievalProblem::new(vec![1.0, 0.0], vec![1.0, 0.0], f2)?;
    let solution = retrieve_phases(&infeasible, 20, &mut rng);
    r.check(
        "delta-to-delta problem is reported as not converged",
        !solution.converged,
        format!("residual {:.6}", solution.residual),
    );
    Ok(())
}

fn spin_suite(r: &mut Recorder) {
    let worst = (0..=720)
        .map(|deg| {
            let theta = f64::from(deg);
            (spin_transition(theta) - (theta.to_radians() / 2.0).cos().powi(2)).abs()
        })
        .fold(0.0, f64::max);
    r.check(
        "P(z-up) = cos^2(theta/2) at 1 degree steps over two turns",
        worst <= 1e-12,
        format!("max deviation {worst:.2e}"),
    );
    let start = spin_state(0.0);
    let diff = spin_state(360.0).max_abs_diff(&start.scaled((-1.0).into()));
    r.check(
        "a full turn negates the phase-space vector",
        diff <= 1e-12,
        format!("deviation {diff:.2e}"),
    );
    let back = spin_state(720.0).max_abs_diff(&start);
    r.check(
        "two full turns restore the phase-space vector",
        back <= 1e-12,
        format!("deviation {back:.2e}"),
    );
}

fn simulator_suite(r: &mut Recorder, seed: u64) -> Result<()> {
    let pair = table1_pair();
    let trials = 10_000;
    let mut observed = 0;
    for (i, text) in ["A,B,A,B", "B,A,A,B,A", "A,A,B,B,A"].iter().enumerate() {
        let report = run(
            &pair,
            &ExperimentScript::parse(text)?,
            Mode::Observation,
            2_000,
            seed + i as u64,
        )?;
        observed += report.total_invalidations();
    }
    r.check(
        "observation mode never invalidates",
        observed == 0,
        format!("{observed} invalidations"),
    );

    let report = run(
        &pair,
        &ExperimentScript::parse("A,B,A")?,
        Mode::Interaction,
        trials,
        seed,
    )?;
    let rate = report.invalidation[0].rate;
    let sigma = (0.25 / trials as f64).sqrt();
    r.check(
        "A,B,A changes the A value half the time",
        (rate - 0.5).abs() <= 4.0 * sigma,
        format!("rate {rate:.4}, 4 sigma = {:.4}", 4.0 * sigma),
    );
    r.check(
        "classical fixed-value model is rejected",
        classical_fit_check(&report)?,
        format!("rate {rate:.4}"),
    );

    let report = run(
        &pair,
        &ExperimentScript::parse("A,A,A")?,
        Mode::Interaction,
        trials,
        seed,
    )?;
    r.check(
        "A,A,A never invalidates",
        report.total_invalidations() == 0,
        format!("{} invalidations", report.total_invalidations()),
    );

    let pinned = table1_pair().with_initial_state(StateVector::basis(2, 0))?;
    let tv = order_effect(&pinned, "A", "B", "A", trials, seed)?;
    r.check(
        "order effect from a definite A state is 1/2",
        (tv - 0.5).abs() <= 4.0 * sigma,
        format!("total variation {tv:.4}"),
    );

    let actions: Vec<String> = ["Z", "X", "Z", "Z", "X", "Z"].iter().map(|s| s.to_string()).collect();
    let scenario = Arc::new(spin_zx());
    let first = serde_json::to_string(&replay(Arc::clone(&scenario), seed, &actions)?).expect("serializable");
    let second = serde_json::to_string(&replay(scenario, seed, &actions)?).expect("serializable");
    r.check(
        "replay reproduces the event log byte for byte",
        first == second,
        format!("{} bytes", first.len()),
    );
    Ok(())
}

/// Runs `suite` with all randomness derived from `seed`.
pub fn verify(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let mut feasibility = None;
    for part in suite.parts() {
        let mut r = Recorder {
            suite: part,
            checks: Vec::new(),
        };
        match part {
            Suite::Born => born_suite(&mut r, seed)?,
            Suite::Mub => mub_suite(&mut r)?,
            Suite::RealSearch => feasibility = Some(real_search_suite(&mut r)?),
            Suite::Phase => phase_suite(&mut r, seed)?,
            Suite::Spin => spin_suite(&mut r),
            Suite::Simulator => simulator_suite(&mut r, seed)?,
            Suite::All => unreachable!("expanded above"),
        }
        checks.extend(r.checks);
    }
    Ok(VerifyReport {
        suite,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
        feasibility,
    })
}
