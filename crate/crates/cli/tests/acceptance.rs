//! Acceptance run: one PASS/FAIL line per primary criterion, checked against
//! independent reference computations. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dqm_core::lab::{
    classical_mixture_scan, conditional_table, fourier_basis, planted_problem, real_equal_modulus_search,
    retrieve_phases, spin_state, spin_transition, PHASE_CONVERGENCE_TOL,
};
use dqm_core::linalg::{hermitian_eigen, ComplexMatrix};
use dqm_core::measurement::{build_operator, expectation, predict, sample};
use dqm_core::random::haar_state;
use dqm_core::simulator::{builtin_scenario, replay, run, table1_pair, ExperimentScript, Mode, Scenario};
use dqm_core::verify::{planted_hermitian, random_measurement};
use dqm_core::{Complex64, RandomStream};
use dqm_service::{Session, SessionRecord};
use dqm_testkit::{
    binomial_sigma, born, change_probability, dft_basis, enumerate_paths, inner, standard_basis, step_marginals,
    table1_bases, table1_by_hand, Preparation,
};

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn born_rule() -> Outcome {
    let mut rng = RandomStream::substream(SEED, 1);
    let (mut worst_sum, mut worst_expect) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let dim = 2 + i % 7;
        let state = haar_state(dim, &mut rng);
        let m = random_measurement(dim, &mut rng);
        let dist = predict(&state, &m).unwrap();
        worst_sum = worst_sum.max((dist.total() - 1.0).abs());
        let reference: f64 = m
            .outcomes()
            .iter()
            .map(|o| o.value * born(state.amplitudes(), o.eigenstate.amplitudes()))
            .sum();
        let via_operator = expectation(&state, &build_operator(&m)).unwrap();
        worst_expect = worst_expect.max((reference - via_operator).abs());
    }
    outcome(
        worst_sum <= 1e-9 && worst_expect <= 1e-9,
        format!("1000 pairs, dims 2-8: |sum-1| <= {worst_sum:.1e}, |<A> - sum v*p| <= {worst_expect:.1e}"),
    )
}

fn repeatability() -> Outcome {
    let mut rng = RandomStream::substream(SEED, 2);
    let pairs = 10_000;
    let mut agree = 0;
    for i in 0..pairs {
        let dim = 2 + i % 7;
        let state = haar_state(dim, &mut rng);
        let m = random_measurement(dim, &mut rng);
        let (first, collapsed) = sample(&state, &m, &mut rng).unwrap();
        let (second, _) = sample(&collapsed, &m, &mut rng).unwrap();
        agree += usize::from(first == second);
    }
    outcome(agree == pairs, format!("{agree}/{pairs} immediate repeats agree"))
}

fn table_reproduction() -> Outcome {
    let scenario = table1_pair();
    let m = scenario.measurements();
    let table = conditional_table(&m[0], &m[1]).unwrap();
    let worst = table
        .p
        .iter()
        .zip(table1_by_hand())
        .flat_map(|(row, want)| row.iter().zip(want).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-12,
        format!("table1-pair vs hand table: max |diff| = {worst:.1e}"),
    )
}

fn classical_mixture() -> Outcome {
    let scenario = table1_pair();
    let m = scenario.measurements();
    let table = conditional_table(&m[0], &m[1]).unwrap();
    let scan = classical_mixture_scan(&table, 100_000).unwrap();
    // Reference: equal superposition of the two A states, projected on b+.
    let (a, b) = table1_bases();
    let plus: Vec<Complex64> = a[0].iter().zip(&a[1]).map(|(x, y)| (x + y) / 2f64.sqrt()).collect();
    let quantum = born(&plus, &b[0]);
    let passed = (scan.max_b_probability - 0.5).abs() <= 1e-12
        && !scan.reaches_determinism
        && (quantum - 1.0).abs() <= 1e-12
        && (scan.quantum_superposition_probability - quantum).abs() <= 1e-12
        && scan.quantum_reaches_determinism;
    outcome(
        passed,
        format!(
            "{} mixtures: max P(B) = {}, deterministic = {}; superposition P(b+) = {}",
            scan.grid_steps, scan.max_b_probability, scan.reaches_determinism, scan.quantum_superposition_probability
        ),
    )
}

fn real_impossibility() -> Outcome {
    let mut flags = Vec::new();
    let mut timings = Vec::new();
    let mut counts_ok = true;
    for n in 2..=5 {
        let start = Instant::now();
        let report = real_equal_modulus_search(n).unwrap();
        timings.push(start.elapsed().as_secs_f64());
        counts_ok &= report.candidates == 1u64 << (n * n);
        flags.push(if report.feasible { "yes" } else { "no" });
    }
    let passed = flags == ["yes", "no", "yes", "no"] && counts_ok && timings[1] < 1.0 && timings[3] < 120.0;
    outcome(
        passed,
        format!(
            "n=2..5 feasible: {}; n=3 in {:.3}s, n=5 in {:.1}s",
            flags.join(","),
            timings[1],
            timings[3]
        ),
    )
}

fn mub_property() -> Outcome {
    let mut worst = 0.0f64;
    for n in 2..=64 {
        let f = fourier_basis(n).unwrap();
        for outcome in f.outcomes() {
            for e in standard_basis(n) {
                let p = born(outcome.eigenstate.amplitudes(), &e);
                worst = worst.max((p - 1.0 / n as f64).abs());
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("n=2..64: max ||<e_j|f_k>|^2 - 1/n| = {worst:.1e}"),
    )
}

fn spin_half_angle() -> Outcome {
    let mut worst = 0.0f64;
    for deg in 0..=720 {
        let theta = f64::from(deg);
        let reference = (theta.to_radians() / 2.0).cos().powi(2);
        worst = worst.max((spin_transition(theta) - reference).abs());
    }
    let zero = spin_state(0.0);
    let full = spin_state(360.0);
    let flip = zero
        .amplitudes()
        .iter()
        .zip(full.amplitudes())
        .map(|(a, b)| (a + b).norm())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-12 && flip <= 1e-12,
        format!("721 angles: max |P - cos^2(t/2)| = {worst:.1e}; |psi(360) + psi(0)| = {flip:.1e}"),
    )
}

fn eigensolver() -> Outcome {
    let mut rng = RandomStream::substream(SEED, 3);
    let (mut worst_spectrum, mut worst_reconstruction) = (0.0f64, 0.0f64);
    for i in 0..500 {
        let dim = 2 + i % 15;
        let (m, planted) = planted_hermitian(dim, &mut rng);
        let eig = hermitian_eigen(&m).unwrap();
        let mut found = eig.eigenvalues.clone();
        found.sort_by(f64::total_cmp);
        for (a, b) in found.iter().zip(&planted) {
            worst_spectrum = worst_spectrum.max((a - b).abs());
        }
        // Reference reconstruction: sum of a_i |v_i><v_i| built entrywise.
        for r in 0..dim {
            for c in 0..dim {
                let z: Complex64 = eig
                    .eigenvalues
                    .iter()
                    .zip(&eig.eigenvectors)
                    .map(|(a, v)| v.amplitudes()[r] * v.amplitudes()[c].conj() * *a)
                    .sum();
                worst_reconstruction = worst_reconstruction.max((z - m[(r, c)]).norm());
            }
        }
    }
    outcome(
        worst_spectrum <= 1e-8 && worst_reconstruction <= 1e-8,
        format!("500 matrices, dims 2-16: spectrum error {worst_spectrum:.1e}, reconstruction error {worst_reconstruction:.1e}"),
    )
}

fn all_scripts(max_len: usize) -> Vec<Vec<usize>> {
    let mut scripts = Vec::new();
    for len in 1..=max_len {
        for bits in 0..(1usize << len) {
            scripts.push((0..len).map(|k| (bits >> k) & 1).collect());
        }
    }
    scripts
}

fn simulator_vs_oracle() -> Outcome {
    let scenario = table1_pair();
    let (a, b) = table1_bases();
    let bases = [a, b];
    let names = ["A", "B"];
    let trials = 100_000;
    let scripts = all_scripts(5);
    let mut comparisons = 0usize;
    let mut failures = Vec::new();
    let mut worst_z = 0.0f64;
    let mut observation_invalidations = 0u64;
    for (i, script) in scripts.iter().enumerate() {
        let text: Vec<&str> = script.iter().map(|&m| names[m]).collect();
        let parsed = ExperimentScript::parse(&text.join(",")).unwrap();
        let report = run(&scenario, &parsed, Mode::Interaction, trials, SEED + i as u64).unwrap();
        let paths = enumerate_paths(&bases, script, &Preparation::HaarAverage(2));
        let marginals = step_marginals(&bases, script, &paths);
        let mut check = |what: String, observed: f64, exact: f64| {
            comparisons += 1;
            let sigma = binomial_sigma(exact, trials);
            let diff = (observed - exact).abs();
            if sigma > 0.0 {
                worst_z = worst_z.max(diff / sigma);
            }
            if diff > (4.0 * sigma).max(1e-12) {
                failures.push(format!("{what}: {observed} vs {exact}"));
            }
        };
        for (step, dist) in marginals.iter().enumerate() {
            let measurement = &scenario.measurements()[script[step]];
            for (k, &exact) in dist.iter().enumerate() {
                let label = &measurement.outcomes()[k].label;
                let observed = report.frequency(step, label).unwrap_or(0.0);
                check(format!("{} step {step} {label}", text.join(",")), observed, exact);
            }
            if let Some(exact) = change_probability(script, &paths, step) {
                let changed =
                    report.events.iter().filter(|t| !t[step].invalidated.is_empty()).count() as f64 / trials as f64;
                check(format!("{} step {step} change", text.join(",")), changed, exact);
            }
        }
        let observed = run(&scenario, &parsed, Mode::Observation, 10_000, SEED + i as u64).unwrap();
        observation_invalidations += observed.total_invalidations();
    }
    let passed = failures.is_empty() && observation_invalidations == 0;
    let mut detail = format!(
        "{} scripts x {trials} trials, {comparisons} comparisons, worst |z| = {worst_z:.2}, {} outside 4 sigma; observation invalidations = {observation_invalidations}",
        scripts.len(),
        failures.len()
    );
    if !failures.is_empty() {
        detail.push_str(&format!(" [{}]", failures.join("; ")));
    }
    outcome(passed, detail)
}

fn fourier_change(n: usize) -> ComplexMatrix {
    let rows = dft_basis(n)
        .into_iter()
        .map(|v| v.into_iter().map(|z| z.conj()).collect())
        .collect();
    ComplexMatrix::from_rows(rows).unwrap()
}

fn phase_retrieval() -> Outcome {
    let mut rng = RandomStream::substream(SEED, 4);
    let mut counts = Vec::new();
    for n in 2..=4 {
        let change = fourier_change(n);
        let mut converged = 0;
        for _ in 0..100 {
            let (problem, _) = planted_problem(change.clone(), &mut rng).unwrap();
            let solution = retrieve_phases(&problem, 50, &mut rng);
            // Independent check of the returned phases.
            let x: Vec<Complex64> = problem
                .moduli_a()
                .iter()
                .zip(&solution.phases)
                .map(|(&m, &p)| Complex64::from_polar(m, p))
                .collect();
            let residual: f64 = (0..n)
                .map(|k| {
                    let row: Vec<Complex64> = (0..n).map(|j| change[(k, j)].conj()).collect();
                    (inner(&row, &x).norm() - problem.moduli_b()[k]).powi(2)
                })
                .sum();
            converged += usize::from(solution.converged && residual <= PHASE_CONVERGENCE_TOL);
        }
        counts.push(converged);
    }
    outcome(
        counts.iter().all(|&c| c >= 99),
        format!("converged out of 100 for n=2,3,4 with 50 restarts: {counts:?}"),
    )
}

fn service_replay() -> Outcome {
    let mut sessions = 0;
    let mut identical = 0;
    for (name, dim) in [("table1-pair", None), ("spin-zx", None), ("fourier-n", Some(5))] {
        for seed in [0u64, 1, 42, u64::MAX] {
            let scenario: Arc<Scenario> = Arc::new(builtin_scenario(name, dim).unwrap());
            let names: Vec<String> = scenario.measurements().iter().map(|m| m.name().to_string()).collect();
            let mut session = Session::new(format!("s{seed}"), Arc::clone(&scenario), seed, "t".into()).unwrap();
            let mut rng = RandomStream::new(seed ^ 0x5eed);
            for _ in 0..25 {
                session.measure(&names[rng.below(names.len())]).unwrap();
            }
            let served = serde_json::to_string(session.history()).unwrap();
            // Round-trip the record as it would be stored on disk.
            let stored = serde_json::to_string(&session.record()).unwrap();
            let record: SessionRecord = serde_json::from_str(&stored).unwrap();
            let replayed = replay(Arc::new(record.scenario), record.seed, &record.actions).unwrap();
            sessions += 1;
            identical += usize::from(serde_json::to_string(&replayed).unwrap() == served);
        }
    }
    outcome(
        identical == sessions,
        format!(
            "{identical}/{sessions} recorded sessions replay to byte-identical history JSON, no web client involved"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("born-rule", born_rule),
        ("repeatability", repeatability),
        ("table-reproduction", table_reproduction),
        ("classical-mixture-failure", classical_mixture),
        ("real-impossibility", real_impossibility),
        ("mub-property", mub_property),
        ("spin-half-angle", spin_half_angle),
        ("eigensolver", eigensolver),
        ("simulator-vs-oracle", simulator_vs_oracle),
        ("phase-retrieval", phase_retrieval),
        ("service-replay", service_replay),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        let mark = if result.passed { "PASS" } else { "FAIL" };
        println!(
            "{mark} {name} ({:.1}s): {}",
            start.elapsed().as_secs_f64(),
            result.detail
        );
        failed += usize::from(!result.passed);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
