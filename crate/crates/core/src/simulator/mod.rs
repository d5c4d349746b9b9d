//! Monte-Carlo runs of scripted measurement sequences, either as passive
//! observations of fixed values or as interactions that collapse the state.

mod report;
mod scenario;
mod system;

use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::random::RandomStream;

pub use report::{InvalidationStat, OrderEffect, OutcomeFrequency, RunReport, StepFrequencies, CSV_HEADER};
pub use scenario::{
    builtin_descriptors, builtin_scenario, fourier_n, spin_zx, table1_pair, InitialState, MeasurementDescriptor,
    OutcomeDescriptor, Scenario, ScenarioDescriptor, BUILTIN_SCENARIOS, FOURIER_DEFAULT_DIM, FOURIER_N, SPIN_ZX,
    TABLE1_PAIR,
};
pub use system::{replay, Invalidation, MeasurementEvent, Mode, System};

/// Significance, in binomial standard errors, required by [`classical_fit_check`].
pub const FIT_SIGMAS: f64 = 5.0;

/// Ordered measurement names; repeats allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExperimentScript {
    pub steps: Vec<String>,
}

impl ExperimentScript {
    pub fn new<S: Into<String>>(steps: impl IntoIterator<Item = S>) -> Self {
        Self {
            steps: steps.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses a comma-separated list such as `A,B,A`.
    pub fn parse(text: &str) -> Result<Self> {
        let steps: Vec<String> = text.split(',').map(|s| s.trim().to_string()).collect();
        if steps.iter().any(String::is_empty) {
            return Err(Error::Script(format!("empty step in script {text:?}")));
        }
        Ok(Self { steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Measurement indices within `scenario`.
    pub fn resolve(&self, scenario: &Scenario) -> Result<Vec<usize>> {
        if self.steps.is_empty() {
            return Err(Error::Script("script has no steps".into()));
        }
        self.steps
            .iter()
            .map(|name| {
                scenario.index_of(name).ok_or_else(|| {
                    Error::Script(format!("unknown measurement {name:?} in scenario {}", scenario.name()))
                })
            })
            .collect()
    }
}

impl FromStr for ExperimentScript {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

fn run_trial(scenario: &Arc<Scenario>, steps: &[usize], mode: Mode, rng: RandomStream) -> Result<System> {
    let mut system = System::new(Arc::clone(scenario), mode, rng)?;
    for &index in steps {
        system.measure_index(index)?;
    }
    Ok(system)
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    Ok(())
}

/// Runs `script` on `trials` independent copies of the scenario.
///
/// Trial `t` draws from `RandomStream::substream(seed, t)`, so the report is
/// a pure function of the arguments regardless of thread scheduling.
pub fn run(scenario: &Scenario, script: &ExperimentScript, mode: Mode, trials: usize, seed: u64) -> Result<RunReport> {
    check_trials(trials)?;
    let steps = script.resolve(scenario)?;
    let shared = Arc::new(scenario.clone());
    let events: Vec<Vec<MeasurementEvent>> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&shared, &steps, mode, RandomStream::substream(seed, t as u64)).map(System::into_history))
        .collect::<Result<_>>()?;

    let aggregate = steps
        .iter()
        .enumerate()
        .map(|(step, &m_index)| {
            let m = &scenario.measurements()[m_index];
            let mut counts = vec![0u64; m.dim()];
            for trial in &events {
                let label = &trial[step].outcome_label;
                counts[m.index_of(label).expect("label from this measurement")] += 1;
            }
            StepFrequencies {
                step,
                measurement: m.name().to_string(),
                frequencies: m
                    .outcomes()
                    .iter()
                    .zip(counts)
                    .map(|(o, count)| OutcomeFrequency {
                        label: o.label.clone(),
                        count,
                        frequency: count as f64 / trials as f64,
                    })
                    .collect(),
            }
        })
        .collect();

    let mut invalidation: Vec<InvalidationStat> = Vec::new();
    for (step, &m_index) in steps.iter().enumerate() {
        let Some(previous) = steps[..step].iter().rposition(|&s| s == m_index) else {
            continue;
        };
        let measurement = script.steps[step].clone();
        let intervening = script.steps[previous + 1..step].to_vec();
        let changed = events
            .iter()
            .filter(|trial| !trial[step].invalidated.is_empty())
            .count() as u64;
        match invalidation
            .iter_mut()
            .find(|s| s.measurement == measurement && s.intervening == intervening)
        {
            Some(stat) => {
                stat.opportunities += trials as u64;
                stat.invalidations += changed;
            }
            None => invalidation.push(InvalidationStat {
                measurement,
                intervening,
                opportunities: trials as u64,
                invalidations: changed,
                rate: 0.0,
            }),
        }
    }
    for stat in &mut invalidation {
        stat.rate = stat.invalidations as f64 / stat.opportunities as f64;
    }

    let mut distinct: Vec<usize> = Vec::new();
    for &s in &steps {
        if !distinct.contains(&s) {
            distinct.push(s);
        }
    }
    let mut order_effects = Vec::new();
    for (i, &x) in distinct.iter().enumerate() {
        for &y in &distinct[i + 1..] {
            order_effects.push(OrderEffect {
                first: scenario.measurements()[x].name().to_string(),
                second: scenario.measurements()[y].name().to_string(),
                probe: scenario.measurements()[x].name().to_string(),
                tv_distance: tv_by_index(&shared, x, y, x, mode, trials, seed)?,
            });
        }
    }

    Ok(RunReport {
        scenario: scenario.name().to_string(),
        dim: scenario.dim(),
        mode,
        trials,
        seed,
        script: script.steps.clone(),
        events,
        aggregate,
        invalidation,
        order_effect: order_effects,
    })
}

/// Probe-outcome histogram after running `sequence`, reading the probe at
/// its last occurrence.
fn probe_histogram(
    scenario: &Arc<Scenario>,
    sequence: &[usize],
    probe: usize,
    mode: Mode,
    trials: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    let position = sequence
        .iter()
        .rposition(|&s| s == probe)
        .expect("probe is in the sequence");
    let outcomes: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let system = run_trial(scenario, sequence, mode, RandomStream::substream(seed, t as u64))?;
            let event = &system.history()[position];
            Ok(scenario.measurements()[probe]
                .index_of(&event.outcome_label)
                .expect("own label"))
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; scenario.dim()];
    for k in outcomes {
        counts[k] += 1;
    }
    Ok(counts)
}

fn tv_by_index(
    scenario: &Arc<Scenario>,
    m1: usize,
    m2: usize,
    probe: usize,
    mode: Mode,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let mut forward = vec![m1, m2];
    let mut backward = vec![m2, m1];
    if probe != m1 && probe != m2 {
        forward.push(probe);
        backward.push(probe);
    }
    let p = probe_histogram(scenario, &forward, probe, mode, trials, seed)?;
    let q = probe_histogram(scenario, &backward, probe, mode, trials, seed)?;
    Ok(0.5
        * p.iter()
            .zip(&q)
            .map(|(&a, &b)| (a as f64 - b as f64).abs() / trials as f64)
            .sum::<f64>())
}

/// Interaction-mode order effect; see [`order_effect_in`].
pub fn order_effect(scenario: &Scenario, m1: &str, m2: &str, probe: &str, trials: usize, seed: u64) -> Result<f64> {
    order_effect_in(Mode::Interaction, scenario, m1, m2, probe, trials, seed)
}

/// Estimated total-variation distance between the `probe` outcome
/// distributions after measuring `m1, m2` and after `m2, m1`.
///
/// The probe is read at its last occurrence in each order, or measured
/// once more at the end when it is neither `m1` nor `m2`. Trial `t` of both
/// orders shares the substream `(seed, t)`, hence the same initial state.
pub fn order_effect_in(
    mode: Mode,
    scenario: &Scenario,
    m1: &str,
    m2: &str,
    probe: &str,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_trials(trials)?;
    let indices = ExperimentScript::new([m1, m2, probe]).resolve(scenario)?;
    let shared = Arc::new(scenario.clone());
    tv_by_index(&shared, indices[0], indices[1], indices[2], mode, trials, seed)
}

/// True iff some re-measurement separated by other measurements changed
/// value more often than a fixed-value model allows: the observed rate
/// exceeds zero by [`FIT_SIGMAS`] binomial standard errors.
///
/// Observation-mode reports are fixed-value by construction and return `false`.
pub fn classical_fit_check(report: &RunReport) -> Result<bool> {
    if report.mode == Mode::Observation {
        return Ok(false);
    }
    Ok(report.invalidation.iter().any(|stat| {
        if stat.intervening.is_empty() || stat.opportunities == 0 {
            return false;
        }
        let n = stat.opportunities as f64;
        let sigma = (stat.rate * (1.0 - stat.rate) / n).sqrt();
        stat.rate - FIT_SIGMAS * sigma > 0.0
    }))
}
