use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::measurement::{predict, sample, transition_probability, OutcomeDistribution};
use crate::random::RandomStream;
use crate::simulator::Scenario;

/// How a measurement acts on the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Values are fixed at preparation and merely read out.
    Observation,
    /// Born sampling followed by collapse.
    Interaction,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Observation => "observation",
            Mode::Interaction => "interaction",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observation" => Ok(Mode::Observation),
            "interaction" => Ok(Mode::Interaction),
            other => Err(Error::Domain(format!("unknown mode {other:?}"))),
        }
    }
}

/// A re-measurement that returned a different label than last time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Invalidation {
    pub measurement: String,
    pub old_label: String,
    pub new_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub step_index: usize,
    pub measurement: String,
    pub outcome_label: String,
    pub value: f64,
    /// Probability of this outcome just before the measurement.
    pub probability: f64,
    pub invalidated: Vec<Invalidation>,
}

/// One prepared system being measured step by step.
#[derive(Debug, Clone)]
pub struct System {
    scenario: Arc<Scenario>,
    mode: Mode,
    initial: StateVector,
    state: StateVector,
    /// Frozen outcome per measurement; observation mode only.
    hidden: Vec<usize>,
    last: Vec<Option<usize>>,
    history: Vec<MeasurementEvent>,
    rng: RandomStream,
}

impl System {
    /// Prepares the initial state from `rng`. In observation mode every
    /// measurement's value is then drawn from the initial Born distribution,
    /// in scenario order, and never changes.
    pub fn new(scenario: Arc<Scenario>, mode: Mode, mut rng: RandomStream) -> Result<Self> {
        let initial = scenario.prepare(&mut rng);
        let hidden = match mode {
            Mode::Interaction => Vec::new(),
            Mode::Observation => scenario
                .measurements()
                .iter()
                .map(|m| sample(&initial, m, &mut rng).map(|(k, _)| k))
                .collect::<Result<_>>()?,
        };
        let last = vec![None; scenario.measurements().len()];
        Ok(Self {
            scenario,
            mode,
            state: initial.clone(),
            initial,
            hidden,
            last,
            history: Vec::new(),
            rng,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial
    }

    /// Current state; in observation mode this stays the initial state.
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn history(&self) -> &[MeasurementEvent] {
        &self.history
    }

    pub fn into_history(self) -> Vec<MeasurementEvent> {
        self.history
    }

    pub fn measure(&mut self, name: &str) -> Result<&MeasurementEvent> {
        let index = self.scenario.index_of(name).ok_or_else(|| {
            Error::Script(format!(
                "unknown measurement {name:?} in scenario {}",
                self.scenario.name()
            ))
        })?;
        self.measure_index(index)
    }

    pub fn measure_index(&mut self, index: usize) -> Result<&MeasurementEvent> {
        let scenario = Arc::clone(&self.scenario);
        let m = scenario
            .measurements()
            .get(index)
            .ok_or_else(|| Error::Script(format!("measurement index {index} out of range")))?;
        let (k, probability) = match self.mode {
            Mode::Interaction => {
                let (k, collapsed) = sample(&self.state, m, &mut self.rng)?;
                let p = transition_probability(&self.state, &m.outcome(k).eigenstate)?;
                self.state = collapsed;
                (k, p)
            }
            Mode::Observation => {
                let k = self.hidden[index];
                let p = if self.last[index].is_some() {
                    1.0
                } else {
                    transition_probability(&self.initial, &m.outcome(k).eigenstate)?
                };
                (k, p)
            }
        };
        let invalidated = match self.last[index] {
            Some(prev) if prev != k => vec![Invalidation {
                measurement: m.name().to_string(),
                old_label: m.outcome(prev).label.clone(),
                new_label: m.outcome(k).label.clone(),
            }],
            _ => Vec::new(),
        };
        self.last[index] = Some(k);
        let outcome = m.outcome(k);
        self.history.push(MeasurementEvent {
            step_index: self.history.len(),
            measurement: m.name().to_string(),
            outcome_label: outcome.label.clone(),
            value: outcome.value,
            probability,
            invalidated,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    /// Born distribution of every measurement in the current state, in
    /// scenario order.
    pub fn predictions(&self) -> Result<Vec<OutcomeDistribution>> {
        self.scenario
            .measurements()
            .iter()
            .map(|m| predict(&self.state, m))
            .collect()
    }
}

/// Re-runs a recorded interactive session: the state is drawn from
/// `RandomStream::new(seed)` and each action is applied in interaction mode.
pub fn replay(scenario: Arc<Scenario>, seed: u64, actions: &[String]) -> Result<Vec<MeasurementEvent>> {
    let mut system = System::new(scenario, Mode::Interaction, RandomStream::new(seed))?;
    for name in actions {
        system.measure(name)?;
    }
    Ok(system.into_history())
}
