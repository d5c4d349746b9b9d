use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::mub_pair;
use crate::linalg::{normalize, StateVector};
use crate::measurement::Measurement;
use crate::random::{haar_state, RandomStream};

pub const TABLE1_PAIR: &str = "table1-pair";
pub const SPIN_ZX: &str = "spin-zx";
pub const FOURIER_N: &str = "fourier-n";
pub const BUILTIN_SCENARIOS: [&str; 3] = [TABLE1_PAIR, SPIN_ZX, FOURIER_N];
pub const FOURIER_DEFAULT_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    HaarRandom,
    Fixed { state: StateVector },
}

/// A system of fixed dimension with a named set of measurements and a rule
/// for preparing the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    name: String,
    dim: usize,
    measurements: Vec<Measurement>,
    initial_state: InitialState,
}

#[derive(Deserialize)]
struct RawScenario {
    name: String,
    measurements: Vec<Measurement>,
    #[serde(default = "haar")]
    initial_state: InitialState,
}

fn haar() -> InitialState {
    InitialState::HaarRandom
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawScenario::deserialize(deserializer)?;
        Scenario::new(raw.name, raw.measurements, raw.initial_state).map_err(serde::de::Error::custom)
    }
}

impl Scenario {
    pub fn new(name: impl Into<String>, measurements: Vec<Measurement>, initial_state: InitialState) -> Result<Self> {
        let name = name.into();
        let dim = measurements
            .first()
            .map(Measurement::dim)
            .ok_or_else(|| Error::InvalidMeasurement(format!("scenario {name:?} has no measurements")))?;
        let mut names = HashSet::new();
        for m in &measurements {
            if m.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: m.dim(),
                });
            }
            if !names.insert(m.name()) {
                return Err(Error::InvalidMeasurement(format!(
                    "scenario {name:?} declares measurement {:?} twice",
                    m.name()
                )));
            }
        }
        let initial_state = match initial_state {
            InitialState::HaarRandom => InitialState::HaarRandom,
            InitialState::Fixed { state } => InitialState::Fixed {
                state: check_initial(&state, dim)?,
            },
        };
        Ok(Self {
            name,
            dim,
            measurements,
            initial_state,
        })
    }

    /// Same scenario, pinned to `state`.
    pub fn with_initial_state(mut self, state: StateVector) -> Result<Self> {
        self.initial_state = InitialState::Fixed {
            state: check_initial(&state, self.dim)?,
        };
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn initial_state(&self) -> &InitialState {
        &self.initial_state
    }

    pub fn index_of(&self, measurement: &str) -> Option<usize> {
        self.measurements.iter().position(|m| m.name() == measurement)
    }

    pub fn measurement(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.name() == name)
    }

    /// Initial state for one run; consumes randomness only when Haar-random.
    pub fn prepare(&self, rng: &mut RandomStream) -> StateVector {
        match &self.initial_state {
            InitialState::HaarRandom => haar_state(self.dim, rng),
            InitialState::Fixed { state } => state.clone(),
        }
    }

    pub fn descriptor(&self) -> ScenarioDescriptor {
        ScenarioDescriptor {
            name: self.name.clone(),
            dim: self.dim,
            dim_range: (self.name == FOURIER_N).then_some([2, crate::linalg::MAX_DIM]),
            initial_state: match self.initial_state {
                InitialState::HaarRandom => "haar_random",
                InitialState::Fixed { .. } => "fixed",
            }
            .to_string(),
            measurements: self
                .measurements
                .iter()
                .map(|m| MeasurementDescriptor {
                    name: m.name().to_string(),
                    outcomes: m
                        .outcomes()
                        .iter()
                        .map(|o| OutcomeDescriptor {
                            label: o.label.clone(),
                            value: o.value,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

fn check_initial(state: &StateVector, dim: usize) -> Result<StateVector> {
    if state.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: state.dim(),
        });
    }
    if !state.is_unit() {
        return Err(Error::Domain("initial state must have unit norm".into()));
    }
    normalize(state)
}

/// Public summary of a scenario: no eigenstates, no initial amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescriptor {
    pub name: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dim_range: Option<[usize; 2]>,
    pub initial_state: String,
    pub measurements: Vec<MeasurementDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementDescriptor {
    pub name: String,
    pub outcomes: Vec<OutcomeDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDescriptor {
    pub label: String,
    pub value: f64,
}

/// `A` (standard basis, `a±`) and `B` (45° basis, `b±`), values ±1,
/// Haar-random initial state.
pub fn table1_pair() -> Scenario {
    let (a, b) = mub_pair(2).expect("n = 2 is in range");
    Scenario::new(TABLE1_PAIR, vec![a, b], InitialState::HaarRandom).expect("valid preset")
}

/// Spin-½ restricted to the Z–X plane: `Z` with `z-up`/`z-down` and `X` with
/// `x-up`/`x-down`, values ±½.
pub fn spin_zx() -> Scenario {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = Measurement::standard("Z", ["z-up", "z-down"], &[0.5, -0.5]).expect("valid preset");
    let x = Measurement::from_basis(
        "X",
        vec![
            StateVector::from_real(&[h, h]).expect("finite"),
            StateVector::from_real(&[-h, h]).expect("finite"),
        ],
        ["x-up", "x-down"],
        &[0.5, -0.5],
    )
    .expect("valid preset");
    Scenario::new(SPIN_ZX, vec![z, x], InitialState::HaarRandom).expect("valid preset")
}

/// `A` (standard basis) against `B` (Fourier basis) in `n` dimensions.
pub fn fourier_n(n: usize) -> Result<Scenario> {
    let (a, b) = mub_pair(n)?;
    Scenario::new(FOURIER_N, vec![a, b], InitialState::HaarRandom)
}

/// Looks up a built-in scenario. `dim` is required to match for fixed-size
/// presets and selects the size of `fourier-n` (default 3).
pub fn builtin_scenario(name: &str, dim: Option<usize>) -> Result<Scenario> {
    let scenario = match name {
        TABLE1_PAIR => table1_pair(),
        SPIN_ZX => spin_zx(),
        FOURIER_N => fourier_n(dim.unwrap_or(FOURIER_DEFAULT_DIM))?,
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    match dim {
        Some(d) if d != scenario.dim() => Err(Error::Domain(format!(
            "scenario {name} has fixed dimension {}, got {d}",
            scenario.dim()
        ))),
        _ => Ok(scenario),
    }
}

pub fn builtin_descriptors() -> Vec<ScenarioDescriptor> {
    BUILTIN_SCENARIOS
        .iter()
        .map(|name| builtin_scenario(name, None).expect("presets are valid").descriptor())
        .collect()
}
