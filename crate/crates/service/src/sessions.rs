use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use dqm_core::measurement::OutcomeDistribution;
use dqm_core::simulator::{MeasurementEvent, Mode, Scenario, System};
use dqm_core::{RandomStream, StateVector};
use serde::{Deserialize, Serialize};

/// One live system plus everything needed to rebuild it.
#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub seed: u64,
    pub created_at: String,
    scenario: Arc<Scenario>,
    system: System,
    actions: Vec<String>,
}

impl Session {
    pub fn new(id: String, scenario: Arc<Scenario>, seed: u64, created_at: String) -> dqm_core::Result<Self> {
        let system = System::new(Arc::clone(&scenario), Mode::Interaction, RandomStream::new(seed))?;
        Ok(Self {
            id,
            seed,
            created_at,
            scenario,
            system,
            actions: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn history(&self) -> &[MeasurementEvent] {
        self.system.history()
    }

    pub fn state(&self) -> &StateVector {
        self.system.state()
    }

    pub fn measure(&mut self, name: &str) -> dqm_core::Result<MeasurementEvent> {
        let event = self.system.measure(name)?.clone();
        self.actions.push(name.to_string());
        Ok(event)
    }

    pub fn view(&self, reveal_state: bool) -> SessionView {
        let predictions = self
            .system
            .predictions()
            .expect("state and measurements share a dimension");
        SessionView {
            id: self.id.clone(),
            scenario: self.scenario.name().to_string(),
            dim: self.scenario.dim(),
            seed: self.seed,
            created_at: self.created_at.clone(),
            measurements: self
                .scenario
                .measurements()
                .iter()
                .zip(predictions)
                .map(|(m, dist)| MeasurementView {
                    name: m.name().to_string(),
                    values: m.values(),
                    predictions: dist,
                })
                .collect(),
            history: self.history().to_vec(),
            state: reveal_state.then(|| self.state().clone()),
        }
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            id: self.id.clone(),
            scenario: (*self.scenario).clone(),
            seed: self.seed,
            created_at: self.created_at.clone(),
            actions: self.actions.clone(),
        }
    }

    /// Rebuilds a session by replaying its recorded actions.
    pub fn restore(record: SessionRecord) -> dqm_core::Result<Self> {
        let mut session = Session::new(record.id, Arc::new(record.scenario), record.seed, record.created_at)?;
        for action in &record.actions {
            session.measure(action)?;
        }
        Ok(session)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementView {
    pub name: String,
    /// Outcome values in the same order as `predictions`.
    pub values: Vec<f64>,
    pub predictions: OutcomeDistribution,
}

/// What clients see of a session. Predictions are recomputed on every read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub scenario: String,
    pub dim: usize,
    pub seed: u64,
    pub created_at: String,
    pub measurements: Vec<MeasurementView>,
    pub history: Vec<MeasurementEvent>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<StateVector>,
}

/// Persisted form of a session: enough to replay it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub created_at: String,
    pub actions: Vec<String>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub sessions: Vec<SessionRecord>,
}

pub type SessionHandle = Arc<RwLock<Session>>;

/// All live sessions. The map lock is held only to look up, insert or
/// remove; each session has its own lock.
#[derive(Debug, Default, Clone)]
pub struct SessionStore {
    sessions: Arc<RwLock<HashMap<String, SessionHandle>>>,
}

impl SessionStore {
    pub fn insert(&self, session: Session) -> SessionHandle {
        let id = session.id.clone();
        let handle = Arc::new(RwLock::new(session));
        self.sessions
            .write()
            .expect("store lock")
            .insert(id, Arc::clone(&handle));
        handle
    }

    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }

    pub fn remove(&self, id: &str) -> Option<SessionHandle> {
        self.sessions.write().expect("store lock").remove(id)
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Snapshot {
        let handles: Vec<SessionHandle> = self.sessions.read().expect("store lock").values().cloned().collect();
        let mut sessions: Vec<SessionRecord> = handles
            .iter()
            .map(|h| h.read().expect("session lock").record())
            .collect();
        sessions.sort_by(|a, b| (&a.created_at, &a.id).cmp(&(&b.created_at, &b.id)));
        Snapshot { sessions }
    }

    /// Replays every record; returns how many were restored.
    pub fn restore(&self, snapshot: Snapshot) -> dqm_core::Result<usize> {
        let count = snapshot.sessions.len();
        for record in snapshot.sessions {
            self.insert(Session::restore(record)?);
        }
        Ok(count)
    }
}
