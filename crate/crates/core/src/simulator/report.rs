use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{MeasurementEvent, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeFrequency {
    pub label: String,
    pub count: u64,
    pub frequency: f64,
}

/// Outcome frequencies of one script step across all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFrequencies {
    pub step: usize,
    pub measurement: String,
    pub frequencies: Vec<OutcomeFrequency>,
}

/// How often re-measuring `measurement` after `intervening` changed its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidationStat {
    pub measurement: String,
    pub intervening: Vec<String>,
    pub opportunities: u64,
    pub invalidations: u64,
    pub rate: f64,
}

/// Total-variation distance between `probe` outcomes after `first, second`
/// and after `second, first`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEffect {
    pub first: String,
    pub second: String,
    pub probe: String,
    pub tv_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub dim: usize,
    pub mode: Mode,
    pub trials: usize,
    pub seed: u64,
    pub script: Vec<String>,
    pub events: Vec<Vec<MeasurementEvent>>,
    pub aggregate: Vec<StepFrequencies>,
    pub invalidation: Vec<InvalidationStat>,
    pub order_effect: Vec<OrderEffect>,
}

pub const CSV_HEADER: [&str; 6] = ["trial", "step", "measurement", "outcome", "value", "invalidated_count"];

impl RunReport {
    /// Total invalidations over all trials and steps.
    pub fn total_invalidations(&self) -> u64 {
        self.events.iter().flatten().map(|e| e.invalidated.len() as u64).sum()
    }

    /// Frequency of `label` at script step `step`.
    pub fn frequency(&self, step: usize, label: &str) -> Option<f64> {
        self.aggregate
            .get(step)?
            .frequencies
            .iter()
            .find(|f| f.label == label)
            .map(|f| f.frequency)
    }

    /// One row per event after a `# seed=…` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# seed={} scenario={} mode={} trials={}",
            self.seed, self.scenario, self.mode, self.trials
        )
        .map_err(csv_error)?;
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        writer.write_record(CSV_HEADER).map_err(csv_error)?;
        for (trial, events) in self.events.iter().enumerate() {
            for e in events {
                writer
                    .write_record([
                        trial.to_string(),
                        e.step_index.to_string(),
                        e.measurement.clone(),
                        e.outcome_label.clone(),
                        e.value.to_string(),
                        e.invalidated.len().to_string(),
                    ])
                    .map_err(csv_error)?;
            }
        }
        writer.flush().map_err(csv_error)
    }
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}
