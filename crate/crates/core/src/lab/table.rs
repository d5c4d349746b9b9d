use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lab::fourier::mub_pair;
use crate::linalg::{normalize, StateVector};
use crate::measurement::{predict, transition_probability, Measurement};

/// Mixtures whose B-outcome probability comes this close to 1 count as deterministic.
pub const DETERMINISM_TOL: f64 = 1e-12;
const ROW_SUM_TOL: f64 = 1e-9;

/// `p[i][j] = P(col_j | row_i)`: the probability of landing in column
/// outcome `j` when starting from the final state of row outcome `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub p: Vec<Vec<f64>>,
}

impl ConditionalTable {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, p: Vec<Vec<f64>>) -> Result<Self> {
        let table = Self {
            row_labels,
            col_labels,
            p,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.len() != self.row_labels.len() {
            return Err(Error::Table(format!(
                "{} rows for {} row labels",
                self.p.len(),
                self.row_labels.len()
            )));
        }
        for (label, row) in self.row_labels.iter().zip(&self.p) {
            if row.len() != self.col_labels.len() {
                return Err(Error::Table(format!(
                    "row {label:?} has {} entries for {} columns",
                    row.len(),
                    self.col_labels.len()
                )));
            }
            if row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::Table(format!("row {label:?} has an entry outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.row_labels.iter().position(|l| l == row)?;
        let j = self.col_labels.iter().position(|l| l == col)?;
        Some(self.p[i][j])
    }

    pub fn rows(&self) -> usize {
        self.p.len()
    }
}

/// Conditional table over the outcomes of `a` followed by those of `b`, on
/// both axes. Each row splits into two blocks (the `a` columns and the `b`
/// columns) and each block sums to one.
pub fn conditional_table(a: &Measurement, b: &Measurement) -> Result<ConditionalTable> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let outcomes: Vec<_> = a.outcomes().iter().chain(b.outcomes()).collect();
    let labels: Vec<String> = outcomes.iter().map(|o| o.label.clone()).collect();
    let mut p = Vec::with_capacity(outcomes.len());
    for from in &outcomes {
        let row = outcomes
            .iter()
            .map(|to| transition_probability(&from.eigenstate, &to.eigenstate))
            .collect::<Result<Vec<f64>>>()?;
        p.push(row);
    }
    ConditionalTable::new(labels.clone(), labels, p)
}

/// `2n × 2n` table for the standard basis against the Fourier basis: a
/// Kronecker delta within each basis and `1/n` across them.
pub fn table_for_mub_pair(n: usize) -> Result<ConditionalTable> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 outcomes, got {n}")));
    }
    let (a, b) = mub_pair(n)?;
    conditional_table(&a, &b)
}

/// Outcome of scanning classical mixtures `λ·row(a⁺) + (1-λ)·row(a⁻)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub grid_steps: usize,
    /// Largest B-outcome probability over every mixture on the grid.
    pub max_b_probability: f64,
    /// Smallest λ attaining `max_b_probability`.
    pub argmax_lambda: f64,
    pub reaches_determinism: bool,
    /// `P(b⁺)` for the superposition `(a⁺ + a⁻)/√2` of final states.
    pub quantum_superposition_probability: f64,
    pub quantum_reaches_determinism: bool,
}

/// `λ·row(a⁺) + (1-λ)·row(a⁻)` over all columns of a two-outcome pair table.
pub fn mixture_row(table: &ConditionalTable, lambda: f64) -> Result<Vec<f64>> {
    check_pair_table(table)?;
    Ok(table.p[0]
        .iter()
        .zip(&table.p[1])
        .map(|(plus, minus)| lambda * plus + (1.0 - lambda) * minus)
        .collect())
}

fn check_pair_table(table: &ConditionalTable) -> Result<()> {
    table.validate()?;
    if table.rows() != 4 || table.col_labels.len() != 4 {
        return Err(Error::Table(format!(
            "expected the 4x4 table of two two-outcome measurements, got {}x{}",
            table.rows(),
            table.col_labels.len()
        )));
    }
    for (label, row) in table.row_labels.iter().zip(&table.p) {
        for block in [&row[..2], &row[2..]] {
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Table(format!(
                    "row {label:?} has a measurement block summing to {sum}"
                )));
            }
        }
    }
    Ok(())
}

/// Scans `grid_steps` uniformly spaced `λ ∈ [0, 1]` and reports the most
/// certain B prediction any classical mixture of the two A rows can make.
pub fn classical_mixture_scan(table: &ConditionalTable, grid_steps: usize) -> Result<ScanReport> {
    check_pair_table(table)?;
    if grid_steps < 2 {
        return Err(Error::Domain(format!("grid needs at least 2 points, got {grid_steps}")));
    }
    let mut best = f64::NEG_INFINITY;
    let mut argmax = 0.0;
    for i in 0..grid_steps {
        let lambda = i as f64 / (grid_steps - 1) as f64;
        let row = mixture_row(table, lambda)?;
        let b_max = row[2].max(row[3]);
        if b_max > best {
            best = b_max;
            argmax = lambda;
        }
    }
    let (a, b) = mub_pair(2)?;
    let quantum = superposition_probability(&a, &b, 0)?;
    Ok(ScanReport {
        grid_steps,
        max_b_probability: best,
        argmax_lambda: argmax,
        reaches_determinism: best >= 1.0 - DETERMINISM_TOL,
        quantum_superposition_probability: quantum,
        quantum_reaches_determinism: quantum >= 1.0 - DETERMINISM_TOL,
    })
}

/// Probability of outcome `b_index` of `b` for the equal-weight
/// superposition of all final states of `a`.
pub fn superposition_probability(a: &Measurement, b: &Measurement, b_index: usize) -> Result<f64> {
    let mut sum = vec![num_complex::Complex64::new(0.0, 0.0); a.dim()];
    for o in a.outcomes() {
        for (s, z) in sum.iter_mut().zip(o.eigenstate.amplitudes()) {
            *s += z;
        }
    }
    let state = normalize(&StateVector::new(sum)?)?;
    Ok(predict(&state, b)?.entries[b_index].probability)
}
