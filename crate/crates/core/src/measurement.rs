//! Measurements as value-labeled orthonormal bases.
//!
//! A [`Measurement`] is defined spectrally: an ordered list of outcomes, each
//! carrying a final state (eigenstate), a label, and a real value. The
//! Hermitian operator is derived from it ([`build_operator`]) rather than the
//! other way around, though [`measurement_from_operator`] converts back for
//! non-degenerate spectra.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, inner_product, inner_unchecked, ComplexMatrix, StateVector, HERMITIAN_TOL, MAX_DIM, NORM_TOL,
    ORTHO_TOL,
};
use crate::random::RandomStream;

/// Probabilities at or below this are treated as impossible: [`collapse`]
/// refuses them and [`sample`] never selects them.
pub const IMPOSSIBLE_TOL: f64 = 1e-12;
/// Minimum eigenvalue separation accepted by [`measurement_from_operator`].
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub label: String,
    pub value: f64,
    pub eigenstate: StateVector,
}

impl Outcome {
    pub fn new(label: impl Into<String>, value: f64, eigenstate: StateVector) -> Self {
        Self {
            label: label.into(),
            value,
            eigenstate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    name: String,
    outcomes: Vec<Outcome>,
}

impl Measurement {
    /// Validates that the eigenstates form an orthonormal basis and the labels
    /// are unique. Eigenstates are stored phase-canonical.
    pub fn new(name: impl Into<String>, outcomes: Vec<Outcome>) -> Result<Self> {
        let name = name.into();
        let dim = outcomes
            .first()
            .map(|o| o.eigenstate.dim())
            .ok_or_else(|| Error::InvalidMeasurement(format!("{name}: no outcomes")))?;
        if dim > MAX_DIM {
            return Err(Error::TooLarge(dim));
        }
        if outcomes.len() != dim {
            return Err(Error::InvalidMeasurement(format!(
                "{name}: {} outcomes for a {dim}-dimensional space",
                outcomes.len()
            )));
        }
        let mut labels = HashSet::new();
        for o in &outcomes {
            if o.eigenstate.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: o.eigenstate.dim(),
                });
            }
            if !labels.insert(o.label.as_str()) {
                return Err(Error::InvalidMeasurement(format!(
                    "{name}: duplicate outcome label {:?}",
                    o.label
                )));
            }
            if !o.value.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        for (i, a) in outcomes.iter().enumerate() {
            for (j, b) in outcomes.iter().enumerate().skip(i) {
                let overlap = inner_product(&a.eigenstate, &b.eigenstate)?;
                let expected = if i == j { 1.0 } else { 0.0 };
                let tol = if i == j { NORM_TOL } else { ORTHO_TOL };
                if (overlap - Complex64::new(expected, 0.0)).norm() > tol {
                    return Err(Error::InvalidMeasurement(format!(
                        "{name}: eigenstates {:?} and {:?} are not orthonormal (overlap {overlap})",
                        a.label, b.label
                    )));
                }
            }
        }
        let outcomes = outcomes
            .into_iter()
            .map(|o| Outcome {
                eigenstate: o.eigenstate.canonical(),
                ..o
            })
            .collect();
        Ok(Self { name, outcomes })
    }

    /// Builds a measurement from parallel lists of basis vectors, labels and values.
    pub fn from_basis<S: Into<String>>(
        name: impl Into<String>,
        basis: Vec<StateVector>,
        labels: impl IntoIterator<Item = S>,
        values: &[f64],
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != basis.len() || values.len() != basis.len() {
            return Err(Error::InvalidMeasurement(format!(
                "{} basis vectors, {} labels, {} values",
                basis.len(),
                labels.len(),
                values.len()
            )));
        }
        let outcomes = basis
            .into_iter()
            .zip(labels)
            .zip(values)
            .map(|((v, l), &x)| Outcome::new(l, x, v))
            .collect();
        Self::new(name, outcomes)
    }

    /// Standard basis with the given labels and values.
    pub fn standard<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
        values: &[f64],
    ) -> Result<Self> {
        let dim = values.len();
        Self::from_basis(
            name,
            (0..dim).map(|k| StateVector::basis(dim, k)).collect(),
            labels,
            values,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn outcome(&self, index: usize) -> &Outcome {
        &self.outcomes[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o.label == label)
    }

    pub fn eigenstates(&self) -> Vec<StateVector> {
        self.outcomes.iter().map(|o| o.eigenstate.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.value).collect()
    }

    /// Same eigenstates and labels, new name and values.
    pub fn relabeled(&self, name: impl Into<String>, values: &[f64]) -> Result<Self> {
        Self::from_basis(
            name,
            self.eigenstates(),
            self.outcomes.iter().map(|o| o.label.clone()),
            values,
        )
    }
}

#[derive(Deserialize)]
struct RawMeasurement {
    name: String,
    outcomes: Vec<Outcome>,
}

impl<'de> Deserialize<'de> for Measurement {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMeasurement::deserialize(deserializer)?;
        Measurement::new(raw.name, raw.outcomes).map_err(serde::de::Error::custom)
    }
}

/// Matrix housing `Σ a_i |Ψ_i⟩⟨Ψ_i|`; Hermitian by construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let deviation = matrix.hermitian_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian(deviation));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        self.matrix.apply(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbability {
    pub label: String,
    pub probability: f64,
}

/// Probability of every outcome of one measurement, in declared outcome order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeDistribution {
    pub entries: Vec<OutcomeProbability>,
}

impl OutcomeDistribution {
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }

    pub fn probability(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.probability)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `|⟨to|from⟩|²`, clamped to `[0, 1]`.
pub fn transition_probability(from: &StateVector, to: &StateVector) -> Result<f64> {
    Ok(inner_product(to, from)?.norm_sqr().clamp(0.0, 1.0))
}

fn check_state(state: &StateVector, m: &Measurement) -> Result<()> {
    if state.dim() != m.dim() {
        return Err(Error::Dimension {
            expected: m.dim(),
            found: state.dim(),
        });
    }
    Ok(())
}

fn probabilities(state: &StateVector, m: &Measurement) -> Vec<f64> {
    m.outcomes
        .iter()
        .map(|o| {
            inner_unchecked(o.eigenstate.amplitudes(), state.amplitudes())
                .norm_sqr()
                .clamp(0.0, 1.0)
        })
        .collect()
}

/// Born-rule prediction for measuring `m` on `state`.
pub fn predict(state: &StateVector, m: &Measurement) -> Result<OutcomeDistribution> {
    check_state(state, m)?;
    let entries = probabilities(state, m)
        .into_iter()
        .zip(&m.outcomes)
        .map(|(probability, o)| OutcomeProbability {
            label: o.label.clone(),
            probability,
        })
        .collect();
    Ok(OutcomeDistribution { entries })
}

/// Post-measurement state for a given outcome: that outcome's eigenstate.
pub fn collapse(state: &StateVector, m: &Measurement, outcome_index: usize) -> Result<StateVector> {
    check_state(state, m)?;
    let outcome = m
        .outcomes
        .get(outcome_index)
        .ok_or_else(|| Error::InvalidMeasurement(format!("{}: no outcome with index {outcome_index}", m.name)))?;
    let p = inner_unchecked(outcome.eigenstate.amplitudes(), state.amplitudes()).norm_sqr();
    if p <= IMPOSSIBLE_TOL {
        return Err(Error::ImpossibleOutcome { index: outcome_index });
    }
    Ok(outcome.eigenstate.clone())
}

/// Draws an outcome by inverse CDF over outcomes in declared order and
/// returns its index with the collapsed state.
///
/// One uniform draw is consumed per call. Outcome `k` owns the half-open
/// interval `[c_{k-1}, c_k)` of the cumulative distribution, after
/// probabilities at or below [`IMPOSSIBLE_TOL`] are zeroed.
pub fn sample(state: &StateVector, m: &Measurement, rng: &mut RandomStream) -> Result<(usize, StateVector)> {
    check_state(state, m)?;
    let weights: Vec<f64> = probabilities(state, m)
        .into_iter()
        .map(|p| if p > IMPOSSIBLE_TOL { p } else { 0.0 })
        .collect();
    let index = inverse_cdf(&weights, rng.uniform());
    Ok((index, m.outcomes[index].eigenstate.clone()))
}

/// Index selected by `u ∈ [0, 1)` under (unnormalized, non-negative) `weights`.
pub(crate) fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut cumulative = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        cumulative += w;
        if w > 0.0 && target < cumulative {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// True iff the outcome eigenstates of `m1` and `m2` can be paired one-to-one
/// with `|⟨u|v⟩|² >= 1 - tol` for every pair.
pub fn are_compatible(m1: &Measurement, m2: &Measurement, tol: f64) -> Result<bool> {
    if m1.dim() != m2.dim() {
        return Err(Error::Dimension {
            expected: m1.dim(),
            found: m2.dim(),
        });
    }
    let n = m1.dim();
    let adjacency: Vec<Vec<usize>> = m1
        .outcomes
        .iter()
        .map(|a| {
            (0..n)
                .filter(|&j| {
                    inner_unchecked(a.eigenstate.amplitudes(), m2.outcomes[j].eigenstate.amplitudes()).norm_sqr()
                        >= 1.0 - tol
                })
                .collect()
        })
        .collect();
    Ok(perfect_matching_exists(&adjacency, n))
}

// Kuhn's augmenting-path bipartite matching.
fn perfect_matching_exists(adjacency: &[Vec<usize>], n: usize) -> bool {
    fn augment(u: usize, adjacency: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adjacency[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adjacency, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n];
    (0..adjacency.len()).all(|u| {
        let mut seen = vec![false; n];
        augment(u, adjacency, &mut seen, &mut owner)
    })
}

/// `Σ_i a_i |Ψ_i⟩⟨Ψ_i|` over the outcomes of `m`.
pub fn build_operator(m: &Measurement) -> HermitianOperator {
    let matrix =
        ComplexMatrix::weighted_projector_sum(&m.values(), &m.eigenstates()).expect("measurement outcomes share dim");
    HermitianOperator::new(matrix).expect("value-weighted projector sum is Hermitian")
}

/// Measurement whose outcomes are the eigenpairs of `op`, ascending by value.
///
/// Degenerate spectra (any two eigenvalues within [`DEGENERACY_TOL`]) are
/// rejected: a repeated value does not determine a unique final state.
pub fn measurement_from_operator<S: Into<String>>(
    name: impl Into<String>,
    op: &HermitianOperator,
    labels: impl IntoIterator<Item = S>,
) -> Result<Measurement> {
    let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
    if labels.len() != op.dim() {
        return Err(Error::Dimension {
            expected: op.dim(),
            found: labels.len(),
        });
    }
    let eigen = hermitian_eigen(op.matrix())?;
    for pair in eigen.eigenvalues.windows(2) {
        if pair[1] - pair[0] <= DEGENERACY_TOL {
            return Err(Error::DegenerateSpectrum(pair[0], pair[1]));
        }
    }
    Measurement::from_basis(name, eigen.eigenvectors, labels, &eigen.eigenvalues)
}

/// `⟨Ψ|A|Ψ⟩`, the real part of which is returned (the imaginary part vanishes
/// up to rounding for Hermitian `A`).
pub fn expectation(state: &StateVector, op: &HermitianOperator) -> Result<f64> {
    if state.dim() != op.dim() {
        return Err(Error::Dimension {
            expected: op.dim(),
            found: state.dim(),
        });
    }
    let image = op.apply(state)?;
    Ok(inner_product(state, &image)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn z_basis() -> Measurement {
        Measurement::standard("A", ["a+", "a-"], &[1.0, -1.0]).unwrap()
    }

    fn x_basis() -> Measurement {
        Measurement::from_basis(
            "B",
            vec![
                StateVector::from_real(&[H, H]).unwrap(),
                StateVector::from_real(&[-H, H]).unwrap(),
            ],
            ["b+", "b-"],
            &[1.0, -1.0],
        )
        .unwrap()
    }

    fn x_up() -> StateVector {
        StateVector::from_real(&[H, H]).unwrap()
    }

    #[test]
    fn construction_canonicalizes_eigenstates() {
        let b = x_basis();
        let expected = StateVector::from_real(&[H, -H]).unwrap();
        assert!(b.outcome(1).eigenstate.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_bases() {
        let not_orthogonal =
            Measurement::from_basis("M", vec![StateVector::basis(2, 0), x_up()], ["p", "q"], &[0.0, 1.0]);
        assert!(matches!(not_orthogonal, Err(Error::InvalidMeasurement(_))));

        let duplicate = Measurement::standard("M", ["p", "p"], &[0.0, 1.0]);
        assert!(matches!(duplicate, Err(Error::InvalidMeasurement(_))));

        let too_few = Measurement::new("M", vec![Outcome::new("p", 0.0, StateVector::basis(2, 0))]);
        assert!(matches!(too_few, Err(Error::InvalidMeasurement(_))));

        let unnormalized = Measurement::from_basis(
            "M",
            vec![StateVector::from_real(&[2.0, 0.0]).unwrap(), StateVector::basis(2, 1)],
            ["p", "q"],
            &[0.0, 1.0],
        );
        assert!(matches!(unnormalized, Err(Error::InvalidMeasurement(_))));
    }

    #[test]
    fn equal_values_are_allowed() {
        assert!(Measurement::standard("M", ["p", "q"], &[3.0, 3.0]).is_ok());
    }

    #[test]
    fn transition_probability_examples() {
        let z_up = StateVector::basis(2, 0);
        let z_down = StateVector::basis(2, 1);
        assert_abs_diff_eq!(transition_probability(&z_up, &z_up).unwrap(), 1.0);
        assert_eq!(transition_probability(&z_up, &z_down).unwrap(), 0.0);
        assert_abs_diff_eq!(transition_probability(&z_up, &x_up()).unwrap(), 0.5, epsilon = 1e-15);
        assert!(transition_probability(&z_up, &StateVector::basis(3, 0)).is_err());
    }

    #[test]
    fn predict_examples() {
        let a = z_basis();
        let d = predict(&StateVector::basis(2, 1), &a).unwrap();
        assert_eq!(d.probabilities(), vec![0.0, 1.0]);
        let d = predict(&x_up(), &a).unwrap();
        assert_abs_diff_eq!(d.probability("a+").unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probability("a-").unwrap(), 0.5, epsilon = 1e-15);
        assert!(predict(&StateVector::basis(3, 0), &a).is_err());
    }

    #[test]
    fn collapse_examples() {
        let a = z_basis();
        assert_eq!(collapse(&x_up(), &a, 0).unwrap(), StateVector::basis(2, 0));
        let once = collapse(&x_up(), &a, 1).unwrap();
        assert_eq!(collapse(&once, &a, 1).unwrap(), once);
        assert_eq!(
            collapse(&StateVector::basis(2, 0), &a, 1),
            Err(Error::ImpossibleOutcome { index: 1 })
        );
        assert!(collapse(&x_up(), &a, 2).is_err());
    }

    #[test]
    fn sampling_an_eigenstate_is_certain() {
        let b = x_basis();
        let mut rng = RandomStream::new(0);
        for _ in 0..1000 {
            let (k, s) = sample(&b.outcome(1).eigenstate, &b, &mut rng).unwrap();
            assert_eq!(k, 1);
            assert_eq!(s, b.outcome(1).eigenstate);
        }
    }

    #[test]
    fn sample_frequency_within_three_sigma() {
        let a = z_basis();
        let mut rng = RandomStream::new(42);
        let draws = 10_000;
        let hits = (0..draws)
            .filter(|_| sample(&x_up(), &a, &mut rng).unwrap().0 == 0)
            .count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 3.0 * (0.25 / draws as f64).sqrt(), "freq {freq}");
    }

    #[test]
    fn inverse_cdf_boundaries_are_closed_on_the_left() {
        let w = [0.25, 0.0, 0.75];
        assert_eq!(inverse_cdf(&w, 0.0), 0);
        assert_eq!(inverse_cdf(&w, 0.2499), 0);
        assert_eq!(inverse_cdf(&w, 0.25), 2);
        assert_eq!(inverse_cdf(&w, 0.999_999), 2);
        assert_eq!(inverse_cdf(&[0.0, 1.0], 0.0), 1);
    }

    #[test]
    fn compatibility_examples() {
        let a = z_basis();
        let b = x_basis();
        assert!(are_compatible(&a, &a, 1e-9).unwrap());
        assert!(!are_compatible(&a, &b, 1e-9).unwrap());
        assert!(!are_compatible(&b, &a, 1e-9).unwrap());
        let doubled = a.relabeled("A2", &[2.0, -2.0]).unwrap();
        assert!(are_compatible(&a, &doubled, 1e-9).unwrap());
        // Same final states in a different order still match.
        let swapped = Measurement::from_basis(
            "S",
            vec![StateVector::basis(2, 1), StateVector::basis(2, 0)],
            ["s0", "s1"],
            &[0.0, 1.0],
        )
        .unwrap();
        assert!(are_compatible(&a, &swapped, 1e-9).unwrap());
        let three = Measurement::standard("C", ["0", "1", "2"], &[0.0, 1.0, 2.0]).unwrap();
        assert!(are_compatible(&a, &three, 1e-9).is_err());
    }

    #[test]
    fn build_operator_examples() {
        let op = build_operator(&z_basis());
        assert_eq!(*op.matrix(), ComplexMatrix::diagonal(&[1.0, -1.0]));
        let op = build_operator(&x_basis());
        let pauli_x = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(op.matrix().max_abs_diff(&pauli_x) < 1e-15);
        for o in x_basis().outcomes() {
            let image = op.apply(&o.eigenstate).unwrap();
            assert!(image.max_abs_diff(&o.eigenstate.scaled(Complex64::new(o.value, 0.0))) < 1e-9);
        }
    }

    #[test]
    fn operator_round_trip() {
        let b = x_basis();
        let m = measurement_from_operator("B", &build_operator(&b), ["b-", "b+"]).unwrap();
        assert_abs_diff_eq!(m.outcome(0).value, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.outcome(1).value, 1.0, epsilon = 1e-14);
        assert!(m.outcome(0).eigenstate.max_abs_diff(&b.outcome(1).eigenstate) < 1e-14);
        assert!(are_compatible(&m, &b, 1e-12).unwrap());

        let diag = HermitianOperator::new(ComplexMatrix::diagonal(&[5.0, 7.0])).unwrap();
        let m = measurement_from_operator("D", &diag, ["five", "seven"]).unwrap();
        assert_eq!(m.values(), vec![5.0, 7.0]);
        assert_eq!(m.outcome(0).eigenstate, StateVector::basis(2, 0));
        assert!(build_operator(&m).matrix().max_abs_diff(diag.matrix()) < 1e-8);
    }

    #[test]
    fn degenerate_spectrum_is_rejected() {
        let op = HermitianOperator::new(ComplexMatrix::diagonal(&[1.0, 1.0 + 1e-9, 3.0])).unwrap();
        assert!(matches!(
            measurement_from_operator("D", &op, ["a", "b", "c"]),
            Err(Error::DegenerateSpectrum(_, _))
        ));
        let op = HermitianOperator::new(ComplexMatrix::diagonal(&[1.0, 2.0])).unwrap();
        assert!(matches!(
            measurement_from_operator("D", &op, ["a"]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn operator_requires_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(HermitianOperator::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn expectation_examples() {
        let a = z_basis();
        let op = build_operator(&a);
        assert_abs_diff_eq!(expectation(&StateVector::basis(2, 1), &op).unwrap(), -1.0);
        assert_abs_diff_eq!(expectation(&x_up(), &op).unwrap(), 0.0, epsilon = 1e-15);
        let op = HermitianOperator::new(ComplexMatrix::diagonal(&[2.0, 5.0])).unwrap();
        let s = StateVector::from_real(&[0.36_f64.sqrt(), 0.64_f64.sqrt()]).unwrap();
        assert_abs_diff_eq!(expectation(&s, &op).unwrap(), 3.92, epsilon = 1e-12);
        assert!(expectation(&StateVector::basis(3, 0), &op).is_err());
    }

    #[test]
    fn measurement_json_round_trip_validates() {
        let json = serde_json::to_string(&x_basis()).unwrap();
        let back: Measurement = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x_basis());
        let bad = json.replace("b-", "b+");
        assert!(serde_json::from_str::<Measurement>(&bad).is_err());
    }
}
