//! Reference computations written directly on `Complex64` slices, sharing no
//! code with `dqm-core`, for use as test oracles.

pub use num_complex::Complex64;

pub type Vector = Vec<Complex64>;
/// Orthonormal basis as a list of vectors; vector `k` is outcome `k`.
pub type Basis = Vec<Vector>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(v: &[f64]) -> Vector {
    v.iter().map(|&x| c(x, 0.0)).collect()
}

/// `Σ conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).fold(c(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// `|⟨to|from⟩|²`.
pub fn born(from: &[Complex64], to: &[Complex64]) -> f64 {
    inner(to, from).norm_sqr()
}

pub fn standard_basis(n: usize) -> Basis {
    (0..n)
        .map(|k| (0..n).map(|i| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

/// `v_j[k] = exp(2πi·jk/n)/√n`.
pub fn dft_basis(n: usize) -> Basis {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| Complex64::from_polar(scale, 2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64))
                .collect()
        })
        .collect()
}

/// The two-outcome pair: standard basis and the basis rotated by 45°.
pub fn table1_bases() -> (Basis, Basis) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (standard_basis(2), vec![real(&[h, h]), real(&[h, -h])])
}

/// Conditional probabilities for the two-outcome pair written out by hand,
/// rows and columns ordered `a+, a-, b+, b-`.
pub fn table1_by_hand() -> [[f64; 4]; 4] {
    [
        [1.0, 0.0, 0.5, 0.5],
        [0.0, 1.0, 0.5, 0.5],
        [0.5, 0.5, 1.0, 0.0],
        [0.5, 0.5, 0.0, 1.0],
    ]
}

/// `|·|²` of every entry of `U` (rows indexed by `a`, columns by `b`).
pub fn overlap_moduli(a: &Basis, b: &Basis) -> Vec<Vec<f64>> {
    a.iter().map(|u| b.iter().map(|v| born(v, u)).collect()).collect()
}

/// Preparation for the path enumerator.
#[derive(Debug, Clone)]
pub enum Preparation {
    Pure(Vector),
    /// The Haar average of pure states, i.e. the maximally mixed state,
    /// realised as an equal mixture of standard basis vectors.
    HaarAverage(usize),
}

impl Preparation {
    fn components(&self) -> Vec<(f64, Vector)> {
        match self {
            Preparation::Pure(v) => vec![(1.0, v.clone())],
            Preparation::HaarAverage(n) => standard_basis(*n).into_iter().map(|v| (1.0 / *n as f64, v)).collect(),
        }
    }
}

/// One complete outcome history with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub outcomes: Vec<usize>,
    pub probability: f64,
}

/// Every outcome sequence of `script` (indices into `bases`) under Born
/// sampling with collapse, with its exact chain-rule probability.
/// Zero-probability branches are dropped.
pub fn enumerate_paths(bases: &[Basis], script: &[usize], preparation: &Preparation) -> Vec<Path> {
    fn recurse(
        bases: &[Basis],
        script: &[usize],
        state: &[Complex64],
        weight: f64,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Path>,
    ) {
        let Some((&m, rest)) = script.split_first() else {
            out.push(Path {
                outcomes: prefix.clone(),
                probability: weight,
            });
            return;
        };
        for (k, v) in bases[m].iter().enumerate() {
            let p = born(state, v);
            if p * weight <= 0.0 {
                continue;
            }
            prefix.push(k);
            recurse(bases, rest, v, weight * p, prefix, out);
            prefix.pop();
        }
    }

    let mut paths: Vec<Path> = Vec::new();
    for (w, psi) in preparation.components() {
        let mut branch = Vec::new();
        recurse(bases, script, &psi, w, &mut Vec::new(), &mut branch);
        for path in branch {
            match paths.iter_mut().find(|p| p.outcomes == path.outcomes) {
                Some(existing) => existing.probability += path.probability,
                None => paths.push(path),
            }
        }
    }
    paths
}

/// Outcome distribution at each step.
pub fn step_marginals(bases: &[Basis], script: &[usize], paths: &[Path]) -> Vec<Vec<f64>> {
    script
        .iter()
        .enumerate()
        .map(|(step, &m)| {
            let mut dist = vec![0.0; bases[m].len()];
            for path in paths {
                dist[path.outcomes[step]] += path.probability;
            }
            dist
        })
        .collect()
}

/// Probability that step `step` returns a different outcome than the most
/// recent earlier step of the same measurement; `None` if there is none.
pub fn change_probability(script: &[usize], paths: &[Path], step: usize) -> Option<f64> {
    let previous = script[..step].iter().rposition(|&m| m == script[step])?;
    Some(
        paths
            .iter()
            .filter(|p| p.outcomes[step] != p.outcomes[previous])
            .map(|p| p.probability)
            .sum(),
    )
}

/// Standard error of a binomial proportion.
pub fn binomial_sigma(p: f64, trials: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Two-sided z bound such that `comparisons` simultaneous tests together
/// have the false-alarm rate of a single `sigmas`-sigma test (Bonferroni).
pub fn family_z(sigmas: f64, comparisons: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let standard = Normal::standard();
    let single_tail = standard.cdf(-sigmas);
    -standard.inverse_cdf(single_tail / comparisons.max(1) as f64)
}

/// Number of `n × n` matrices with `±1` entries whose rows are pairwise
/// orthogonal, by direct floating-point dot products.
pub fn count_sign_orthogonal(n: usize) -> u64 {
    let mut count = 0;
    for index in 0u64..(1 << (n * n)) {
        let entry = |r: usize, col: usize| if index >> (r * n + col) & 1 == 1 { -1.0 } else { 1.0 };
        let ok = (0..n).all(|i| ((i + 1)..n).all(|j| (0..n).map(|k| entry(i, k) * entry(j, k)).sum::<f64>() == 0.0));
        if ok {
            count += 1;
        }
    }
    count
}
