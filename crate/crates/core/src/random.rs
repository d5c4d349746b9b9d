//! Seeded random streams and Haar-distributed states and unitaries.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::linalg::{normalize, ComplexMatrix, StateVector};

/// Explicit, seeded source of randomness.
///
/// Every randomized operation takes one of these by `&mut`; nothing in the
/// crate draws from ambient entropy. Independent streams for parallel work
/// come from [`RandomStream::substream`].
#[derive(Debug, Clone)]
pub struct RandomStream(ChaCha20Rng);

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha20Rng::seed_from_u64(seed))
    }

    /// Stream `index` of the generator keyed by `seed`. Substreams of one
    /// seed never overlap; `substream(seed, 0)` is the same as `new(seed)`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self(rng)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform angle in `[0, 2π)`.
    pub fn angle(&mut self) -> f64 {
        self.uniform() * std::f64::consts::TAU
    }

    pub fn below(&mut self, bound: usize) -> usize {
        self.0.random_range(0..bound)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.random()
    }
}

fn complex_gaussian(rng: &mut RandomStream) -> Complex64 {
    Complex64::new(rng.standard_normal(), rng.standard_normal())
}

/// Unit state drawn from the unitarily invariant (Haar) measure.
pub fn haar_state(dim: usize, rng: &mut RandomStream) -> StateVector {
    loop {
        let raw =
            StateVector::new((0..dim).map(|_| complex_gaussian(rng)).collect()).expect("gaussian samples are finite");
        if let Ok(v) = normalize(&raw) {
            return v;
        }
    }
}

/// Haar-random unitary: Gram–Schmidt on a complex Ginibre matrix, column by column.
pub fn haar_unitary(dim: usize, rng: &mut RandomStream) -> ComplexMatrix {
    let columns = haar_basis(dim, rng);
    ComplexMatrix::from_columns(&columns).expect("columns share dim")
}

/// Orthonormal basis drawn from the Haar measure. Vectors are not phase-canonicalized.
pub fn haar_basis(dim: usize, rng: &mut RandomStream) -> Vec<StateVector> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
        // Modified Gram–Schmidt, twice for numerical orthogonality.
        for _ in 0..2 {
            for b in &basis {
                let overlap: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vk, bk) in v.iter_mut().zip(b) {
                    *vk -= overlap * bk;
                }
            }
        }
        let norm = v.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        basis.push(v.into_iter().map(|z| z / norm).collect());
    }
    basis
        .into_iter()
        .map(|v| StateVector::new(v).expect("finite"))
        .collect()
}
