use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_unitary, ComplexMatrix};

/// Largest order searched exhaustively (`2^25` sign matrices).
pub const MAX_SEARCH_DIM: usize = 5;
const ORTHOGONALITY_TOL: f64 = 1e-9;

type SignMatrix = Vec<Vec<i8>>;

/// Result of enumerating every `n × n` matrix with entries `±1/√n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub n: usize,
    /// `2^(n²)`.
    pub candidates: u64,
    /// Sign matrices whose scaled version is orthogonal.
    pub orthogonal_count: u64,
    /// Classes under row/column negation and permutation.
    pub equivalence_classes: usize,
    pub feasible: bool,
    /// Canonical sign pattern of each class.
    pub representatives: Vec<SignMatrix>,
}

/// Row `r` of candidate `index` as an `n`-bit mask; bit set means `-1`.
fn row_mask(index: u64, n: usize, r: usize) -> u64 {
    (index >> (r * n)) & ((1 << n) - 1)
}

fn rows_orthogonal(index: u64, n: usize) -> bool {
    for i in 0..n {
        let ri = row_mask(index, n, i);
        for j in (i + 1)..n {
            let disagreements = (ri ^ row_mask(index, n, j)).count_ones() as usize;
            // dot = agreements - disagreements
            if 2 * disagreements != n {
                return false;
            }
        }
    }
    true
}

fn sign_matrix(index: u64, n: usize) -> SignMatrix {
    (0..n)
        .map(|r| {
            let mask = row_mask(index, n, r);
            (0..n).map(|c| if mask >> c & 1 == 1 { -1 } else { 1 }).collect()
        })
        .collect()
}

fn scaled(signs: &SignMatrix) -> ComplexMatrix {
    let scale = 1.0 / (signs.len() as f64).sqrt();
    let rows: Vec<Vec<f64>> = signs
        .iter()
        .map(|r| r.iter().map(|&s| f64::from(s) * scale).collect())
        .collect();
    ComplexMatrix::from_real_rows(&rows).expect("square, finite")
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                extend(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Lexicographically smallest matrix reachable by permuting and negating
/// rows and columns.
///
/// For a fixed column arrangement, negating each row so it starts with `+1`
/// and sorting the rows is canonical for the row action, so only column
/// permutations and negations need enumerating.
fn canonical_form(signs: &SignMatrix, column_orders: &[Vec<usize>]) -> SignMatrix {
    let n = signs.len();
    let mut best: Option<SignMatrix> = None;
    for order in column_orders {
        for negation in 0u32..(1 << n) {
            let mut m: SignMatrix = signs
                .iter()
                .map(|row| {
                    order
                        .iter()
                        .enumerate()
                        .map(|(c, &src)| if negation >> c & 1 == 1 { -row[src] } else { row[src] })
                        .collect()
                })
                .collect();
            for row in m.iter_mut() {
                if row[0] < 0 {
                    row.iter_mut().for_each(|x| *x = -*x);
                }
            }
            m.sort();
            if best.as_ref().is_none_or(|b| m < *b) {
                best = Some(m);
            }
        }
    }
    best.expect("at least one column order")
}

/// Enumerates all `2^(n²)` sign matrices, keeps those that are orthogonal
/// once scaled by `1/√n`, and groups them into equivalence classes.
///
/// Each candidate passes an exact integer test (every pair of rows agrees
/// in exactly `n/2` places) and survivors are confirmed in floating point
/// with `m·mᵀ = I` to `1e-9`.
pub fn real_equal_modulus_search(n: usize) -> Result<SearchReport> {
    if !(2..=MAX_SEARCH_DIM).contains(&n) {
        return Err(Error::Domain(format!(
            "exhaustive search supports 2 <= n <= {MAX_SEARCH_DIM}, got {n}"
        )));
    }
    let candidates = 1u64 << (n * n);
    let orthogonal: Vec<SignMatrix> = (0..candidates)
        .into_par_iter()
        .filter(|&index| rows_orthogonal(index, n))
        .map(|index| sign_matrix(index, n))
        .filter(|signs| is_unitary(&scaled(signs), ORTHOGONALITY_TOL).unwrap_or(false))
        .collect();

    let column_orders = permutations(n);
    let classes: BTreeSet<SignMatrix> = orthogonal
        .par_iter()
        .map(|m| canonical_form(m, &column_orders))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    Ok(SearchReport {
        n,
        candidates,
        orthogonal_count: orthogonal.len() as u64,
        equivalence_classes: classes.len(),
        feasible: !orthogonal.is_empty(),
        representatives: classes.into_iter().collect(),
    })
}
