use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{inner_product, StateVector, MAX_DIM};
use crate::measurement::Measurement;

/// Measurement whose eigenstates are the discrete-Fourier columns
/// `v_j[k] = exp(2πi·jk/n)/√n`, labeled `f0..f{n-1}` with values `0..n-1`.
pub fn fourier_basis(n: usize) -> Result<Measurement> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::Domain(format!(
            "Fourier basis needs 2 <= n <= {MAX_DIM}, got {n}"
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let basis = (0..n)
        .map(|j| {
            let amplitudes = (0..n)
                .map(|k| {
                    // Reduce jk mod n before scaling so the angle stays exact-ish for large n.
                    let angle = TAU * ((j * k) % n) as f64 / n as f64;
                    Complex64::from_polar(scale, angle)
                })
                .collect();
            StateVector::new(amplitudes).expect("finite")
        })
        .collect();
    let labels = (0..n).map(|j| format!("f{j}"));
    let values: Vec<f64> = (0..n).map(|j| j as f64).collect();
    Measurement::from_basis(format!("F{n}"), basis, labels, &values)
}

/// The standard basis `A` and the Fourier basis `B` for `n` outcomes, labeled
/// `a+/a-`, `b+/b-` (values ±1) for `n = 2` and `a1..an`, `b1..bn` (values
/// `1..n`) otherwise.
pub fn mub_pair(n: usize) -> Result<(Measurement, Measurement)> {
    let fourier = fourier_basis(n)?;
    let (a_labels, b_labels, values): (Vec<String>, Vec<String>, Vec<f64>) = if n == 2 {
        (
            vec!["a+".into(), "a-".into()],
            vec!["b+".into(), "b-".into()],
            vec![1.0, -1.0],
        )
    } else {
        (
            (1..=n).map(|k| format!("a{k}")).collect(),
            (1..=n).map(|k| format!("b{k}")).collect(),
            (1..=n).map(|k| k as f64).collect(),
        )
    };
    let a = Measurement::standard("A", a_labels, &values)?;
    let b = Measurement::from_basis("B", fourier.eigenstates(), b_labels, &values)?;
    Ok((a, b))
}

/// `max_{j,k} | |⟨u_j|v_k⟩|² - 1/n |` between the eigenstates of two measurements.
pub fn unbiasedness_deviation(m1: &Measurement, m2: &Measurement) -> Result<f64> {
    if m1.dim() != m2.dim() {
        return Err(Error::Dimension {
            expected: m1.dim(),
            found: m2.dim(),
        });
    }
    let target = 1.0 / m1.dim() as f64;
    let mut worst = 0.0_f64;
    for u in m1.outcomes() {
        for v in m2.outcomes() {
            let p = inner_product(&u.eigenstate, &v.eigenstate)?.norm_sqr();
            worst = worst.max((p - target).abs());
        }
    }
    Ok(worst)
}
