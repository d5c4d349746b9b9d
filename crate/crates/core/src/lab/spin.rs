use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::measurement::transition_probability;

/// Phase-space vector for a spin pointing at `theta_physical_degrees` in the
/// Z–X plane: the real unit vector at half that angle from `z↑`.
///
/// The vector is deliberately not phase-canonicalized so that a full
/// physical turn shows up as its negation.
pub fn spin_state(theta_physical_degrees: f64) -> StateVector {
    let half = theta_physical_degrees.to_radians() / 2.0;
    StateVector::from_real(&[half.cos(), half.sin()]).expect("finite angle")
}

/// `P(z↑)` for a spin at `theta_physical_degrees`; equals `cos²(θ/2)`.
pub fn spin_transition(theta_physical_degrees: f64) -> f64 {
    transition_probability(&spin_state(theta_physical_degrees), &StateVector::basis(2, 0))
        .expect("both two-dimensional")
}

/// `P(z↓)` for a spin at `theta_physical_degrees`.
pub fn spin_transition_to_down(theta_physical_degrees: f64) -> f64 {
    transition_probability(&spin_state(theta_physical_degrees), &StateVector::basis(2, 1))
        .expect("both two-dimensional")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinRow {
    pub theta_physical_deg: f64,
    pub phase_space_angle_deg: f64,
    pub psi_z_up: f64,
    pub psi_z_down: f64,
    pub p_z_up: f64,
}

/// Rows for `θ = 0, step, 2·step, …` up to 720°.
pub fn spin_sweep(step_degrees: f64) -> Result<Vec<SpinRow>> {
    if !(step_degrees > 0.0 && step_degrees <= 90.0) {
        return Err(Error::Domain(format!(
            "step must be in (0, 90] degrees, got {step_degrees}"
        )));
    }
    let count = (720.0 / step_degrees + 1e-9).floor() as usize;
    Ok((0..=count)
        .map(|i| {
            let theta = i as f64 * step_degrees;
            let psi = spin_state(theta);
            SpinRow {
                theta_physical_deg: theta,
                phase_space_angle_deg: theta / 2.0,
                psi_z_up: psi[0].re,
                psi_z_down: psi[1].re,
                p_z_up: spin_transition(theta),
            }
        })
        .collect())
}
