//! Executable versions of the structural arguments for a complex phase space:
//! conditional-probability tables and classical mixtures, Fourier (mutually
//! unbiased) bases, the search for real equal-modulus orthogonal matrices,
//! phase retrieval from two moduli distributions, and the spin half-angle.

mod fourier;
mod phase;
mod real_search;
mod spin;
mod table;

pub use fourier::{fourier_basis, mub_pair, unbiasedness_deviation};
pub use phase::{
    phase_residual, planted_problem, retrieve_phases, PhaseRetrievalProblem, PhaseSolution, MAX_PHASE_DIM,
    PHASE_CONVERGENCE_TOL,
};
pub use real_search::{real_equal_modulus_search, SearchReport, MAX_SEARCH_DIM};
pub use spin::{spin_state, spin_sweep, spin_transition, spin_transition_to_down, SpinRow};
pub use table::{
    classical_mixture_scan, conditional_table, mixture_row, superposition_probability, table_for_mub_pair,
    ConditionalTable, ScanReport, DETERMINISM_TOL,
};
