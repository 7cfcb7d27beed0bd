//! Flux-qubit circulator coupling three transmission-line resonators, and
//! gate routing on a Kagome lattice of such couplers.

pub mod circulator;
pub mod cli;
pub mod lattice;
pub mod minimizer;
pub mod model;
pub mod potential;
pub mod qdynamics;

/// Float formatting used by every CSV writer.
pub fn format_float(x: f64) -> String {
    format!("{:.16e}", x)
}
