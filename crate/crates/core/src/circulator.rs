//! Routing rule of the three-port coupler and its verification.
//!
//! Weakening junction `k` (with positive chirality) couples ports `k` and
//! `k+1`; the port between the two strong junctions stays dark.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::minimizer::{find_right_well, MinimizerError, MinimumRecord};
use crate::model::{BiasCurrents, ConfigError, CouplerConfig};
use crate::potential::{reduced_bias_current_support, PotentialError};

/// Bias magnitude of a single resonator photon relative to the loop critical
/// current (about 14 pA against 500 nA).
pub const DEFAULT_INPUT_CURRENT: f64 = 3e-5;
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CirculatorError {
    #[error("port index {0} outside 1..=3")]
    InvalidIndex(usize),
    #[error("coupler has no weakened junction")]
    NoWeakJunction,
    #[error("the routing rule needs a three-port coupler, got {0} ports")]
    NotThreePort(usize),
    #[error("circulation violated at dark port {dark_port}: residual {residual:e}, phi_minus {phi_minus:e}")]
    ViolatedCirculation { dark_port: usize, residual: f64, phi_minus: f64 },
    #[error("scan range [{lo}, {hi}] must contain f = 0.5 and have at least 2 steps")]
    InvalidRange { lo: f64, hi: f64 },
    #[error(transparent)]
    Minimizer(#[from] MinimizerError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Sense of circulation, set by the direction of the loop flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Chirality {
    Positive,
    Negative,
}

impl From<Chirality> for i8 {
    fn from(c: Chirality) -> i8 {
        match c {
            Chirality::Positive => 1,
            Chirality::Negative => -1,
        }
    }
}

impl TryFrom<i8> for Chirality {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            1 => Ok(Chirality::Positive),
            -1 => Ok(Chirality::Negative),
            other => Err(format!("chirality must be +1 or -1, got {other}")),
        }
    }
}

/// Ordered resonator pair coupled when junction `weak` is reduced.
pub fn select_pair(weak: usize, chirality: Chirality) -> Result<(usize, usize), CirculatorError> {
    if !(1..=3).contains(&weak) {
        return Err(CirculatorError::InvalidIndex(weak));
    }
    let next = weak % 3 + 1;
    Ok(match chirality {
        Chirality::Positive => (weak, next),
        Chirality::Negative => (next, weak),
    })
}

/// Junction to weaken so that ports `a` and `b` are coupled, in either order.
pub fn weak_index_for_pair(a: usize, b: usize) -> Result<usize, CirculatorError> {
    for p in [a, b] {
        if !(1..=3).contains(&p) {
            return Err(CirculatorError::InvalidIndex(p));
        }
    }
    if a == b {
        return Err(CirculatorError::InvalidIndex(a));
    }
    Ok((1..=3).find(|&k| BTreeSet::from([k, k % 3 + 1]) == BTreeSet::from([a, b])).expect("three ports"))
}

pub fn dark_port(weak: usize) -> Result<usize, CirculatorError> {
    if !(1..=3).contains(&weak) {
        return Err(CirculatorError::InvalidIndex(weak));
    }
    Ok((weak + 1) % 3 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirculationReport {
    pub weak_index: usize,
    pub selected_pair: (usize, usize),
    pub dark_port: usize,
    /// Port current into the dark port implied by the junction currents.
    pub residual_current_into_dark_port: f64,
    pub minimum_used: MinimumRecord,
    pub chirality: Chirality,
    pub input_current: f64,
}

/// Drives `u_in` into the first port of the selected pair and out of the second,
/// locates the right-well minimum and checks that no current reaches the dark port.
pub fn verify_circulation(
    cfg: &CouplerConfig,
    u_in: f64,
    chirality: Chirality,
) -> Result<CirculationReport, CirculatorError> {
    if cfg.n_ports() != 3 {
        return Err(CirculatorError::NotThreePort(cfg.n_ports()));
    }
    let weak = cfg.weak_index().ok_or(CirculatorError::NoWeakJunction)?;
    let (l, m) = select_pair(weak, chirality)?;
    let dark = dark_port(weak)?;
    let bias = BiasCurrents::pair(3, l, m, u_in)?;
    let minimum = find_right_well(cfg, &bias)?;
    let residual = minimum.kcl_port_current(dark);
    let phi_minus = minimum.position.minus;
    if residual.abs() >= RESIDUAL_TOL || phi_minus.abs() >= RESIDUAL_TOL {
        return Err(CirculatorError::ViolatedCirculation { dark_port: dark, residual, phi_minus });
    }
    Ok(CirculationReport {
        weak_index: weak,
        selected_pair: (l, m),
        dark_port: dark,
        residual_current_into_dark_port: residual,
        minimum_used: minimum,
        chirality,
        input_current: u_in,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub frustration: f64,
    pub phi_minus_min: Option<f64>,
    pub residual: Option<f64>,
    /// `e_w (φ+,min + φ-,min)`, the slope of `U_min` in the output current.
    pub slope: Option<f64>,
    pub holds: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessScan {
    pub input_current: f64,
    pub rows: Vec<RobustnessRow>,
    pub first_failure: Option<f64>,
}

pub fn scan_frustrations(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

fn robustness_row(cfg: &CouplerConfig, f: f64, u_in: f64, chirality: Chirality) -> RobustnessRow {
    let outcome = cfg
        .with_frustration(f)
        .map_err(CirculatorError::from)
        .and_then(|c| verify_circulation(&c, u_in, chirality));
    match outcome {
        Ok(report) => {
            let pos = report.minimum_used.position;
            let slope = cfg.current_unit_ratio() * (pos.plus + pos.minus);
            let holds = slope > 0.0;
            RobustnessRow {
                frustration: f,
                phi_minus_min: Some(pos.minus),
                residual: Some(report.residual_current_into_dark_port),
                slope: Some(slope),
                holds,
                failure: (!holds).then(|| "non-positive U_min slope".to_string()),
            }
        }
        Err(e) => RobustnessRow {
            frustration: f,
            phi_minus_min: None,
            residual: None,
            slope: None,
            holds: false,
            failure: Some(e.to_string()),
        },
    }
}

/// Re-verifies circulation over a range of loop fluxes around `f = 0.5`.
/// Points are evaluated in parallel; rows keep the scan order.
pub fn robustness_scan(
    cfg: &CouplerConfig,
    f_range: (f64, f64),
    steps: usize,
    u_in: f64,
    chirality: Chirality,
) -> Result<RobustnessScan, CirculatorError> {
    let (lo, hi) = f_range;
    if !(lo <= 0.5 && 0.5 <= hi && steps >= 2 && lo >= 0.0 && hi < 1.0) {
        return Err(CirculatorError::InvalidRange { lo, hi });
    }
    let rows: Vec<RobustnessRow> = scan_frustrations(lo, hi, steps)
        .into_par_iter()
        .map(|f| robustness_row(cfg, f, u_in, chirality))
        .collect();
    let first_failure = rows.iter().find(|r| !r.holds).map(|r| r.frustration);
    Ok(RobustnessScan { input_current: u_in, rows, first_failure })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectivityReport {
    pub n: usize,
    pub weak_index: usize,
    pub selective: bool,
    pub current_support_size: usize,
    pub support: BTreeSet<usize>,
}

/// Whether weakening one junction of an `n`-port loop couples exactly two ports.
pub fn impossibility_check(n: usize, weak: usize) -> Result<SelectivityReport, CirculatorError> {
    let support = reduced_bias_current_support(n, weak)?;
    Ok(SelectivityReport {
        n,
        weak_index: weak,
        selective: support.len() == 2,
        current_support_size: support.len(),
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizer::find_local_minimum;
    use crate::potential::ReducedPhases;

    #[test]
    fn pairing_table() {
        assert_eq!(select_pair(1, Chirality::Positive).unwrap(), (1, 2));
        assert_eq!(select_pair(2, Chirality::Positive).unwrap(), (2, 3));
        assert_eq!(select_pair(3, Chirality::Positive).unwrap(), (3, 1));
        assert_eq!(select_pair(3, Chirality::Negative).unwrap(), (1, 3));
        assert!(select_pair(0, Chirality::Positive).is_err());
        assert!(select_pair(4, Chirality::Negative).is_err());
    }

    #[test]
    fn select_pair_is_a_bijection_and_commutes_with_rotation() {
        for chirality in [Chirality::Positive, Chirality::Negative] {
            let pairs: BTreeSet<_> = (1..=3).map(|k| select_pair(k, chirality).unwrap()).collect();
            assert_eq!(pairs.len(), 3);
            for k in 1..=3 {
                let rot = |p: usize| p % 3 + 1;
                let (l, m) = select_pair(k, chirality).unwrap();
                assert_eq!(select_pair(rot(k), chirality).unwrap(), (rot(l), rot(m)));
                assert_eq!(weak_index_for_pair(l, m).unwrap(), k);
                let dark = dark_port(k).unwrap();
                assert!(dark != l && dark != m);
            }
        }
    }

    #[test]
    fn circulation_for_weak_first_junction() {
        let cfg = CouplerConfig::three_junction(1, 0.8, 0.5).unwrap();
        let r = verify_circulation(&cfg, DEFAULT_INPUT_CURRENT, Chirality::Positive).unwrap();
        assert_eq!(r.dark_port, 3);
        assert_eq!(r.selected_pair, (1, 2));
        assert!(r.residual_current_into_dark_port.abs() < 1e-8);
        let zero = verify_circulation(&cfg, 0.0, Chirality::Positive).unwrap();
        assert!(zero.residual_current_into_dark_port.abs() < 1e-12);
    }

    #[test]
    fn circulation_follows_relabeling() {
        for k in 1..=3 {
            let cfg = CouplerConfig::three_junction(k, 0.8, 0.5).unwrap();
            for chirality in [Chirality::Positive, Chirality::Negative] {
                let r = verify_circulation(&cfg, 0.05, chirality).unwrap();
                let (l, m) = select_pair(k, chirality).unwrap();
                assert_eq!(r.dark_port, 6 - l - m);
            }
        }
        let cfg = CouplerConfig::three_junction(2, 0.8, 0.5).unwrap();
        assert_eq!(verify_circulation(&cfg, 3e-5, Chirality::Positive).unwrap().dark_port, 1);
    }

    #[test]
    fn residual_symmetric_in_input_sign() {
        let cfg = CouplerConfig::three_junction(1, 0.8, 0.5).unwrap();
        for u in [3e-5, 1e-3, 0.05] {
            let a = verify_circulation(&cfg, u, Chirality::Positive).unwrap();
            let b = verify_circulation(&cfg, -u, Chirality::Positive).unwrap();
            assert!((a.residual_current_into_dark_port.abs() - b.residual_current_into_dark_port.abs()).abs() < 1e-8);
        }
    }

    #[test]
    fn off_pair_bias_is_detected() {
        // Driving the dark port directly moves φ- off zero.
        let cfg = CouplerConfig::three_junction(1, 0.8, 0.5).unwrap();
        let bias = BiasCurrents::pair(3, 1, 3, 0.05).unwrap();
        let min = find_local_minimum(ReducedPhases::new(0.9, 0.0), &cfg, &bias).unwrap();
        assert!(min.position.minus.abs() > 1e-3);
        assert!((min.kcl_port_current(3) + 0.05).abs() < 1e-10);
    }

    #[test]
    fn symmetric_coupler_has_no_route() {
        let cfg = CouplerConfig::new(vec![1.0; 3], 0.5, 0).unwrap();
        assert_eq!(verify_circulation(&cfg, 3e-5, Chirality::Positive).unwrap_err(), CirculatorError::NoWeakJunction);
    }

    #[test]
    fn robustness_near_half_flux() {
        let cfg = CouplerConfig::three_junction(1, 0.8, 0.5).unwrap();
        let scan = robustness_scan(&cfg, (0.48, 0.52), 5, DEFAULT_INPUT_CURRENT, Chirality::Positive).unwrap();
        assert_eq!(scan.first_failure, None);
        assert_eq!(scan.rows.len(), 5);
        let baseline = verify_circulation(&cfg, DEFAULT_INPUT_CURRENT, Chirality::Positive).unwrap();
        assert_eq!(scan.rows[2].frustration, 0.5);
        assert_eq!(scan.rows[2].residual, Some(baseline.residual_current_into_dark_port));
        assert!(robustness_scan(&cfg, (0.51, 0.52), 5, 3e-5, Chirality::Positive).is_err());
    }

    #[test]
    fn quarter_flux_is_reported() {
        let cfg = CouplerConfig::three_junction(1, 0.8, 0.25).unwrap();
        let outcome = verify_circulation(&cfg, 0.05, Chirality::Positive);
        // Recorded rather than asserted: the landscape has lost its double well.
        eprintln!("f = 0.25: {outcome:?}");
    }

    #[test]
    fn selectivity_only_for_three_ports() {
        let r = impossibility_check(3, 1).unwrap();
        assert!(r.selective);
        assert_eq!(r.current_support_size, 2);
        let r = impossibility_check(4, 1).unwrap();
        assert!(!r.selective && r.current_support_size > 2);
        let r = impossibility_check(6, 3).unwrap();
        assert!(!r.selective && r.current_support_size > 2);
        for n in 3..=8 {
            for k in 1..=n {
                assert_eq!(impossibility_check(n, k).unwrap().selective, n == 3);
            }
        }
    }

    #[test]
    fn report_json_field_names() {
        let cfg = CouplerConfig::three_junction(1, 0.8, 0.5).unwrap();
        let r = verify_circulation(&cfg, 3e-5, Chirality::Positive).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["weak_index", "selected_pair", "dark_port", "residual_current_into_dark_port", "minimum_used", "chirality"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["chirality"], 1);
        let back: CirculationReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
