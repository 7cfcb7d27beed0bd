//! Physical parameters of the coupler and resonators, and their reduction to
//! the dimensionless form used everywhere else in the crate.
//!
//! Internal units: energies in `E_J` (the unreduced junction energy), fluxes in
//! `Φ0`, phases in radians, and currents in `I_c = 2π E_Jw / Φ0` where `E_Jw`
//! is the effective energy of the weakened junction (`E_J` when no junction is
//! weakened). Ports and junctions are numbered from 1.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planck constant (J·s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge (C), exact SI value.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Superconducting flux quantum `h / 2e` (Wb).
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// Kinetic inductance is dropped from the loop when `L'_K / L'_s` is below this.
pub const KINETIC_NEGLECT_RATIO: f64 = 0.05;

/// Tolerance for current conservation `Σ u_i = 0`.
pub const CURRENT_CONSERVATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("interface length d = {d} must be smaller than the resonator length {length}")]
    InterfaceTooLong { d: f64, length: f64 },
    #[error("fock cutoff must be at least 1")]
    FockCutoff,
    #[error("coupler needs at least 2 ports, got {0}")]
    TooFewPorts(usize),
    #[error("expected {expected} entries for `{name}`, got {got}")]
    Length { name: &'static str, expected: usize, got: usize },
    #[error("junction {index} has non-positive effective energy ratio {ratio}")]
    NonPositiveJunction { index: usize, ratio: f64 },
    #[error("junction {index} has energy ratio {ratio} above 1")]
    RatioAboveOne { index: usize, ratio: f64 },
    #[error("more than one weakened junction: {0:?}")]
    MultipleWeakJunctions(Vec<usize>),
    #[error("frustration f = {0} outside [0, 1)")]
    Frustration(f64),
    #[error("bias currents violate conservation: sum = {0:e}")]
    CurrentNotConserved(f64),
    #[error("non-finite value in `{0}`")]
    NonFinite(&'static str),
    #[error("cannot read config: {0}")]
    Parse(String),
}

/// Effective Josephson energy of a dc-SQUID threaded by flux `squid_flux`.
///
/// `E_J cos(π Φ_s / Φ0)`; may be zero or negative, callers decide admissibility.
pub fn effective_junction_energy(base_energy: f64, squid_flux: f64) -> f64 {
    base_energy * (PI * squid_flux / FLUX_QUANTUM).cos()
}

/// SI parameters of a coupler and its attached resonators.
///
/// Field names double as the keys of the JSON configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// `E_J` in joules.
    pub base_junction_energy: f64,
    /// Flux threading each dc-SQUID, webers. One entry per junction.
    pub squid_fluxes: Vec<f64>,
    /// Flux `Φ_x` threading the coupler loop, webers.
    pub loop_flux: f64,
    /// `L'_s`, henries.
    pub loop_self_inductance: f64,
    /// `L'_K`, henries.
    pub kinetic_inductance: f64,
    /// `C'_i`, farads. One entry per junction.
    pub junction_capacitances: Vec<f64>,
    /// `ω_r`, rad/s. Shared by every resonator.
    pub resonator_frequency: f64,
    /// `l_s`, henries per meter.
    pub resonator_inductance_density: f64,
    /// `L0`, meters.
    pub resonator_length: f64,
    /// `d`, meters.
    pub interface_length: f64,
    /// `ω_a = 2 t_q`, rad/s.
    pub qubit_splitting: f64,
    pub fock_cutoff: usize,
    /// Fluxoid branch `m`.
    #[serde(default)]
    pub winding: i32,
}

impl PhysicalParams {
    /// Three-junction coupler with `E_J1 / E_J = 0.8`, `f = 0.5`, a 500 nA loop
    /// critical current and 25 mm resonators carrying a 20 nA rms mode current.
    pub fn reference() -> Self {
        let critical_current = 500e-9;
        let weak_ratio: f64 = 0.8;
        let weak_energy = critical_current * FLUX_QUANTUM / (2.0 * PI);
        let base = weak_energy / weak_ratio;
        let omega_r = 2.0 * PI * 5e9;
        let effective_length = 25e-3;
        let interface = 2e-6;
        let rms_current = 20e-9;
        // ħω / (l_s L) = 2 I_rms²
        let l_s = HBAR * omega_r / (effective_length * 2.0 * rms_current * rms_current);
        Self {
            base_junction_energy: base,
            squid_fluxes: vec![weak_ratio.acos() / PI * FLUX_QUANTUM, 0.0, 0.0],
            loop_flux: 0.5 * FLUX_QUANTUM,
            loop_self_inductance: 10e-12,
            kinetic_inductance: 0.1e-12,
            junction_capacitances: vec![4e-15; 3],
            resonator_frequency: omega_r,
            resonator_inductance_density: l_s,
            resonator_length: effective_length - interface,
            interface_length: interface,
            qubit_splitting: omega_r,
            fock_cutoff: 3,
            winding: 0,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let params: Self = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn n_ports(&self) -> usize {
        self.squid_fluxes.len()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("base_junction_energy", self.base_junction_energy),
            ("loop_self_inductance", self.loop_self_inductance),
            ("kinetic_inductance", self.kinetic_inductance),
            ("resonator_frequency", self.resonator_frequency),
            ("resonator_inductance_density", self.resonator_inductance_density),
            ("resonator_length", self.resonator_length),
            ("interface_length", self.interface_length),
            ("qubit_splitting", self.qubit_splitting),
        ];
        for (name, value) in positive {
            if !value.is_finite() {
                return Err(ConfigError::NonFinite(name));
            }
            if value <= 0.0 {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        if !self.loop_flux.is_finite() {
            return Err(ConfigError::NonFinite("loop_flux"));
        }
        let n = self.n_ports();
        if n < 2 {
            return Err(ConfigError::TooFewPorts(n));
        }
        if self.junction_capacitances.len() != n {
            return Err(ConfigError::Length {
                name: "junction_capacitances",
                expected: n,
                got: self.junction_capacitances.len(),
            });
        }
        for &c in &self.junction_capacitances {
            if !(c > 0.0 && c.is_finite()) {
                return Err(ConfigError::NonPositive { name: "junction_capacitances", value: c });
            }
        }
        if self.squid_fluxes.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::NonFinite("squid_fluxes"));
        }
        if self.interface_length >= self.resonator_length {
            return Err(ConfigError::InterfaceTooLong {
                d: self.interface_length,
                length: self.resonator_length,
            });
        }
        if self.fock_cutoff < 1 {
            return Err(ConfigError::FockCutoff);
        }
        Ok(())
    }
}

/// Dimensionless description of an n-junction coupler loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplerConfig {
    /// `E_Ji / E_J`, each in `(0, 1]`.
    junction_ratios: Vec<f64>,
    /// `f = Φ_x / Φ0` in `[0, 1)`.
    frustration: f64,
    /// 1-based index of the single junction with ratio below 1.
    weak_index: Option<usize>,
    winding: i32,
}

impl CouplerConfig {
    pub fn new(junction_ratios: Vec<f64>, frustration: f64, winding: i32) -> Result<Self, ConfigError> {
        let n = junction_ratios.len();
        if n < 2 {
            return Err(ConfigError::TooFewPorts(n));
        }
        if !frustration.is_finite() || !(0.0..1.0).contains(&frustration) {
            return Err(ConfigError::Frustration(frustration));
        }
        let mut weak = Vec::new();
        for (i, &e) in junction_ratios.iter().enumerate() {
            if !e.is_finite() {
                return Err(ConfigError::NonFinite("junction_ratios"));
            }
            if e <= 1e-12 {
                return Err(ConfigError::NonPositiveJunction { index: i + 1, ratio: e });
            }
            if e > 1.0 {
                return Err(ConfigError::RatioAboveOne { index: i + 1, ratio: e });
            }
            if e < 1.0 {
                weak.push(i + 1);
            }
        }
        if weak.len() > 1 {
            return Err(ConfigError::MultipleWeakJunctions(weak));
        }
        Ok(Self { junction_ratios, frustration, weak_index: weak.first().copied(), winding })
    }

    /// Three-junction coupler with junction `weak` reduced to `ratio`.
    pub fn three_junction(weak: usize, ratio: f64, frustration: f64) -> Result<Self, ConfigError> {
        if !(1..=3).contains(&weak) {
            return Err(ConfigError::Length { name: "weak_index", expected: 3, got: weak });
        }
        let mut e = vec![1.0; 3];
        e[weak - 1] = ratio;
        Self::new(e, frustration, 0)
    }

    pub fn n_ports(&self) -> usize {
        self.junction_ratios.len()
    }

    pub fn junction_ratios(&self) -> &[f64] {
        &self.junction_ratios
    }

    pub fn ratio(&self, junction: usize) -> f64 {
        self.junction_ratios[junction - 1]
    }

    pub fn frustration(&self) -> f64 {
        self.frustration
    }

    pub fn weak_index(&self) -> Option<usize> {
        self.weak_index
    }

    pub fn winding(&self) -> i32 {
        self.winding
    }

    /// `m + f`, the fluxoid target of `Σ φ_i / 2π`.
    pub fn fluxoid(&self) -> f64 {
        self.winding as f64 + self.frustration
    }

    /// Energy ratio that defines the current unit, `E_Jw / E_J`.
    pub fn current_unit_ratio(&self) -> f64 {
        self.weak_index.map_or(1.0, |k| self.ratio(k))
    }

    pub fn with_frustration(&self, frustration: f64) -> Result<Self, ConfigError> {
        Self::new(self.junction_ratios.clone(), frustration, self.winding)
    }
}

/// Port currents `u_i = I_i / I_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCurrents {
    u: Vec<f64>,
    /// `I_c` in amperes, when known.
    current_unit: Option<f64>,
}

impl BiasCurrents {
    pub fn new(u: Vec<f64>, current_unit: Option<f64>) -> Result<Self, ConfigError> {
        if u.iter().any(|x| !x.is_finite()) {
            return Err(ConfigError::NonFinite("bias currents"));
        }
        let sum: f64 = u.iter().sum();
        if sum.abs() > CURRENT_CONSERVATION_TOL {
            return Err(ConfigError::CurrentNotConserved(sum));
        }
        Ok(Self { u, current_unit })
    }

    pub fn dimensionless(u: Vec<f64>) -> Result<Self, ConfigError> {
        Self::new(u, None)
    }

    pub fn zero(n: usize) -> Self {
        Self { u: vec![0.0; n], current_unit: None }
    }

    /// Input `u_in` on port `from`, the same current drawn out of port `to`.
    pub fn pair(n: usize, from: usize, to: usize, u_in: f64) -> Result<Self, ConfigError> {
        if from == 0 || to == 0 || from > n || to > n || from == to {
            return Err(ConfigError::Length { name: "port pair", expected: n, got: from.max(to) });
        }
        let mut u = vec![0.0; n];
        u[from - 1] = u_in;
        u[to - 1] = -u_in;
        Self::dimensionless(u)
    }

    /// Converts SI port currents using `I_c` from `scales`.
    pub fn from_amperes(currents: &[f64], scales: &DimensionlessScales) -> Result<Self, ConfigError> {
        let unit = scales.current_unit;
        Self::new(currents.iter().map(|i| i / unit).collect(), Some(unit))
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// Current on 1-based `port`.
    pub fn get(&self, port: usize) -> f64 {
        self.u[port - 1]
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().all(|&x| x == 0.0)
    }

    pub fn current_unit(&self) -> Option<f64> {
        self.current_unit
    }
}

/// Units removed by [`normalize`] together with the SI quantities that do not
/// enter the coupler potential, so that [`redimensionalize`] is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessScales {
    /// `E_J`, joules.
    pub energy_unit: f64,
    /// `Φ0`, webers.
    pub flux_unit: f64,
    /// `I_c = 2π E_Jw / Φ0`, amperes.
    pub current_unit: f64,
    /// `Φ0² / (2 L E_J)` with `L = L'_s` (or `L'_s + L'_K` when kinetic
    /// inductance is kept).
    pub inductive_weight: f64,
    pub kinetic_inductance_neglected: bool,
    /// `Φ_si / Φ0`.
    pub squid_flux_fractions: Vec<f64>,
    pub loop_self_inductance: f64,
    pub kinetic_inductance: f64,
    pub junction_capacitances: Vec<f64>,
    pub resonator_frequency: f64,
    pub resonator_inductance_density: f64,
    pub resonator_length: f64,
    pub interface_length: f64,
    pub qubit_splitting: f64,
    pub fock_cutoff: usize,
}

/// Reduces SI parameters to a [`CouplerConfig`] plus the scales needed to undo it.
pub fn normalize(params: &PhysicalParams) -> Result<(CouplerConfig, DimensionlessScales), ConfigError> {
    params.validate()?;
    let energy_unit = params.base_junction_energy;
    let squid_flux_fractions: Vec<f64> =
        params.squid_fluxes.iter().map(|phi| phi / FLUX_QUANTUM).collect();
    let ratios: Vec<f64> = squid_flux_fractions.iter().map(|s| (PI * s).cos()).collect();
    let frustration = params.loop_flux / FLUX_QUANTUM;
    let cfg = CouplerConfig::new(ratios, frustration, params.winding)?;

    let kinetic_inductance_neglected =
        params.kinetic_inductance / params.loop_self_inductance < KINETIC_NEGLECT_RATIO;
    let loop_inductance = if kinetic_inductance_neglected {
        params.loop_self_inductance
    } else {
        params.loop_self_inductance + params.kinetic_inductance
    };
    let scales = DimensionlessScales {
        energy_unit,
        flux_unit: FLUX_QUANTUM,
        current_unit: 2.0 * PI * energy_unit * cfg.current_unit_ratio() / FLUX_QUANTUM,
        inductive_weight: FLUX_QUANTUM * FLUX_QUANTUM / (2.0 * loop_inductance * energy_unit),
        kinetic_inductance_neglected,
        squid_flux_fractions,
        loop_self_inductance: params.loop_self_inductance,
        kinetic_inductance: params.kinetic_inductance,
        junction_capacitances: params.junction_capacitances.clone(),
        resonator_frequency: params.resonator_frequency,
        resonator_inductance_density: params.resonator_inductance_density,
        resonator_length: params.resonator_length,
        interface_length: params.interface_length,
        qubit_splitting: params.qubit_splitting,
        fock_cutoff: params.fock_cutoff,
    };
    Ok((cfg, scales))
}

/// Inverse of [`normalize`].
pub fn redimensionalize(cfg: &CouplerConfig, scales: &DimensionlessScales) -> PhysicalParams {
    PhysicalParams {
        base_junction_energy: scales.energy_unit,
        squid_fluxes: scales.squid_flux_fractions.iter().map(|s| s * scales.flux_unit).collect(),
        loop_flux: cfg.frustration() * scales.flux_unit,
        loop_self_inductance: scales.loop_self_inductance,
        kinetic_inductance: scales.kinetic_inductance,
        junction_capacitances: scales.junction_capacitances.clone(),
        resonator_frequency: scales.resonator_frequency,
        resonator_inductance_density: scales.resonator_inductance_density,
        resonator_length: scales.resonator_length,
        interface_length: scales.interface_length,
        qubit_splitting: scales.qubit_splitting,
        fock_cutoff: scales.fock_cutoff,
        winding: cfg.winding(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn junction_energy_at_zero_and_half_flux() {
        assert_eq!(effective_junction_energy(3.0, 0.0), 3.0);
        assert!(effective_junction_energy(3.0, 0.5 * FLUX_QUANTUM).abs() < 1e-15);
    }

    #[test]
    fn junction_energy_ratio_point_eight() {
        // Bisection on cos(π s) = 0.8, independent of acos.
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (PI * mid).cos() > 0.8 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.2048).abs() < 1e-4);
        let e = effective_junction_energy(1.0, lo * FLUX_QUANTUM);
        assert_relative_eq!(e, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn reference_params_normalize_to_weak_first_junction() {
        let (cfg, scales) = normalize(&PhysicalParams::reference()).unwrap();
        assert_eq!(cfg.weak_index(), Some(1));
        assert_relative_eq!(cfg.ratio(1), 0.8, epsilon = 1e-12);
        assert_eq!(cfg.ratio(2), 1.0);
        assert_eq!(cfg.ratio(3), 1.0);
        assert_relative_eq!(cfg.frustration(), 0.5, epsilon = 1e-12);
        assert!(scales.kinetic_inductance_neglected);
        assert_relative_eq!(scales.current_unit, 500e-9, max_relative = 1e-12);
    }

    #[test]
    fn unthreaded_squids_have_no_weak_junction() {
        let mut p = PhysicalParams::reference();
        p.squid_fluxes = vec![0.0; 3];
        let (cfg, _) = normalize(&p).unwrap();
        assert_eq!(cfg.junction_ratios(), &[1.0, 1.0, 1.0]);
        assert_eq!(cfg.weak_index(), None);
    }

    #[test]
    fn kinetic_flag_follows_ratio() {
        let mut p = PhysicalParams::reference();
        p.kinetic_inductance = 0.01 * p.loop_self_inductance;
        assert!(normalize(&p).unwrap().1.kinetic_inductance_neglected);
        p.kinetic_inductance = 0.2 * p.loop_self_inductance;
        let (_, s) = normalize(&p).unwrap();
        assert!(!s.kinetic_inductance_neglected);
        let expected = FLUX_QUANTUM.powi(2) / (2.0 * 1.2 * p.loop_self_inductance * p.base_junction_energy);
        assert_relative_eq!(s.inductive_weight, expected, max_relative = 1e-12);
    }

    #[test]
    fn rejects_sign_flipped_junction() {
        let mut p = PhysicalParams::reference();
        p.squid_fluxes[0] = 0.6 * FLUX_QUANTUM;
        assert!(matches!(normalize(&p), Err(ConfigError::NonPositiveJunction { index: 1, .. })));
        p.squid_fluxes[0] = 0.5 * FLUX_QUANTUM;
        assert!(normalize(&p).is_err());
    }

    #[test]
    fn rejects_two_weak_junctions() {
        let mut p = PhysicalParams::reference();
        p.squid_fluxes[2] = 0.1 * FLUX_QUANTUM;
        assert!(matches!(normalize(&p), Err(ConfigError::MultipleWeakJunctions(_))));
    }

    #[test]
    fn validation_errors() {
        let mut p = PhysicalParams::reference();
        p.interface_length = p.resonator_length;
        assert!(matches!(p.validate(), Err(ConfigError::InterfaceTooLong { .. })));
        let mut p = PhysicalParams::reference();
        p.fock_cutoff = 0;
        assert_eq!(p.validate(), Err(ConfigError::FockCutoff));
        let mut p = PhysicalParams::reference();
        p.loop_self_inductance = -1.0;
        assert!(matches!(p.validate(), Err(ConfigError::NonPositive { .. })));
        let mut p = PhysicalParams::reference();
        p.junction_capacitances.pop();
        assert!(matches!(p.validate(), Err(ConfigError::Length { .. })));
    }

    #[test]
    fn bias_conservation() {
        assert!(BiasCurrents::dimensionless(vec![0.05, -0.05, 0.0]).is_ok());
        assert!(BiasCurrents::dimensionless(vec![0.05, -0.05, 1e-11]).is_err());
        let b = BiasCurrents::pair(3, 2, 3, 0.1).unwrap();
        assert_eq!(b.values(), &[0.0, 0.1, -0.1]);
    }

    #[test]
    fn json_round_trip() {
        let p = PhysicalParams::reference();
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(PhysicalParams::from_json_str(&text).unwrap(), p);
        assert!(PhysicalParams::from_json_str("{}").is_err());
    }

    proptest! {
        #[test]
        fn normalize_then_redimensionalize_is_identity(
            ej in 1e-24f64..1e-21,
            weak_frac in 0.0f64..0.3,
            weak in 0usize..3,
            f in 0.0f64..0.999,
            ls in 1e-12f64..1e-9,
            lk_ratio in 1e-3f64..0.5,
        ) {
            let mut p = PhysicalParams::reference();
            p.base_junction_energy = ej;
            p.squid_fluxes = vec![0.0; 3];
            p.squid_fluxes[weak] = weak_frac * FLUX_QUANTUM;
            p.loop_flux = f * FLUX_QUANTUM;
            p.loop_self_inductance = ls;
            p.kinetic_inductance = lk_ratio * ls;
            let (cfg, scales) = normalize(&p).unwrap();
            let back = redimensionalize(&cfg, &scales);
            let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
            prop_assert!(rel(back.base_junction_energy, p.base_junction_energy) < 1e-12);
            prop_assert!(rel(back.loop_flux, p.loop_flux) < 1e-12);
            for (a, b) in back.squid_fluxes.iter().zip(&p.squid_fluxes) {
                prop_assert!(rel(*a, *b) < 1e-12);
            }
            prop_assert_eq!(back.kinetic_inductance, p.kinetic_inductance);
            prop_assert_eq!(back.fock_cutoff, p.fock_cutoff);
        }
    }
}
