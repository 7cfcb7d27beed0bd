//! Two-level coupler interacting with two or three resonator modes in a
//! truncated Fock space.
//!
//! The Hamiltonian (units of angular frequency, `ħ = 1`) is
//!
//! ```text
//! H = Σ_j ω_j a†_j a_j + (ω_a / 2) σ_z + (i g / 2) σ_x [(a_l - a†_l) - (a_m - a†_m)]
//! ```
//!
//! Only modes `l` and `m` enter the coupling. In RWA mode the coupling is
//! replaced by `(i g / 2)[σ+ (a_l - a_m) - σ- (a†_l - a†_m)]`.
//!
//! Basis index: `q · (N+1)^M + Σ_j n_j (N+1)^(M-j)`, with `q = 0` for the qubit
//! ground state, `M` modes and mode 1 the most significant digit.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PhysicalParams, FLUX_QUANTUM, HBAR};

pub type C64 = Complex<f64>;

pub const NORM_DRIFT_TOL: f64 = 1e-9;
const MAX_DIMENSION: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("resonator harmonic must be even and at least 2, got {0}")]
    Harmonic(u32),
    #[error("invalid mode pair ({0}, {1}) for {2} modes")]
    InvalidPair(usize, usize, usize),
    #[error("the coupler model takes 2 or 3 resonator modes, got {0}")]
    ModeCount(usize),
    #[error("{0} mode frequencies given for {1} modes")]
    FrequencyCount(usize, usize),
    #[error("Hilbert space dimension {0} exceeds {MAX_DIMENSION}")]
    DimensionTooLarge(usize),
    #[error("Fock state {0:?} exceeds the cutoff")]
    FockState(Vec<usize>),
    #[error("time step {dt} and final time {t_final} must be positive and finite")]
    InvalidTime { dt: f64, t_final: f64 },
    #[error("norm drift {drift:e} at t = {t} exceeds {NORM_DRIFT_TOL:e}; reduce the step")]
    NormDrift { t: f64, drift: f64 },
    #[error("empty trajectory")]
    EmptyTrajectory,
}

/// One transmission-line resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// `ω_r`, rad/s.
    pub frequency: f64,
    /// `l_s`, H/m.
    pub inductance_density: f64,
    /// `L0`, meters.
    pub length: f64,
    /// `d`, meters.
    pub interface_length: f64,
    /// Harmonic index of the current mode.
    pub harmonic: u32,
}

impl ResonatorParams {
    pub fn new(frequency: f64, inductance_density: f64, length: f64, interface_length: f64) -> Result<Self, QuantumError> {
        let p = Self { frequency, inductance_density, length, interface_length, harmonic: 2 };
        p.validate()?;
        Ok(p)
    }

    /// Chooses `l_s` so that the rms mode current `√(ħω/l_s L)/√2` equals `rms_current`.
    pub fn from_rms_current(frequency: f64, rms_current: f64, length: f64, interface_length: f64) -> Result<Self, QuantumError> {
        let effective = length + interface_length;
        let l_s = HBAR * frequency / (effective * 2.0 * rms_current * rms_current);
        Self::new(frequency, l_s, length, interface_length)
    }

    pub fn from_physical(params: &PhysicalParams) -> Result<Self, QuantumError> {
        Self::new(
            params.resonator_frequency,
            params.resonator_inductance_density,
            params.resonator_length,
            params.interface_length,
        )
    }

    pub fn validate(&self) -> Result<(), QuantumError> {
        for (name, value) in [
            ("frequency", self.frequency),
            ("inductance_density", self.inductance_density),
            ("length", self.length),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(QuantumError::NonPositive { name, value });
            }
        }
        if !(self.interface_length >= 0.0 && self.interface_length.is_finite()) {
            return Err(QuantumError::NonPositive { name: "interface_length", value: self.interface_length });
        }
        if self.harmonic < 2 || !self.harmonic.is_multiple_of(2) {
            return Err(QuantumError::Harmonic(self.harmonic));
        }
        Ok(())
    }

    /// `L = L0 + d`.
    pub fn effective_length(&self) -> f64 {
        self.length + self.interface_length
    }

    /// `√(ħω_r / l_s L)`, amperes.
    pub fn zero_point_current(&self) -> f64 {
        (HBAR * self.frequency / (self.inductance_density * self.effective_length())).sqrt()
    }

    /// `|sin(hπx/L)|` difference between the two ends of the interface,
    /// `x = L/2` and `x = L0/2`; equals `|sin(h π d / 2L)|` for even `h`.
    fn interface_factor(&self) -> f64 {
        (self.harmonic as f64 * PI * self.interface_length / (2.0 * self.effective_length())).sin().abs()
    }
}

/// Peak-to-peak current injected into the coupler, `2 √(ħω/l_s L) sin(πd/L)`.
pub fn resonator_current_amplitude(p: &ResonatorParams) -> f64 {
    2.0 * p.zero_point_current() * p.interface_factor()
}

/// `√(ħω/l_s L) / √2`.
pub fn rms_mode_current(p: &ResonatorParams) -> f64 {
    p.zero_point_current() / 2f64.sqrt()
}

/// Qubit-resonator coupling `g/ħ` in rad/s for a well at `φ+ = ±α`.
///
/// `(α Φ0 / π) √(ħω/l_s L) sin(πd/L) / ħ`, i.e. `α Φ0 √(ħω/l_s L)(d/L)/ħ` to
/// first order in `d/L`.
pub fn coupling_strength(alpha: f64, p: &ResonatorParams) -> f64 {
    alpha * FLUX_QUANTUM / PI * p.zero_point_current() * p.interface_factor() / HBAR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    Ground,
    Excited,
}

/// Inputs of [`build_hamiltonian`]. Frequencies in rad/s (or any consistent unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Coupled modes `(l, m)`, 1-based.
    pub pair: (usize, usize),
    pub n_modes: usize,
    pub fock_cutoff: usize,
    pub mode_frequencies: Vec<f64>,
    pub qubit_splitting: f64,
    pub coupling: f64,
    pub rwa: bool,
}

impl SystemSpec {
    /// Three resonant modes, `ω_a = ω_r`.
    pub fn resonant(pair: (usize, usize), fock_cutoff: usize, omega: f64, coupling: f64) -> Self {
        Self {
            pair,
            n_modes: 3,
            fock_cutoff,
            mode_frequencies: vec![omega; 3],
            qubit_splitting: omega,
            coupling,
            rwa: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantumSystem {
    pub spec: SystemSpec,
    pub hamiltonian: DMatrix<C64>,
    /// Current state; starts in the qubit ground state with empty resonators.
    pub state: DVector<C64>,
    /// Set when the cutoff is zero while the coupling is not.
    pub cutoff_flagged: bool,
}

impl QuantumSystem {
    pub fn dimension(&self) -> usize {
        self.hamiltonian.nrows()
    }

    fn levels(&self) -> usize {
        self.spec.fock_cutoff + 1
    }

    fn mode_space(&self) -> usize {
        self.levels().pow(self.spec.n_modes as u32)
    }

    pub fn basis_index(&self, qubit: Qubit, occupations: &[usize]) -> Result<usize, QuantumError> {
        if occupations.len() != self.spec.n_modes || occupations.iter().any(|&n| n > self.spec.fock_cutoff) {
            return Err(QuantumError::FockState(occupations.to_vec()));
        }
        let q = match qubit {
            Qubit::Ground => 0,
            Qubit::Excited => 1,
        };
        let modes = occupations.iter().fold(0, |acc, &n| acc * self.levels() + n);
        Ok(q * self.mode_space() + modes)
    }

    /// Qubit state and occupations of a basis index.
    pub fn basis_state(&self, index: usize) -> (Qubit, Vec<usize>) {
        let space = self.mode_space();
        let qubit = if index < space { Qubit::Ground } else { Qubit::Excited };
        let mut rest = index % space;
        let mut occ = vec![0; self.spec.n_modes];
        for slot in occ.iter_mut().rev() {
            *slot = rest % self.levels();
            rest /= self.levels();
        }
        (qubit, occ)
    }

    pub fn fock_state(&self, qubit: Qubit, occupations: &[usize]) -> Result<DVector<C64>, QuantumError> {
        let mut psi = DVector::zeros(self.dimension());
        psi[self.basis_index(qubit, occupations)?] = C64::new(1.0, 0.0);
        Ok(psi)
    }

    /// Replaces the state with a normalized copy of `psi`.
    pub fn with_state(mut self, psi: DVector<C64>) -> Self {
        let n = psi.norm();
        self.state = psi.unscale(n);
        self
    }

    /// Diagonal of `n̂_mode` (1-based mode).
    pub fn number_diagonal(&self, mode: usize) -> Vec<f64> {
        (0..self.dimension()).map(|i| self.basis_state(i).1[mode - 1] as f64).collect()
    }

    pub fn energy(&self, psi: &DVector<C64>) -> f64 {
        psi.dotc(&(&self.hamiltonian * psi)).re
    }
}

pub fn build_hamiltonian(spec: SystemSpec) -> Result<QuantumSystem, QuantumError> {
    let modes = spec.n_modes;
    if !(2..=3).contains(&modes) {
        return Err(QuantumError::ModeCount(modes));
    }
    let (l, m) = spec.pair;
    if l == m || l == 0 || m == 0 || l > modes || m > modes {
        return Err(QuantumError::InvalidPair(l, m, modes));
    }
    if spec.mode_frequencies.len() != modes {
        return Err(QuantumError::FrequencyCount(spec.mode_frequencies.len(), modes));
    }
    let levels = spec.fock_cutoff + 1;
    let dim = 2 * levels.pow(modes as u32);
    if dim > MAX_DIMENSION {
        return Err(QuantumError::DimensionTooLarge(dim));
    }
    let cutoff_flagged = spec.fock_cutoff == 0 && spec.coupling != 0.0;
    let mut sys = QuantumSystem {
        hamiltonian: DMatrix::zeros(dim, dim),
        state: DVector::zeros(dim),
        spec,
        cutoff_flagged,
    };
    let spec = &sys.spec;
    let half_g = C64::new(0.0, 0.5 * spec.coupling);
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for col in 0..dim {
        let (qubit, occ) = sys.basis_state(col);
        let sz = if qubit == Qubit::Excited { 1.0 } else { -1.0 };
        let free: f64 = occ.iter().zip(&spec.mode_frequencies).map(|(&n, w)| n as f64 * w).sum();
        h[(col, col)] = C64::new(free + 0.5 * spec.qubit_splitting * sz, 0.0);

        let flipped = if qubit == Qubit::Ground { Qubit::Excited } else { Qubit::Ground };
        // (mode, sign): the coupling operator is +(a_l - a†_l) - (a_m - a†_m).
        for (mode, sign) in [(l, 1.0), (m, -1.0)] {
            let n = occ[mode - 1];
            let lower = n > 0 && (!spec.rwa || qubit == Qubit::Ground);
            let raise = n < spec.fock_cutoff && (!spec.rwa || qubit == Qubit::Excited);
            if lower {
                let mut to = occ.clone();
                to[mode - 1] -= 1;
                let row = sys.basis_index(flipped, &to)?;
                h[(row, col)] += half_g * (sign * (n as f64).sqrt());
            }
            if raise {
                let mut to = occ.clone();
                to[mode - 1] += 1;
                let row = sys.basis_index(flipped, &to)?;
                h[(row, col)] -= half_g * (sign * ((n + 1) as f64).sqrt());
            }
        }
    }
    sys.state[0] = C64::new(1.0, 0.0);
    sys.hamiltonian = h;
    Ok(sys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Exact propagation through the eigendecomposition of `H`.
    Spectral,
    /// Classical fourth-order Runge-Kutta; requires `dt ‖H‖ ≪ 1`.
    Rk4,
}

/// Expectation values of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub occupations: Vec<f64>,
    pub sigma_z: f64,
    /// `Σ n_j + (1 + σ_z)/2`, conserved under the RWA coupling.
    pub excitations: f64,
    pub norm: f64,
}

pub fn occupations(psi: &DVector<C64>, sys: &QuantumSystem) -> Observables {
    let mut occ = vec![0.0; sys.spec.n_modes];
    let mut sigma_z = 0.0;
    let mut norm_sq = 0.0;
    for (i, amp) in psi.iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let (qubit, n) = sys.basis_state(i);
        norm_sq += p;
        sigma_z += if qubit == Qubit::Excited { p } else { -p };
        for (o, &k) in occ.iter_mut().zip(&n) {
            *o += p * k as f64;
        }
    }
    let excitations = occ.iter().sum::<f64>() + 0.5 * (norm_sq + sigma_z);
    Observables { occupations: occ, sigma_z, excitations, norm: norm_sq.sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub observables: Observables,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub pair: (usize, usize),
    pub n_modes: usize,
    pub points: Vec<TrajectoryPoint>,
    pub states: Vec<DVector<C64>>,
}

pub const TRAJECTORY_CSV_HEADER: [&str; 6] = ["t", "n1", "n2", "n3", "sigma_z", "norm"];

impl Trajectory {
    pub fn max_norm_drift(&self) -> f64 {
        self.points.iter().map(|p| (p.observables.norm - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        let Some(first) = self.points.first() else { return 0.0 };
        let e0 = first.energy;
        self.points.iter().map(|p| ((p.energy - e0) / e0).abs()).fold(0.0, f64::max)
    }

    /// `t,n1,n2,n3,sigma_z,norm`; `n3` is zero for two-mode systems.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(TRAJECTORY_CSV_HEADER)?;
        for p in &self.points {
            let occ = &p.observables.occupations;
            let n3 = occ.get(2).copied().unwrap_or(0.0);
            w.write_record([p.t, occ[0], occ[1], n3, p.observables.sigma_z, p.observables.norm].map(crate::format_float))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sample_times(t_final: f64, dt: f64) -> Vec<f64> {
    let steps = (t_final / dt).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    if t_final - times[times.len() - 1] > 1e-12 * t_final {
        times.push(t_final);
    }
    times
}

/// Evolves `sys.state` to `t_final`, sampling every `dt`.
pub fn evolve(sys: &QuantumSystem, t_final: f64, dt: f64, integrator: Integrator) -> Result<Trajectory, QuantumError> {
    if !(dt > 0.0 && t_final > 0.0 && dt.is_finite() && t_final.is_finite()) {
        return Err(QuantumError::InvalidTime { dt, t_final });
    }
    let times = sample_times(t_final, dt);
    let states = match integrator {
        Integrator::Spectral => propagate_spectral(sys, &times),
        Integrator::Rk4 => propagate_rk4(sys, &times)?,
    };
    let mut points = Vec::with_capacity(times.len());
    for (&t, psi) in times.iter().zip(&states) {
        let observables = occupations(psi, sys);
        let drift = (observables.norm - 1.0).abs();
        if drift > NORM_DRIFT_TOL {
            return Err(QuantumError::NormDrift { t, drift });
        }
        points.push(TrajectoryPoint { t, energy: sys.energy(psi), observables });
    }
    Ok(Trajectory { pair: sys.spec.pair, n_modes: sys.spec.n_modes, points, states })
}

fn propagate_spectral(sys: &QuantumSystem, times: &[f64]) -> Vec<DVector<C64>> {
    let eig = SymmetricEigen::new(sys.hamiltonian.clone());
    let vectors = eig.eigenvectors;
    let coeffs = vectors.adjoint() * &sys.state;
    times
        .iter()
        .map(|&t| {
            let phased = DVector::from_iterator(
                coeffs.len(),
                coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, &e)| c * C64::from_polar(1.0, -e * t)),
            );
            &vectors * phased
        })
        .collect()
}

fn propagate_rk4(sys: &QuantumSystem, times: &[f64]) -> Result<Vec<DVector<C64>>, QuantumError> {
    let minus_i = C64::new(0.0, -1.0);
    let h = &sys.hamiltonian;
    let rhs = |psi: &DVector<C64>| (h * psi) * minus_i;
    let mut psi = sys.state.clone();
    let mut out = vec![psi.clone()];
    for w in times.windows(2) {
        let step = w[1] - w[0];
        let k1 = rhs(&psi);
        let k2 = rhs(&(&psi + &k1 * C64::from(0.5 * step)));
        let k3 = rhs(&(&psi + &k2 * C64::from(0.5 * step)));
        let k4 = rhs(&(&psi + &k3 * C64::from(step)));
        psi += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(step / 6.0);
        let drift = (psi.norm() - 1.0).abs();
        if drift > NORM_DRIFT_TOL {
            return Err(QuantumError::NormDrift { t: w[1], drift });
        }
        out.push(psi.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub peak_target_occupation: f64,
    pub time_of_peak: f64,
    pub dark_port_max_occupation: f64,
}

/// Peak occupation of mode `m` of the pair and the largest occupation seen in
/// any mode outside the pair.
pub fn transfer_report(traj: &Trajectory) -> Result<TransferReport, QuantumError> {
    let first = traj.points.first().ok_or(QuantumError::EmptyTrajectory)?;
    let (l, m) = traj.pair;
    let mut peak = (first.observables.occupations[m - 1], first.t);
    let mut dark = 0.0_f64;
    for p in &traj.points {
        let occ = &p.observables.occupations;
        if occ[m - 1] > peak.0 {
            peak = (occ[m - 1], p.t);
        }
        for (j, &o) in occ.iter().enumerate() {
            if j + 1 != l && j + 1 != m {
                dark = dark.max(o);
            }
        }
    }
    Ok(TransferReport { peak_target_occupation: peak.0, time_of_peak: peak.1, dark_port_max_occupation: dark })
}

/// Transfer time `√2 π / g` of a single photon from mode `l` to mode `m` in
/// the resonant RWA limit: only the bright mode `(a_l - a_m)/√2` couples, with
/// strength `g/√2`.
pub fn rwa_transfer_time(coupling: f64) -> f64 {
    2f64.sqrt() * PI / coupling
}
