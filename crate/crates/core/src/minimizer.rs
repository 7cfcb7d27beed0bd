//! Local minima of the reduced potential and the output-current sweep.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BiasCurrents, ConfigError, CouplerConfig};
use crate::potential::{frame_labels, symmetric_eigenvalues, PotentialError, ReducedPhases, ReducedPotential};

pub const GRADIENT_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MinimizerError {
    #[error("no convergence after {iterations} iterations (|grad| = {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("stationary point at ({plus}, {minus}) is not a minimum (Hessian eigenvalues {eigenvalues:?})")]
    SaddlePoint { plus: f64, minus: f64, eigenvalues: [f64; 2] },
    #[error("no double well for weak-junction ratio {0} (needs > 0.5)")]
    NoDoubleWell(f64),
    #[error("alpha is defined at f = 0.5, got f = {0}")]
    NotAtDegeneracy(f64),
    #[error("sweep point u2/u1 = {ratio}: {source}")]
    SweepPoint {
        ratio: f64,
        #[source]
        source: Box<MinimizerError>,
    },
    #[error("need at least {needed} sweep points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Well {
    Left,
    Right,
}

/// A located minimum of the reduced potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumRecord {
    pub position: ReducedPhases,
    /// Potential value including the phase-independent bias offset, units of `E_J`.
    pub value: f64,
    /// Value without the phase-independent bias offset.
    pub phase_value: f64,
    pub hessian_eigenvalues: [f64; 2],
    pub well: Well,
    /// Junction phases in actual labels.
    pub junction_phases: [f64; 3],
    /// Segment currents `I'_i / I_c = -(e_i / e_w) sin φ_i`, actual labels.
    pub loop_currents: [f64; 3],
    pub gradient_norm: f64,
    pub iterations: usize,
}

impl MinimumRecord {
    /// Port current implied by current conservation, `I'_i - I'_{i-1}`.
    pub fn kcl_port_current(&self, port: usize) -> f64 {
        let prev = if port == 1 { 3 } else { port - 1 };
        self.loop_currents[port - 1] - self.loop_currents[prev - 1]
    }
}

fn norm(g: [f64; 2]) -> f64 {
    g[0].hypot(g[1])
}

fn solve2(h: [[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    [(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det]
}

/// Damped Newton step: the Hessian is shifted to be positive definite when needed.
fn descent_direction(h: [[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    let [lo, hi] = symmetric_eigenvalues(h);
    let floor = 1e-3 * hi.abs().max(1.0);
    let shift = if lo < floor { floor - lo } else { 0.0 };
    let shifted = [[h[0][0] + shift, h[0][1]], [h[1][0], h[1][1] + shift]];
    let step = solve2(shifted, g);
    [-step[0], -step[1]]
}

fn record(pot: &ReducedPotential, cfg: &CouplerConfig, x: ReducedPhases, start_sign: f64, iterations: usize) -> MinimumRecord {
    let junction_phases = pot.full_phases(x);
    let unit = cfg.current_unit_ratio();
    let mut loop_currents = [0.0; 3];
    for (i, phi) in junction_phases.iter().enumerate() {
        loop_currents[i] = -cfg.ratio(i + 1) / unit * phi.sin();
    }
    let sign = if x.plus != 0.0 { x.plus.signum() } else { start_sign };
    MinimumRecord {
        position: x,
        value: pot.value(x),
        phase_value: pot.phase_value(x),
        hessian_eigenvalues: symmetric_eigenvalues(pot.hessian(x)),
        well: if sign < 0.0 { Well::Left } else { Well::Right },
        junction_phases,
        loop_currents,
        gradient_norm: norm(pot.gradient(x)),
        iterations,
    }
}

/// Newton iteration with Armijo backtracking from `start`.
pub fn find_local_minimum(
    start: ReducedPhases,
    cfg: &CouplerConfig,
    bias: &BiasCurrents,
) -> Result<MinimumRecord, MinimizerError> {
    let pot = ReducedPotential::new(cfg, bias)?;
    minimize(&pot, cfg, start)
}

fn minimize(pot: &ReducedPotential, cfg: &CouplerConfig, start: ReducedPhases) -> Result<MinimumRecord, MinimizerError> {
    let mut x = start;
    let mut g = pot.gradient(x);
    let mut iterations = 0;
    while norm(g) >= GRADIENT_TOL {
        if iterations == MAX_ITERATIONS {
            return Err(MinimizerError::NonConvergence { iterations, gradient_norm: norm(g) });
        }
        iterations += 1;
        let hess = pot.hessian(x);
        let convex = symmetric_eigenvalues(hess)[0] > 0.0;
        let d = descent_direction(hess, g);
        let slope = g[0] * d[0] + g[1] * d[1];
        let f0 = pot.value(x);
        let g0 = norm(g);
        // Near the minimum value differences fall below rounding, so in a convex
        // region a step that shrinks the gradient is accepted as well.
        let accept = |p: ReducedPhases, t: f64| {
            pot.value(p) <= f0 + 1e-4 * t * slope || (convex && norm(pot.gradient(p)) < g0)
        };
        let mut t = 1.0;
        let mut next = ReducedPhases::new(x.plus + d[0], x.minus + d[1]);
        while !accept(next, t) && t > 1e-12 {
            t *= 0.5;
            next = ReducedPhases::new(x.plus + t * d[0], x.minus + t * d[1]);
        }
        if t <= 1e-12 {
            break;
        }
        x = next;
        g = pot.gradient(x);
    }
    if norm(g) >= GRADIENT_TOL {
        return Err(MinimizerError::NonConvergence { iterations, gradient_norm: norm(g) });
    }
    let eig = symmetric_eigenvalues(pot.hessian(x));
    if eig[0] <= 0.0 {
        return Err(MinimizerError::SaddlePoint { plus: x.plus, minus: x.minus, eigenvalues: eig });
    }
    // One extra Newton step pushes the residual to rounding level.
    let step = solve2(pot.hessian(x), g);
    let polished = ReducedPhases::new(x.plus - step[0], x.minus - step[1]);
    if norm(pot.gradient(polished)) < norm(g) {
        x = polished;
    }
    Ok(record(pot, cfg, x, start.plus.signum(), iterations))
}

/// Lowest point of a coarse grid over `φ+ ∈ (0, π)`, `φ- ∈ [-π/2, π/2]`.
fn right_well_seed(pot: &ReducedPotential) -> ReducedPhases {
    let mut best = (ReducedPhases::new(PI / 3.0, 0.0), f64::INFINITY);
    for a in 1..180 {
        for b in 0..=90 {
            let x = ReducedPhases::new(PI * a as f64 / 180.0, -PI / 2.0 + PI * b as f64 / 90.0);
            let v = pot.value(x);
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    best.0
}

/// Minimum of the right well (`φ+ > 0`), seeded from a coarse grid.
pub fn find_right_well(cfg: &CouplerConfig, bias: &BiasCurrents) -> Result<MinimumRecord, MinimizerError> {
    let pot = ReducedPotential::new(cfg, bias)?;
    minimize(&pot, cfg, right_well_seed(&pot))
}

/// `α = |φ+,min|` at zero bias and `f = 0.5`.
pub fn extract_alpha(cfg: &CouplerConfig) -> Result<f64, MinimizerError> {
    if (cfg.frustration() - 0.5).abs() > 1e-12 {
        return Err(MinimizerError::NotAtDegeneracy(cfg.frustration()));
    }
    let e = cfg.current_unit_ratio();
    if e <= 0.5 {
        return Err(MinimizerError::NoDoubleWell(e));
    }
    let min = find_local_minimum(ReducedPhases::new(PI / 3.0, 0.0), cfg, &BiasCurrents::zero(3))?;
    if min.position.plus.abs() < 1e-6 {
        return Err(MinimizerError::NoDoubleWell(e));
    }
    Ok(min.position.plus.abs())
}

/// One row of the output-current sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    /// `U_min` without the phase-independent bias offset.
    pub u_min: f64,
    pub phi_plus_min: f64,
    pub phi_minus_min: f64,
    pub u3: f64,
    pub minimum: MinimumRecord,
}

/// Right-well minimum as the output current `u2` runs over `u2/u1 ∈ [-1, 0]`,
/// with `u3 = -u1 - u2`. Currents are given in the weak junction's frame:
/// `u1` enters port `k`, `u2` port `k+1` and `u3` port `k+2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub u1: f64,
    pub current_ratio: f64,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: [&str; 5] = ["u2_over_u1", "u_min", "phi_plus_min", "phi_minus_min", "u3"];

impl SweepTable {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(SWEEP_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([r.ratio, r.u_min, r.phi_plus_min, r.phi_minus_min, r.u3].map(crate::format_float))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sweep_bias(cfg: &CouplerConfig, u1: f64, ratio: f64) -> Result<BiasCurrents, ConfigError> {
    let [p1, p2, p3] = frame_labels(cfg.weak_index().unwrap_or(1));
    let u2 = ratio * u1;
    let mut u = vec![0.0; 3];
    u[p1 - 1] = u1;
    u[p2 - 1] = u2;
    u[p3 - 1] = -u1 - u2;
    BiasCurrents::dimensionless(u)
}

pub fn sweep_ratios(points: usize) -> Vec<f64> {
    (0..points).map(|i| -1.0 + i as f64 / (points - 1) as f64).collect()
}

fn sweep_over(cfg: &CouplerConfig, u1: f64, ratios: &[f64]) -> Result<Vec<SweepRow>, MinimizerError> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(ratios.len());
    let mut warm: Option<ReducedPhases> = None;
    for &ratio in ratios {
        let wrap = |source| MinimizerError::SweepPoint { ratio, source: Box::new(source) };
        let bias = sweep_bias(cfg, u1, ratio).map_err(|e| wrap(e.into()))?;
        let pot = ReducedPotential::new(cfg, &bias).map_err(|e| wrap(e.into()))?;
        let start = warm.unwrap_or_else(|| right_well_seed(&pot));
        let min = minimize(&pot, cfg, start).map_err(wrap)?;
        warm = Some(min.position);
        rows.push(SweepRow {
            ratio,
            u_min: min.phase_value,
            phi_plus_min: min.position.plus,
            phi_minus_min: min.position.minus,
            u3: -u1 - ratio * u1,
            minimum: min,
        });
    }
    Ok(rows)
}

/// Continuation sweep; each point warm-starts from the previous one.
pub fn sweep_output_current(cfg: &CouplerConfig, u1: f64, points: usize) -> Result<SweepTable, MinimizerError> {
    if points < 2 {
        return Err(MinimizerError::TooFewPoints { needed: 2, got: points });
    }
    let rows = sweep_over(cfg, u1, &sweep_ratios(points))?;
    Ok(SweepTable { u1, current_ratio: cfg.current_unit_ratio(), rows })
}

/// Same grid as [`sweep_output_current`], traversed from `u2 = 0` down to
/// `u2 = -u1`; rows are returned in ascending order.
pub fn sweep_output_current_reversed(cfg: &CouplerConfig, u1: f64, points: usize) -> Result<SweepTable, MinimizerError> {
    if points < 2 {
        return Err(MinimizerError::TooFewPoints { needed: 2, got: points });
    }
    let mut ratios = sweep_ratios(points);
    ratios.reverse();
    let mut rows = sweep_over(cfg, u1, &ratios)?;
    rows.reverse();
    Ok(SweepTable { u1, current_ratio: cfg.current_unit_ratio(), rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopePoint {
    pub ratio: f64,
    /// Central difference of `U_min` with respect to `u2`.
    pub finite_difference: f64,
    /// `e_w (φ+,min + φ-,min)`.
    pub envelope: f64,
}

impl SlopePoint {
    pub fn relative_deviation(&self) -> f64 {
        if self.finite_difference == 0.0 && self.envelope == 0.0 {
            0.0
        } else {
            ((self.finite_difference - self.envelope) / self.finite_difference).abs()
        }
    }
}

/// Slope of `U_min` along the sweep at every interior row.
///
/// Differentiating the reduced potential at fixed `u1` with `u3 = -u1 - u2`
/// gives `∂U/∂u2 = e_w (φ+ + φ- - 2π(m+f)/3)`; the last term is the
/// phase-independent offset that `U_min` excludes, so the identity checked
/// here is `dU_min/du2 = e_w (φ+,min + φ-,min)`.
///
/// For `u1 = 0` every row is the same point and the slope is reported with
/// respect to the ratio instead, which is zero.
pub fn slope_u_min(table: &SweepTable) -> Result<Vec<SlopePoint>, MinimizerError> {
    let rows = &table.rows;
    if rows.len() < 3 {
        return Err(MinimizerError::TooFewPoints { needed: 3, got: rows.len() });
    }
    let scale = if table.u1 == 0.0 { 1.0 } else { table.u1 };
    Ok(rows
        .windows(3)
        .map(|w| {
            let du = (w[2].ratio - w[0].ratio) * scale;
            let envelope = if table.u1 == 0.0 {
                0.0
            } else {
                table.current_ratio * (w[1].phi_plus_min + w[1].phi_minus_min)
            };
            SlopePoint { ratio: w[1].ratio, finite_difference: (w[2].u_min - w[0].u_min) / du, envelope }
        })
        .collect())
}
