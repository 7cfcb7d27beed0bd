//! Effective potential of the coupler loop.
//!
//! The full form keeps the loop inductive energy and works for any number of
//! ports. The reduced form is specific to three ports: the fluxoid constraint
//! `Σ φ_i = 2π(m + f)` eliminates the weak junction's phase and the two strong
//! junctions are described by `φ± = (φ_a ± φ_b) / 2`.
//!
//! For a weak junction `k` the reduced frame is rotated so that frame label 1
//! is junction `k`, label 2 is `k+1` and label 3 is `k+2` (cyclically). The
//! coupling matrix depends only on `j - i (mod n)`, so the rotation is exact.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BiasCurrents, CouplerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the reduced potential needs a three-port coupler, got {0} ports")]
    NotThreePort(usize),
    #[error("need at least {min} ports, got {got}")]
    TooFewPorts { min: usize, got: usize },
    #[error("index {index} outside 1..={n}")]
    InvalidIndex { index: usize, n: usize },
    #[error("closed-form and KCL coupling coefficients disagree for n = {n} in row {row}")]
    CoefficientMismatch { n: usize, row: usize },
    #[error("KCL system is inconsistent (residual {0:e})")]
    InconsistentKcl(f64),
}

/// Reduced coordinates of a three-junction loop, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPhases {
    pub plus: f64,
    pub minus: f64,
}

impl ReducedPhases {
    pub fn new(plus: f64, minus: f64) -> Self {
        Self { plus, minus }
    }
}

/// Cyclic map from reduced-frame labels (1, 2, 3) to actual junction/port labels.
pub fn frame_labels(weak: usize) -> [usize; 3] {
    [weak, weak % 3 + 1, (weak + 1) % 3 + 1]
}

/// Reduced potential of a three-port coupler for a fixed bias.
#[derive(Debug, Clone)]
pub struct ReducedPotential {
    weak: usize,
    e_weak: f64,
    e_a: f64,
    e_b: f64,
    fluxoid: f64,
    current_ratio: f64,
    /// `u_1 - u_2` in the frame.
    tilt: f64,
    /// `2 u_3 - u_1 - u_2` in the frame.
    asymmetry: f64,
}

impl ReducedPotential {
    pub fn new(cfg: &CouplerConfig, bias: &BiasCurrents) -> Result<Self, PotentialError> {
        if cfg.n_ports() != 3 {
            return Err(PotentialError::NotThreePort(cfg.n_ports()));
        }
        if bias.len() != 3 {
            return Err(PotentialError::DimensionMismatch { expected: 3, got: bias.len() });
        }
        let weak = cfg.weak_index().unwrap_or(1);
        let [w, a, b] = frame_labels(weak);
        let (u1, u2, u3) = (bias.get(w), bias.get(a), bias.get(b));
        Ok(Self {
            weak,
            e_weak: cfg.ratio(w),
            e_a: cfg.ratio(a),
            e_b: cfg.ratio(b),
            fluxoid: cfg.fluxoid(),
            current_ratio: cfg.current_unit_ratio(),
            tilt: u1 - u2,
            asymmetry: 2.0 * u3 - u1 - u2,
        })
    }

    /// Junction that plays the role of junction 1 in the reduced frame.
    pub fn weak_junction(&self) -> usize {
        self.weak
    }

    /// Energy ratio multiplying the bias term (the current unit).
    pub fn current_ratio(&self) -> f64 {
        self.current_ratio
    }

    fn weak_phase(&self, plus: f64) -> f64 {
        2.0 * PI * self.fluxoid - 2.0 * plus
    }

    /// Potential in units of `E_J`, including the phase-independent bias offset.
    pub fn value(&self, x: ReducedPhases) -> f64 {
        let ReducedPhases { plus, minus } = x;
        -self.e_weak * self.weak_phase(plus).cos()
            - self.e_a * (plus + minus).cos()
            - self.e_b * (plus - minus).cos()
            - self.current_ratio / 3.0
                * ((-2.0 * PI * self.fluxoid + 3.0 * plus) * self.tilt + minus * self.asymmetry)
    }

    /// The bias contribution that does not depend on the phases,
    /// `(2π(m+f) e_w / 3)(u_1 - u_2)`.
    pub fn bias_offset(&self) -> f64 {
        2.0 * PI * self.fluxoid * self.current_ratio / 3.0 * self.tilt
    }

    /// [`value`](Self::value) without [`bias_offset`](Self::bias_offset).
    pub fn phase_value(&self, x: ReducedPhases) -> f64 {
        self.value(x) - self.bias_offset()
    }

    pub fn gradient(&self, x: ReducedPhases) -> [f64; 2] {
        let ReducedPhases { plus, minus } = x;
        let s_sum = (plus + minus).sin();
        let s_diff = (plus - minus).sin();
        let d_plus = -2.0 * self.e_weak * self.weak_phase(plus).sin() + self.e_a * s_sum + self.e_b * s_diff
            - self.current_ratio * self.tilt;
        let d_minus = self.e_a * s_sum - self.e_b * s_diff - self.current_ratio / 3.0 * self.asymmetry;
        [d_plus, d_minus]
    }

    pub fn hessian(&self, x: ReducedPhases) -> [[f64; 2]; 2] {
        let ReducedPhases { plus, minus } = x;
        let c_sum = (plus + minus).cos();
        let c_diff = (plus - minus).cos();
        let pp = 4.0 * self.e_weak * self.weak_phase(plus).cos() + self.e_a * c_sum + self.e_b * c_diff;
        let pm = self.e_a * c_sum - self.e_b * c_diff;
        let mm = self.e_a * c_sum + self.e_b * c_diff;
        [[pp, pm], [pm, mm]]
    }

    /// Junction phases in actual labels (index 0 is junction 1).
    pub fn full_phases(&self, x: ReducedPhases) -> [f64; 3] {
        let [w, a, b] = frame_labels(self.weak);
        let mut phi = [0.0; 3];
        phi[w - 1] = self.weak_phase(x.plus);
        phi[a - 1] = x.plus + x.minus;
        phi[b - 1] = x.plus - x.minus;
        phi
    }

    /// Reduced coordinates of actual junction phases; ignores the weak phase.
    pub fn reduce(&self, phases: &[f64; 3]) -> ReducedPhases {
        let [_, a, b] = frame_labels(self.weak);
        let (pa, pb) = (phases[a - 1], phases[b - 1]);
        ReducedPhases::new(0.5 * (pa + pb), 0.5 * (pa - pb))
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn symmetric_eigenvalues(h: [[f64; 2]; 2]) -> [f64; 2] {
    let mean = 0.5 * (h[0][0] + h[1][1]);
    let half_diff = 0.5 * (h[0][0] - h[1][1]);
    let r = half_diff.hypot(h[0][1]);
    [mean - r, mean + r]
}

/// Full effective potential of an `n`-junction loop, units of `E_J`.
///
/// `inductive_weight` is `Φ0² / (2 L'_s E_J)`.
pub fn u_eff_full(
    phases: &[f64],
    cfg: &CouplerConfig,
    bias: &BiasCurrents,
    inductive_weight: f64,
) -> Result<f64, PotentialError> {
    let n = cfg.n_ports();
    if phases.len() != n {
        return Err(PotentialError::DimensionMismatch { expected: n, got: phases.len() });
    }
    if bias.len() != n {
        return Err(PotentialError::DimensionMismatch { expected: n, got: bias.len() });
    }
    let fluxoid_gap = cfg.fluxoid() - phases.iter().sum::<f64>() / (2.0 * PI);
    let inductive = inductive_weight * fluxoid_gap * fluxoid_gap;
    let junctions: f64 = phases
        .iter()
        .zip(cfg.junction_ratios())
        .map(|(phi, e)| e * (1.0 - phi.cos()))
        .sum();
    let coeffs = CouplingCoefficients::closed_form(n)?;
    let u = bias.values();
    let mut bias_term = 0.0;
    for (j, phi) in phases.iter().enumerate() {
        let row: f64 = (0..n).map(|i| coeffs.get(j + 1, i + 1) * u[i]).sum();
        bias_term += phi * row;
    }
    Ok(inductive + junctions - cfg.current_unit_ratio() / n as f64 * bias_term)
}

/// Coefficients `c[j][i]` of `φ_j u_i` in the bias term of the full potential,
/// which reads `-(e_w / n) Σ_ij c[j][i] φ_j u_i`.
///
/// Rows are only meaningful up to an additive constant because `Σ u_i = 0`;
/// the canonical representative has `c[j][j] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCoefficients {
    matrix: DMatrix<f64>,
}

impl CouplingCoefficients {
    /// `c[j][i] = (n - i + j) mod n`.
    pub fn closed_form(n: usize) -> Result<Self, PotentialError> {
        if n < 2 {
            return Err(PotentialError::TooFewPorts { min: 2, got: n });
        }
        let matrix = DMatrix::from_fn(n, n, |j, i| ((n - (i + 1) + (j + 1)) % n) as f64);
        Ok(Self { matrix })
    }

    /// Derives the coefficients from current conservation around the loop.
    ///
    /// Segment currents obey `I'_i = I'_{i-1} + I_i`. The loop-average current
    /// is fixed by the fluxoid term, so the remaining part `D_j` (zero mean) is
    /// solved for each port-current basis vector. The junction equation
    /// `I'_j = -I_cj sin φ_j - C'_j V̇_j` then gives a bias force `-D_j` on `φ_j`,
    /// which is `(1/n) Σ_i c[j][i] I_i`.
    pub fn from_kcl_chain(n: usize) -> Result<Self, PotentialError> {
        if n < 2 {
            return Err(PotentialError::TooFewPorts { min: 2, got: n });
        }
        let mut system = DMatrix::<f64>::zeros(n + 1, n);
        for i in 0..n {
            system[(i, i)] += 1.0;
            system[(i, (i + n - 1) % n)] -= 1.0;
        }
        for j in 0..n {
            system[(n, j)] = 1.0;
        }
        let svd = system.clone().svd(true, true);

        // Response of the force on each junction to the basis currents e_i - e_n.
        let mut response = DMatrix::<f64>::zeros(n, n - 1);
        for i in 0..n - 1 {
            let mut rhs = DVector::<f64>::zeros(n + 1);
            rhs[i] = 1.0;
            rhs[n - 1] = -1.0;
            let segment = svd.solve(&rhs, 1e-12).map_err(|_| PotentialError::InconsistentKcl(f64::NAN))?;
            let residual = (&system * &segment - &rhs).norm();
            if residual > 1e-9 {
                return Err(PotentialError::InconsistentKcl(residual));
            }
            for j in 0..n {
                response[(j, i)] = -(n as f64) * segment[j];
            }
        }

        // Extend each row from the Σ u = 0 subspace with c[j][j] = 0:
        // response[j][i] = c[j][i] - c[j][n].
        let mut matrix = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let last = if j == n - 1 { 0.0 } else { -response[(j, j)] };
            for i in 0..n {
                matrix[(j, i)] = if i == n - 1 { last } else { response[(j, i)] + last };
            }
        }
        Ok(Self { matrix })
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `c[j][i]`, 1-based.
    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.matrix[(j - 1, i - 1)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Each row shifted so that its diagonal entry is zero.
    pub fn canonical(&self) -> Self {
        let n = self.n();
        Self { matrix: DMatrix::from_fn(n, n, |j, i| self.matrix[(j, i)] - self.matrix[(j, j)]) }
    }

    /// First row index (1-based) where the two matrices differ by more than a
    /// per-row constant, if any.
    pub fn gauge_mismatch(&self, other: &Self, tol: f64) -> Option<usize> {
        if self.n() != other.n() {
            return Some(0);
        }
        (0..self.n()).find_map(|j| {
            let d0 = self.matrix[(j, 0)] - other.matrix[(j, 0)];
            let bad = (0..self.n()).any(|i| (self.matrix[(j, i)] - other.matrix[(j, i)] - d0).abs() > tol);
            bad.then_some(j + 1)
        })
    }

    /// Force prefactors for the two-resonator bias `I = (I_1, -I_1, 0, ...)`:
    /// the force on `φ_j` is `p_j (Φ0 / 4πn)(I_1 - I_2)` with `p_j = c[j][1] - c[j][2]`.
    pub fn two_port_prefactors(&self) -> Vec<f64> {
        (1..=self.n()).map(|j| self.get(j, 1) - self.get(j, 2)).collect()
    }
}

/// Closed-form coefficients, cross-checked against the KCL derivation.
pub fn derive_coupling_coefficients(n: usize) -> Result<CouplingCoefficients, PotentialError> {
    let closed = CouplingCoefficients::closed_form(n)?;
    let derived = CouplingCoefficients::from_kcl_chain(n)?;
    if let Some(row) = closed.gauge_mismatch(&derived, 1e-9) {
        return Err(PotentialError::CoefficientMismatch { n, row });
    }
    Ok(closed)
}

/// Coefficients `n - 1 - 2((n - i + k) mod n)` of `φ I_i` in the bias term at
/// a minimum where all strong junctions share one phase `φ`.
pub fn minimum_bias_coefficients(n: usize, weak: usize) -> Result<Vec<i64>, PotentialError> {
    if weak == 0 || weak > n {
        return Err(PotentialError::InvalidIndex { index: weak, n });
    }
    let n_i = n as i64;
    Ok((1..=n_i).map(|i| n_i - 1 - 2 * ((n_i - i + weak as i64) % n_i)).collect())
}

/// Ports whose currents remain in the minimum bias term after using `Σ I_i = 0`
/// to eliminate as many as possible.
pub fn reduced_bias_current_support(n: usize, weak: usize) -> Result<BTreeSet<usize>, PotentialError> {
    if n < 3 {
        return Err(PotentialError::TooFewPorts { min: 3, got: n });
    }
    let coeffs = minimum_bias_coefficients(n, weak)?;
    let support_for = |shift: i64| -> BTreeSet<usize> {
        coeffs.iter().enumerate().filter(|(_, &c)| c != shift).map(|(i, _)| i + 1).collect()
    };
    // Shifting by s corresponds to eliminating a current whose coefficient is s.
    let mut best = support_for(0);
    for &shift in &coeffs {
        let candidate = support_for(shift);
        if candidate.len() < best.len() {
            best = candidate;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg() -> CouplerConfig {
        CouplerConfig::three_junction(1, 0.8, 0.5).unwrap()
    }

    fn alpha() -> f64 {
        0.625_f64.acos()
    }

    #[test]
    fn reduced_values_at_simple_points() {
        let pot = ReducedPotential::new(&cfg(), &BiasCurrents::zero(3)).unwrap();
        assert_abs_diff_eq!(pot.value(ReducedPhases::new(0.0, 0.0)), -1.2, epsilon = 1e-14);
        assert_abs_diff_eq!(pot.value(ReducedPhases::new(PI / 3.0, 0.0)), -1.4, epsilon = 1e-14);
        assert_abs_diff_eq!(pot.value(ReducedPhases::new(alpha(), 0.0)), -1.425, epsilon = 1e-14);
    }

    #[test]
    fn alpha_is_the_one_dimensional_grid_minimum() {
        let pot = ReducedPotential::new(&cfg(), &BiasCurrents::zero(3)).unwrap();
        let steps = 200_000;
        let (best, _) = (0..=steps)
            .map(|s| {
                let p = PI * s as f64 / steps as f64;
                (p, pot.value(ReducedPhases::new(p, 0.0)))
            })
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        assert!((best - alpha()).abs() < 2.0 * PI / steps as f64);
    }

    #[test]
    fn gradient_vanishes_at_stationary_points() {
        let pot = ReducedPotential::new(&cfg(), &BiasCurrents::zero(3)).unwrap();
        let g = pot.gradient(ReducedPhases::new(alpha(), 0.0));
        assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10);
        let g = pot.gradient(ReducedPhases::new(0.0, 0.0));
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
    }

    #[test]
    fn hessian_classification() {
        let pot = ReducedPotential::new(&cfg(), &BiasCurrents::zero(3)).unwrap();
        let at_min = symmetric_eigenvalues(pot.hessian(ReducedPhases::new(alpha(), 0.0)));
        assert!(at_min[0] > 0.0);
        let origin = pot.hessian(ReducedPhases::new(0.0, 0.0));
        assert_abs_diff_eq!(origin[0][0], -4.0 * 0.8 + 2.0, epsilon = 1e-14);
        assert!(symmetric_eigenvalues(origin)[0] < 0.0);
        for p in [0.1, 0.7, 1.3, -2.0] {
            assert_eq!(pot.hessian(ReducedPhases::new(p, 0.0))[0][1], 0.0);
        }
    }

    fn central_difference(pot: &ReducedPotential, x: ReducedPhases, h: f64) -> [f64; 2] {
        let f = |p, m| pot.value(ReducedPhases::new(p, m));
        [
            (f(x.plus + h, x.minus) - f(x.plus - h, x.minus)) / (2.0 * h),
            (f(x.plus, x.minus + h) - f(x.plus, x.minus - h)) / (2.0 * h),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn gradient_matches_finite_differences(
            p in -PI..PI, m in -PI..PI,
            e in 0.3f64..1.0, f in 0.0f64..1.0, weak in 1usize..4,
            u1 in -0.1f64..0.1, u2 in -0.1f64..0.1,
        ) {
            let cfg = CouplerConfig::three_junction(weak, e, f).unwrap();
            let bias = BiasCurrents::dimensionless(vec![u1, u2, -u1 - u2]).unwrap();
            let pot = ReducedPotential::new(&cfg, &bias).unwrap();
            let x = ReducedPhases::new(p, m);
            let g = pot.gradient(x);
            let fd = central_difference(&pot, x, 1e-5);
            for k in 0..2 {
                prop_assert!((g[k] - fd[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
            }
            // Hessian columns against differences of the analytic gradient.
            let h = pot.hessian(x);
            let step = 1e-5;
            let gp = pot.gradient(ReducedPhases::new(p + step, m));
            let gm = pot.gradient(ReducedPhases::new(p - step, m));
            prop_assert!(((gp[0] - gm[0]) / (2.0 * step) - h[0][0]).abs() < 1e-6);
            prop_assert!(((gp[1] - gm[1]) / (2.0 * step) - h[1][0]).abs() < 1e-6);
        }

        #[test]
        fn zero_bias_symmetries(p in -PI..PI, m in -PI..PI, e in 0.3f64..1.0, f in 0.0f64..1.0) {
            let cfg = CouplerConfig::three_junction(1, e, f).unwrap();
            let pot = ReducedPotential::new(&cfg, &BiasCurrents::zero(3)).unwrap();
            let v = pot.value(ReducedPhases::new(p, m));
            prop_assert!((v - pot.value(ReducedPhases::new(p, -m))).abs() < 1e-12);
            prop_assert!((v - pot.value(ReducedPhases::new(p + 2.0 * PI, m))).abs() < 1e-12);
            prop_assert!((v - pot.value(ReducedPhases::new(p, m + 2.0 * PI))).abs() < 1e-12);
        }
    }

    #[test]
    fn full_potential_examples() {
        let cfg = cfg();
        let third = PI / 3.0;
        let v = u_eff_full(&[third; 3], &cfg, &BiasCurrents::zero(3), 1e3).unwrap();
        assert_abs_diff_eq!(v, 1.4, epsilon = 1e-12);
        let unfrustrated = CouplerConfig::three_junction(1, 0.8, 0.0).unwrap();
        assert_eq!(u_eff_full(&[0.0; 3], &unfrustrated, &BiasCurrents::zero(3), 1e3).unwrap(), 0.0);
        assert!(matches!(
            u_eff_full(&[0.0; 2], &cfg, &BiasCurrents::zero(3), 1.0),
            Err(PotentialError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn full_and_reduced_differ_by_a_constant_on_the_constraint_surface() {
        for weak in 1..=3 {
            let cfg = CouplerConfig::three_junction(weak, 0.8, 0.5).unwrap();
            let bias = BiasCurrents::dimensionless(vec![0.025, -0.025, 0.0]).unwrap();
            let pot = ReducedPotential::new(&cfg, &bias).unwrap();
            let constant: f64 = cfg.junction_ratios().iter().sum();
            for a in 0..25 {
                for b in 0..25 {
                    let x = ReducedPhases::new(-PI + a as f64 * 0.26, -PI + b as f64 * 0.26);
                    let full = u_eff_full(&pot.full_phases(x), &cfg, &bias, 1e4).unwrap();
                    assert_abs_diff_eq!(full - pot.value(x), constant, epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn reduce_inverts_full_phases() {
        let pot = ReducedPotential::new(&CouplerConfig::three_junction(2, 0.7, 0.5).unwrap(), &BiasCurrents::zero(3)).unwrap();
        let x = ReducedPhases::new(0.4, -0.2);
        let back = pot.reduce(&pot.full_phases(x));
        assert_abs_diff_eq!(back.plus, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(back.minus, -0.2, epsilon = 1e-15);
        let phases = pot.full_phases(x);
        assert_abs_diff_eq!(phases.iter().sum::<f64>(), PI, epsilon = 1e-14);
    }

    #[test]
    fn closed_form_rows() {
        let c4 = CouplingCoefficients::closed_form(4).unwrap();
        assert_eq!(c4.rows()[0], vec![0.0, 3.0, 2.0, 1.0]);
        let c3 = CouplingCoefficients::closed_form(3).unwrap();
        assert_eq!(c3.rows(), vec![vec![0.0, 2.0, 1.0], vec![1.0, 0.0, 2.0], vec![2.0, 1.0, 0.0]]);
        assert_eq!(c3.canonical(), c3);
    }

    #[test]
    fn kcl_derivation_agrees_with_closed_form() {
        for n in 2..=8 {
            let closed = CouplingCoefficients::closed_form(n).unwrap();
            let kcl = CouplingCoefficients::from_kcl_chain(n).unwrap();
            assert_eq!(closed.gauge_mismatch(&kcl, 1e-9), None, "n = {n}");
            assert!(derive_coupling_coefficients(n).is_ok());
        }
    }

    #[test]
    fn two_port_prefactors() {
        let c = derive_coupling_coefficients(3).unwrap();
        assert_eq!(c.two_port_prefactors(), vec![-2.0, 1.0, 1.0]);
        let c2 = derive_coupling_coefficients(2).unwrap();
        assert_eq!(c2.two_port_prefactors(), vec![-1.0, 1.0]);
    }

    #[test]
    fn gauge_mismatch_detects_non_constant_shift() {
        let c = CouplingCoefficients::closed_form(3).unwrap();
        let mut m = c.matrix().clone();
        m[(1, 2)] += 1.0;
        assert_eq!(c.gauge_mismatch(&CouplingCoefficients::from_matrix(m), 1e-9), Some(2));
        let mut shifted = c.matrix().clone();
        shifted.row_mut(0).add_scalar_mut(5.0);
        assert_eq!(c.gauge_mismatch(&CouplingCoefficients::from_matrix(shifted), 1e-9), None);
    }

    #[test]
    fn minimum_coefficients_match_coefficient_matrix() {
        // With φ_i = φ for i ≠ k and φ_k = 2πf - (n-1)φ, the φ-linear bias
        // coefficient of I_i is (1/n)[Σ_{j≠k} c[j][i] - (n-1) c[k][i]],
        // which should be half the closed-form expression.
        for n in 3..=8 {
            let c = CouplingCoefficients::closed_form(n).unwrap();
            for k in 1..=n {
                let closed = minimum_bias_coefficients(n, k).unwrap();
                for i in 1..=n {
                    let others: f64 = (1..=n).filter(|&j| j != k).map(|j| c.get(j, i)).sum();
                    let from_matrix = 2.0 * (others - (n as f64 - 1.0) * c.get(k, i)) / n as f64;
                    assert_abs_diff_eq!(from_matrix, closed[i - 1] as f64, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn support_examples() {
        assert_eq!(reduced_bias_current_support(3, 1).unwrap(), BTreeSet::from([1, 2]));
        assert_eq!(reduced_bias_current_support(3, 2).unwrap(), BTreeSet::from([2, 3]));
        assert_eq!(reduced_bias_current_support(3, 3).unwrap(), BTreeSet::from([1, 3]));
        assert!(reduced_bias_current_support(4, 1).unwrap().len() > 2);
        assert!(reduced_bias_current_support(2, 1).is_err());
        assert!(reduced_bias_current_support(4, 5).is_err());
        assert_eq!(minimum_bias_coefficients(3, 1).unwrap(), vec![2, -2, 0]);
    }

    #[test]
    fn not_three_port() {
        let cfg = CouplerConfig::new(vec![0.8, 1.0, 1.0, 1.0], 0.5, 0).unwrap();
        assert_eq!(
            ReducedPotential::new(&cfg, &BiasCurrents::zero(4)).unwrap_err(),
            PotentialError::NotThreePort(4)
        );
    }
}
