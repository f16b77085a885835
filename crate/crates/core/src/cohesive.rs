//! Anisotropic bilinear cohesive law and interface stabilization data.
//!
//! Local interface quantities are stored as `(tangential, normal)` pairs.
//! Separations follow the opening-positive convention: `δn > 0` opens the
//! interface and `δn < 0` is interpenetration, which the Macaulay bracket
//! keeps out of the damage driver and out of the damaged normal stiffness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{spectral_norm, PlaneStressMatrix};

/// A pair of components in the local interface frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Local {
    pub t: f64,
    pub n: f64,
}

impl Local {
    pub const ZERO: Local = Local { t: 0.0, n: 0.0 };

    pub const fn new(t: f64, n: f64) -> Self {
        Self { t, n }
    }
}

/// Parameters of the six-constant mixed-mode bilinear law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohesiveParams {
    /// Initial normal stiffness (N/mm³).
    pub alpha_n: f64,
    /// Initial tangential stiffness (N/mm³).
    pub alpha_t: f64,
    /// Mode I critical energy release rate (N/mm).
    #[serde(rename = "G_IC")]
    pub g_ic: f64,
    /// Mode II critical energy release rate (N/mm).
    #[serde(rename = "G_IIC")]
    pub g_iic: f64,
    /// Normal strength (N/mm²).
    pub sigma_max: f64,
    /// Shear strength (N/mm²).
    pub tau_max: f64,
}

impl CohesiveParams {
    /// HTA/6376C interface data with the given initial stiffnesses.
    pub const fn hta_6376c(alpha_n: f64, alpha_t: f64) -> Self {
        Self { alpha_n, alpha_t, g_ic: 0.26, g_iic: 1.002, sigma_max: 30.0, tau_max: 60.0 }
    }

    pub fn with_stiffness(mut self, alpha_n: f64, alpha_t: f64) -> Self {
        self.alpha_n = alpha_n;
        self.alpha_t = alpha_t;
        self
    }

    /// Positivity and finiteness of all six constants.
    pub fn validate_positive(&self) -> Result<()> {
        let fields = [
            ("alpha_n", self.alpha_n),
            ("alpha_t", self.alpha_t),
            ("G_IC", self.g_ic),
            ("G_IIC", self.g_iic),
            ("sigma_max", self.sigma_max),
            ("tau_max", self.tau_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidCohesive(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Full check, including `δc < δu` in both pure modes.
    pub fn validate(&self) -> Result<()> {
        self.validate_positive()?;
        if self.sigma_max * self.sigma_max / (2.0 * self.alpha_n) >= self.g_ic {
            return Err(Error::InvalidCohesive(
                "mode I onset energy exceeds G_IC (critical separation beyond ultimate)".into(),
            ));
        }
        if self.tau_max * self.tau_max / (2.0 * self.alpha_t) >= self.g_iic {
            return Err(Error::InvalidCohesive(
                "mode II onset energy exceeds G_IIC (critical separation beyond ultimate)".into(),
            ));
        }
        Ok(())
    }
}

impl Default for CohesiveParams {
    fn default() -> Self {
        Self::hta_6376c(1e6, 1e6)
    }
}

/// History carried by one interface integration point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeparationState {
    pub delta_n: f64,
    pub delta_t: f64,
    /// Largest equivalent separation reached so far.
    pub kappa: f64,
    pub damage: f64,
    /// Pre-cracked points keep `damage == 1` for the whole run.
    pub precracked: bool,
}

impl SeparationState {
    pub fn intact() -> Self {
        Self::default()
    }

    pub fn precracked() -> Self {
        Self { damage: 1.0, precracked: true, ..Self::default() }
    }

    pub fn separation(&self) -> Local {
        Local::new(self.delta_t, self.delta_n)
    }
}

/// `⟨x⟩ = max(0, x)`.
#[inline]
pub fn macaulay(x: f64) -> f64 {
    x.max(0.0)
}

/// `⟨δn⟩/δn`, with `δn = 0` counted as closed.
#[inline]
fn tension_indicator(delta_n: f64) -> f64 {
    if delta_n <= 0.0 {
        0.0
    } else {
        1.0
    }
}

/// `δe = √(⟨δn⟩² + δτ²)`.
pub fn equivalent_separation(delta_n: f64, delta_t: f64) -> f64 {
    macaulay(delta_n).hypot(delta_t)
}

/// Mixed-mode onset and ultimate equivalent separations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSeparations {
    pub critical: f64,
    pub ultimate: f64,
}

/// Onset and failure separations for the current mode mix.
///
/// The direction cosines use the bracketed normal separation, so pure
/// interpenetration with sliding behaves as mode II.
pub fn mode_separations(delta_n: f64, delta_t: f64, params: &CohesiveParams) -> Result<ModeSeparations> {
    let de = equivalent_separation(delta_n, delta_t);
    if !(de > 0.0) {
        return Err(Error::UndefinedDirection);
    }
    let cos1 = macaulay(delta_n) / de;
    let cos2 = delta_t / de;
    Ok(mode_separations_from_cosines(cos1, cos2, params))
}

pub(crate) fn mode_separations_from_cosines(cos1: f64, cos2: f64, p: &CohesiveParams) -> ModeSeparations {
    let inv_c = (p.alpha_n * cos1 / p.sigma_max).hypot(p.alpha_t * cos2 / p.tau_max);
    let critical = 1.0 / inv_c;
    let inv_u =
        p.alpha_n * critical * cos1 * cos1 / (2.0 * p.g_ic) + p.alpha_t * critical * cos2 * cos2 / (2.0 * p.g_iic);
    ModeSeparations { critical, ultimate: 1.0 / inv_u }
}

/// Bilinear damage as a function of the equivalent separation.
pub fn damage(delta_e: f64, critical: f64, ultimate: f64) -> f64 {
    if delta_e < critical {
        0.0
    } else if delta_e >= ultimate {
        1.0
    } else {
        let d = ultimate * (delta_e - critical) / (delta_e * (ultimate - critical));
        d.clamp(0.0, 1.0)
    }
}

/// Damage for history `kappa` at the mode mix of the given separation.
///
/// Never below the damage already stored in `state`.
pub fn damage_for_history(
    state: &SeparationState,
    kappa: f64,
    delta_n: f64,
    delta_t: f64,
    params: &CohesiveParams,
) -> f64 {
    let de = equivalent_separation(delta_n, delta_t);
    if state.precracked {
        1.0
    } else if de > 0.0 {
        let cos1 = macaulay(delta_n) / de;
        let cos2 = delta_t / de;
        let m = mode_separations_from_cosines(cos1, cos2, params);
        damage(kappa, m.critical, m.ultimate).max(state.damage)
    } else {
        state.damage
    }
}

/// Irreversible history update for a new separation.
///
/// The history variable is the largest equivalent separation reached;
/// onset/ultimate separations are taken at the current mode mix. Damage
/// never decreases, including when a mode change alone would lower it.
pub fn update_history(state: &SeparationState, delta_n: f64, delta_t: f64, params: &CohesiveParams) -> SeparationState {
    let kappa = state.kappa.max(equivalent_separation(delta_n, delta_t));
    let damage = damage_for_history(state, kappa, delta_n, delta_t, params);
    SeparationState { delta_n, delta_t, kappa, damage, precracked: state.precracked }
}

/// Secant stiffness `diag((1−d)ατ, (1−d⟨δn⟩/δn)αn)` at the given normal separation.
pub fn secant_stiffness_at(damage: f64, delta_n: f64, params: &CohesiveParams) -> Local {
    Local::new((1.0 - damage) * params.alpha_t, (1.0 - damage * tension_indicator(delta_n)) * params.alpha_n)
}

pub fn secant_stiffness(state: &SeparationState, params: &CohesiveParams) -> Local {
    secant_stiffness_at(state.damage, state.delta_n, params)
}

/// Cohesive traction (opening positive) for the stored separation.
pub fn cohesive_traction(state: &SeparationState, params: &CohesiveParams) -> Local {
    let k = secant_stiffness(state, params);
    Local::new(k.t * state.delta_t, k.n * state.delta_n)
}

/// Stabilization parameters and interface weights of one interface element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationData {
    pub beta_n: f64,
    pub beta_t: f64,
    /// Weight of the upper (Ω1) neighbour stress.
    pub gamma1: f64,
    /// Weight of the lower (Ω2) neighbour stress.
    pub gamma2: f64,
}

/// Diagonal stabilization matrix from a secant stiffness.
pub fn stabilization_from_secant(k: Local, beta_n: f64, beta_t: f64) -> Local {
    Local::new(beta_t / (k.t + beta_t), beta_n / (k.n + beta_n))
}

/// `S = diag(βτ/(ατ(1−d)+βτ), βn/(αn(1−d⟨δn⟩/δn)+βn))`.
///
/// The normal entry uses the compression-corrected stiffness, so under
/// contact it sees the undamaged normal stiffness.
pub fn stabilization_matrix(state: &SeparationState, params: &CohesiveParams, beta_n: f64, beta_t: f64) -> Local {
    stabilization_from_secant(secant_stiffness(state, params), beta_n, beta_t)
}

/// Coercivity-based estimate `β = 2(|D1|γ1²/A1 + |D2|γ2²/A2)·ℓ`, used for both directions.
pub fn stabilization_parameters(
    d1: &PlaneStressMatrix,
    d2: &PlaneStressMatrix,
    area1: f64,
    area2: f64,
    gamma1: f64,
    gamma2: f64,
    edge_len: f64,
) -> (f64, f64) {
    let beta =
        2.0 * (spectral_norm(d1) * gamma1 * gamma1 / area1 + spectral_norm(d2) * gamma2 * gamma2 / area2) * edge_len;
    (beta, beta)
}

/// Stiffness-weighted averaging weights; the stiffer or smaller side gets less weight.
pub fn interface_weights(d1: &PlaneStressMatrix, d2: &PlaneStressMatrix, area1: f64, area2: f64) -> (f64, f64) {
    let c1 = area1 / spectral_norm(d1);
    let c2 = area2 / spectral_norm(d2);
    let gamma1 = c1 / (c1 + c2);
    (gamma1, 1.0 - gamma1)
}

/// Cohesive stiffness needed to avoid artificial compliance: `α ≈ E·M/t`.
pub fn stiffness_estimate(e: f64, m: f64, t: f64) -> f64 {
    e * m / t
}

/// Energy per unit area dissipated at a point with the given history.
///
/// Evaluated along a proportional path at the last recorded mode mix; used
/// for energy bookkeeping, not in the residual.
pub fn dissipated_energy_density(state: &SeparationState, params: &CohesiveParams) -> f64 {
    if state.precracked || state.kappa <= 0.0 {
        return 0.0;
    }
    let de = equivalent_separation(state.delta_n, state.delta_t);
    let (cos1, cos2) = if de > 0.0 { (macaulay(state.delta_n) / de, state.delta_t / de) } else { (0.0, 1.0) };
    let m = mode_separations_from_cosines(cos1, cos2, params);
    // Equivalent stiffness along the path: t·δ = α_e δe².
    let alpha_e = params.alpha_n * cos1 * cos1 + params.alpha_t * cos2 * cos2;
    let kappa = state.kappa;
    if kappa <= m.critical {
        return 0.0;
    }
    let peak = alpha_e * m.critical;
    let reached = kappa.min(m.ultimate);
    // Area under the envelope up to `reached` minus the elastic energy still stored.
    let softening_traction = peak * (m.ultimate - reached) / (m.ultimate - m.critical);
    let absorbed = 0.5 * peak * m.critical + 0.5 * (peak + softening_traction) * (reached - m.critical);
    let stored = 0.5 * softening_traction * reached;
    (absorbed - stored).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{reduced_stiffness, LaminaProperties, PlyAngle};
    use proptest::prelude::*;

    fn table2(alpha: f64) -> CohesiveParams {
        CohesiveParams::hta_6376c(alpha, alpha)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn equivalent_separation_examples() {
        assert_eq!(equivalent_separation(0.0, 0.0), 0.0);
        assert_eq!(equivalent_separation(-5e-3, 4e-3), 4e-3);
        assert!(rel(equivalent_separation(3e-3, 4e-3), 5e-3) < 1e-15);
    }

    #[test]
    fn pure_mode_separations() {
        let p = table2(1e6);
        let m1 = mode_separations(1e-3, 0.0, &p).unwrap();
        assert!(rel(m1.critical, 3.0e-5) < 1e-12);
        assert!(rel(m1.ultimate, 1.7333333333e-2) < 1e-9);
        // ½·σmax·δu recovers G_IC.
        assert!(rel(0.5 * 30.0 * m1.ultimate, 0.26) < 1e-12);

        let m2 = mode_separations(0.0, 1e-3, &p).unwrap();
        assert!(rel(m2.critical, 6.0e-5) < 1e-12);
        assert!(rel(m2.ultimate, 3.34e-2) < 1e-12);
    }

    #[test]
    fn proportional_45_degree_separations() {
        let p = table2(1e6);
        let m = mode_separations(1e-3, 1e-3, &p).unwrap();
        assert!(rel(m.critical, 3.7948e-5) < 1e-4);
        assert!(rel(m.ultimate, 2.1759e-2) < 1e-4);
    }

    #[test]
    fn zero_separation_has_no_direction() {
        assert!(matches!(mode_separations(0.0, 0.0, &table2(1e6)), Err(Error::UndefinedDirection)));
        assert!(mode_separations(-1e-3, 0.0, &table2(1e6)).is_err());
    }

    #[test]
    fn damage_examples() {
        let (c, u) = (3e-5, 1.73333e-2);
        assert_eq!(damage(c / 2.0, c, u), 0.0);
        assert_eq!(damage(u, c, u), 1.0);
        let mid = 0.5 * (c + u);
        let d = damage(mid, c, u);
        assert!((d - 0.99827).abs() < 1e-5);
        let t = (1.0 - d) * 1e6 * mid;
        assert!(rel(t, 15.0) < 1e-9);
    }

    #[test]
    fn history_is_irreversible() {
        let p = table2(1e6);
        let m = mode_separations(1.0, 0.0, &p).unwrap();
        let mut s = SeparationState::intact();
        let mut last = 0.0;
        for i in 0..=200 {
            let dn = m.ultimate * i as f64 / 200.0;
            s = update_history(&s, dn, 0.0, &p);
            assert!(s.damage >= last);
            last = s.damage;
        }
        assert_eq!(s.damage, 1.0);

        let x = 0.5 * (m.critical + m.ultimate);
        let first = update_history(&SeparationState::intact(), x, 0.0, &p);
        let unloaded = update_history(&first, 0.0, 0.0, &p);
        let reloaded = update_history(&unloaded, x, 0.0, &p);
        assert_eq!(unloaded.damage, first.damage);
        assert_eq!(reloaded.damage, first.damage);
        assert_eq!(reloaded.kappa, first.kappa);

        let compressed = update_history(&first, -1.0, 0.0, &p);
        assert_eq!(compressed.kappa, first.kappa);
        assert_eq!(compressed.damage, first.damage);
    }

    #[test]
    fn precracked_point_stays_failed() {
        let p = table2(1e6);
        let s = update_history(&SeparationState::precracked(), 0.0, 0.0, &p);
        assert_eq!(s.damage, 1.0);
        let s = update_history(&s, -1e-4, 0.0, &p);
        assert_eq!(s.damage, 1.0);
    }

    #[test]
    fn traction_examples() {
        let p = table2(1e6);
        assert_eq!(cohesive_traction(&SeparationState::intact(), &p), Local::ZERO);

        let contact = SeparationState { delta_n: -1e-4, damage: 1.0, ..Default::default() };
        assert_eq!(cohesive_traction(&contact, &p).n, -100.0);

        let peak = update_history(&SeparationState::intact(), 3e-5, 0.0, &p);
        assert!(rel(cohesive_traction(&peak, &p).n, 30.0) < 1e-12);
    }

    #[test]
    fn secant_examples() {
        let p = CohesiveParams::hta_6376c(2e6, 1e6);
        let intact = SeparationState::intact();
        assert_eq!(secant_stiffness(&intact, &p), Local::new(1e6, 2e6));
        let open = SeparationState { delta_n: 1e-3, damage: 1.0, ..Default::default() };
        assert_eq!(secant_stiffness(&open, &p), Local::ZERO);
        let closed = SeparationState { delta_n: -1e-3, damage: 1.0, ..Default::default() };
        assert_eq!(secant_stiffness(&closed, &p), Local::new(0.0, 2e6));
    }

    #[test]
    fn stabilization_matrix_examples() {
        let p = table2(1e8);
        let s = stabilization_matrix(&SeparationState::intact(), &p, 1e30, 1e30);
        assert!((s.t - 1.0).abs() <= 1e-15 && (s.n - 1.0).abs() <= 1e-15);

        let open = SeparationState { delta_n: 1e-3, damage: 1.0, ..Default::default() };
        assert_eq!(stabilization_matrix(&open, &p, 1e6, 1e6), Local::new(1.0, 1.0));

        let s = stabilization_matrix(&SeparationState::intact(), &p, 1e8, 1e8);
        assert_eq!(s, Local::new(0.5, 0.5));
    }

    #[test]
    fn beta_and_weights() {
        let props = LaminaProperties::hta_6376c();
        let d0 = reduced_stiffness(&props, PlyAngle::Deg0).unwrap();
        let d90 = reduced_stiffness(&props, PlyAngle::Deg90).unwrap();

        let (g1, g2) = interface_weights(&d0, &d0, 0.01, 0.01);
        assert_eq!((g1, g2), (0.5, 0.5));
        let (beta, _) = stabilization_parameters(&d0, &d0, 0.01, 0.01, g1, g2, 0.1);
        assert!(rel(beta, 1.2104e6) < 1e-4);

        let (g0, g90) = interface_weights(&d0, &d90, 0.01, 0.01);
        assert!((g0 - 0.150).abs() < 1e-3);
        assert!((g90 - 0.850).abs() < 1e-3);

        let (tiny, _) = interface_weights(&d0, &d90, 1e-14, 0.01);
        assert!(tiny < 1e-9);

        // Equal isotropic sides on h×h squares: β = |D|/h.
        let iso = reduced_stiffness(&LaminaProperties::isotropic(200.0, 0.25), PlyAngle::Deg0).unwrap();
        let h = 0.3;
        let (beta, _) = stabilization_parameters(&iso, &iso, h * h, h * h, 0.5, 0.5, h);
        assert!(rel(beta, spectral_norm(&iso) / h) < 1e-14);

        let (b1, _) = stabilization_parameters(&d0, &d90, 0.02, 0.03, 0.3, 0.7, 0.1);
        let (b2, _) = stabilization_parameters(&d0, &d90, 0.04, 0.06, 0.3, 0.7, 0.1);
        assert!(rel(b2, 0.5 * b1) < 1e-14);
    }

    #[test]
    fn stiffness_estimates() {
        assert!(rel(stiffness_estimate(1.05e4, 100.0, 1.55), 6.774e5) < 1e-4);
        assert_eq!(stiffness_estimate(1.0, 1.0, 1.0), 1.0);
        assert!(rel(stiffness_estimate(1.05e4, 100.0, 0.1), 1.05e7) < 1e-14);
    }

    /// Trapezoid integral of the traction along a proportional path up to failure.
    fn work_to_failure(p: &CohesiveParams, cos1: f64, cos2: f64, steps: usize) -> (f64, f64) {
        let m = mode_separations_from_cosines(cos1, cos2, p);
        let mut s = SeparationState::intact();
        let (mut g1, mut g2) = (0.0, 0.0);
        let mut prev = Local::ZERO;
        let mut prev_sep = Local::ZERO;
        // Refine around the kink at onset so the trapezoid rule is exact there.
        let grid: Vec<f64> = (0..=steps)
            .map(|i| m.critical * i as f64 / steps as f64)
            .chain((1..=steps).map(|i| m.critical + (m.ultimate - m.critical) * i as f64 / steps as f64))
            .collect();
        for de in grid {
            s = update_history(&s, de * cos1, de * cos2, p);
            let t = cohesive_traction(&s, p);
            g1 += 0.5 * (t.n + prev.n) * (s.delta_n - prev_sep.n);
            g2 += 0.5 * (t.t + prev.t) * (s.delta_t - prev_sep.t);
            prev = t;
            prev_sep = s.separation();
        }
        (g1, g2)
    }

    #[test]
    fn pure_mode_energies() {
        let p = table2(1e6);
        let (g1, _) = work_to_failure(&p, 1.0, 0.0, 20_000);
        assert!(rel(g1, 0.26) < 1e-6, "G_I = {g1}");
        let (_, g2) = work_to_failure(&p, 0.0, 1.0, 20_000);
        assert!(rel(g2, 1.002) < 1e-6, "G_II = {g2}");
    }

    #[test]
    fn mixed_mode_interaction_is_linear() {
        let p = CohesiveParams::hta_6376c(1e6, 3e5);
        for k in 0..10 {
            let angle = (k as f64 + 0.5) / 10.0 * std::f64::consts::FRAC_PI_2;
            let (g1, g2) = work_to_failure(&p, angle.cos(), angle.sin(), 20_000);
            let criterion = g1 / p.g_ic + g2 / p.g_iic;
            assert!((criterion - 1.0).abs() < 1e-6, "angle {angle}: {criterion}");
        }
    }

    #[test]
    fn dissipation_of_failed_point_is_fracture_energy() {
        let p = table2(1e6);
        let s = update_history(&SeparationState::intact(), 1.0, 0.0, &p);
        assert!(rel(dissipated_energy_density(&s, &p), 0.26) < 1e-12);
        let below = update_history(&SeparationState::intact(), 1e-5, 0.0, &p);
        assert_eq!(dissipated_energy_density(&below, &p), 0.0);
    }

    proptest! {
        #[test]
        fn traction_is_gradient_of_potential(
            dn in -1e-3f64..1e-3, dt in -1e-3f64..1e-3, d in 0.0f64..1.0,
            an in 1e4f64..1e8, at in 1e4f64..1e8,
        ) {
            prop_assume!(dn.abs() > 1e-6);
            let p = CohesiveParams::hta_6376c(an, at);
            let s = SeparationState { delta_n: dn, delta_t: dt, damage: d, ..Default::default() };
            let psi = |n: f64, t: f64| {
                let k = secant_stiffness_at(d, n, &p);
                0.5 * (k.t * t * t + k.n * n * n)
            };
            let h = 1e-9;
            let fd_n = (psi(dn + h, dt) - psi(dn - h, dt)) / (2.0 * h);
            let fd_t = (psi(dn, dt + h) - psi(dn, dt - h)) / (2.0 * h);
            let t = cohesive_traction(&s, &p);
            let scale = t.n.abs().max(t.t.abs()).max(1e-3);
            prop_assert!((fd_n - t.n).abs() <= 1e-6 * scale);
            prop_assert!((fd_t - t.t).abs() <= 1e-6 * scale);
        }

        #[test]
        fn damage_is_monotone_and_continuous(c in 1e-6f64..1e-3, ratio in 1.5f64..1e3, x in 0.0f64..2.0, y in 0.0f64..2.0) {
            let u = c * ratio;
            let (a, b) = (x.min(y) * u, x.max(y) * u);
            prop_assert!(damage(a, c, u) <= damage(b, c, u));
            prop_assert!(damage(c * (1.0 + 1e-12), c, u) < 1e-9);
            prop_assert!(damage(u * (1.0 - 1e-12), c, u) > 1.0 - 1e-6);
        }

        #[test]
        fn onset_lies_on_strength_ellipse(angle in 0.0f64..std::f64::consts::FRAC_PI_2, an in 1e4f64..1e8, at in 1e4f64..1e8) {
            let p = CohesiveParams::hta_6376c(an, at);
            let m = mode_separations_from_cosines(angle.cos(), angle.sin(), &p);
            let tn = p.alpha_n * m.critical * angle.cos();
            let tt = p.alpha_t * m.critical * angle.sin();
            let e = (tn / p.sigma_max).powi(2) + (tt / p.tau_max).powi(2);
            prop_assert!((e - 1.0).abs() < 1e-12);
        }

        #[test]
        fn stabilization_entries_bounded_and_monotone(
            d in 0.0f64..1.0, d2 in 0.0f64..1.0, b in 1e2f64..1e9, scale in 1.0f64..100.0,
        ) {
            let p = table2(1e6);
            let s = |dam: f64, beta: f64| stabilization_matrix(
                &SeparationState { delta_n: 1e-4, damage: dam, ..Default::default() }, &p, beta, beta);
            let base = s(d, b);
            prop_assert!(base.n > 0.0 && base.n <= 1.0 && base.t > 0.0 && base.t <= 1.0);
            let more_beta = s(d, b * scale);
            prop_assert!(more_beta.n >= base.n && more_beta.t >= base.t);
            let (lo, hi) = (d.min(d2), d.max(d2));
            prop_assert!(s(hi, b).n >= s(lo, b).n);
        }
    }
}
