//! Benchmark problems, analytical oracles, traction profiles and the
//! oscillation metric.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix2, Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::assembly::{BetaMode, Formulation, Integration, Model, ModelOptions, PointResponse};
use crate::cohesive::{secant_stiffness_at, CohesiveParams, Local};
use crate::error::{Error, Result};
use crate::material::{reduced_stiffness, LaminaProperties, PlyAngle};
use crate::mesh::{self, GeometrySpec, Subdomain};
use crate::solver::{BoundaryConditions, Dirichlet, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkName {
    PatchH,
    PatchHPerturbed,
    PatchInclined,
    PatchStrict,
    Dcb,
    Enf,
    Frmm,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 7] = [
        BenchmarkName::PatchH,
        BenchmarkName::PatchHPerturbed,
        BenchmarkName::PatchInclined,
        BenchmarkName::PatchStrict,
        BenchmarkName::Dcb,
        BenchmarkName::Enf,
        BenchmarkName::Frmm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::PatchH => "patch_h",
            BenchmarkName::PatchHPerturbed => "patch_h_perturbed",
            BenchmarkName::PatchInclined => "patch_inclined",
            BenchmarkName::PatchStrict => "patch_strict",
            BenchmarkName::Dcb => "dcb",
            BenchmarkName::Enf => "enf",
            BenchmarkName::Frmm => "frmm",
        }
    }

    pub fn is_patch(self) -> bool {
        matches!(
            self,
            BenchmarkName::PatchH
                | BenchmarkName::PatchHPerturbed
                | BenchmarkName::PatchInclined
                | BenchmarkName::PatchStrict
        )
    }

    /// Default geometry before overrides.
    pub fn geometry(self) -> GeometrySpec {
        match self {
            BenchmarkName::PatchH | BenchmarkName::PatchStrict => GeometrySpec::patch_horizontal(10),
            BenchmarkName::PatchHPerturbed => {
                GeometrySpec { perturb_fraction: 0.03, seed: 1, ..GeometrySpec::patch_horizontal(10) }
            }
            BenchmarkName::PatchInclined => GeometrySpec::patch_inclined(),
            BenchmarkName::Dcb => GeometrySpec::dcb(),
            BenchmarkName::Enf => GeometrySpec::enf(),
            BenchmarkName::Frmm => GeometrySpec::frmm(),
        }
    }

    /// Default cohesive stiffness `(αn, ατ)`.
    pub fn default_stiffness(self) -> (f64, f64) {
        if self.is_patch() && self != BenchmarkName::PatchStrict {
            (1e8, 1e1)
        } else {
            (1e6, 1e6)
        }
    }

    /// Default loading history.
    pub fn default_solver(self) -> SolverConfig {
        let base = SolverConfig::default();
        match self {
            BenchmarkName::PatchH | BenchmarkName::PatchHPerturbed | BenchmarkName::PatchInclined => {
                SolverConfig { total_disp: 0.1, n_increments: 1, ..base }
            }
            BenchmarkName::PatchStrict => SolverConfig { total_disp: 1.0, n_increments: 1, ..base },
            BenchmarkName::Dcb => SolverConfig { total_disp: 10.0, n_increments: 200, ..base },
            BenchmarkName::Enf => SolverConfig { total_disp: 4.0, n_increments: 80, ..base },
            BenchmarkName::Frmm => SolverConfig { total_disp: 8.0, n_increments: 160, ..base },
        }
    }
}

impl FromStr for BenchmarkName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|b| b.as_str() == s).ok_or_else(|| Error::Config(format!("unknown benchmark {s:?}")))
    }
}

impl std::fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ply orientations `[upper/lower]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Layup {
    #[default]
    #[serde(rename = "0/0")]
    L0_0,
    #[serde(rename = "0/90")]
    L0_90,
}

impl Layup {
    pub fn plies(self) -> (PlyAngle, PlyAngle) {
        match self {
            Layup::L0_0 => (PlyAngle::Deg0, PlyAngle::Deg0),
            Layup::L0_90 => (PlyAngle::Deg0, PlyAngle::Deg90),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Layup::L0_0 => "0/0",
            Layup::L0_90 => "0/90",
        }
    }
}

/// Everything that can be changed from the benchmark defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemOptions {
    pub formulation: Formulation,
    pub integration: Integration,
    pub beta: BetaMode,
    /// Initial cohesive stiffnesses `(αn, ατ)`; benchmark default when `None`.
    pub stiffness: Option<(f64, f64)>,
    pub material: LaminaProperties,
    /// Fracture constants; the stiffness fields are replaced by `stiffness`.
    pub cohesive: CohesiveParams,
    pub nx: Option<usize>,
    pub ny_per_arm: Option<usize>,
    pub perturb_fraction: Option<f64>,
    pub seed: Option<u64>,
    /// Displacement gradient imposed by `patch_strict`.
    pub strain: Matrix2<f64>,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        Self {
            formulation: Formulation::Stabilized,
            integration: Integration::Gauss,
            beta: BetaMode::Auto,
            stiffness: None,
            material: LaminaProperties::hta_6376c(),
            cohesive: CohesiveParams::default(),
            nx: None,
            ny_per_arm: None,
            perturb_fraction: None,
            seed: None,
            strain: Matrix2::new(0.0, 3e-5, 0.0, 4e-5),
        }
    }
}

impl ProblemOptions {
    pub fn with_formulation(mut self, f: Formulation) -> Self {
        self.formulation = f;
        self
    }

    pub fn with_stiffness(mut self, alpha_n: f64, alpha_t: f64) -> Self {
        self.stiffness = Some((alpha_n, alpha_t));
        self
    }

    pub fn with_beta(mut self, beta: BetaMode) -> Self {
        self.beta = beta;
        self
    }
}

/// A ready-to-run benchmark.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: BenchmarkName,
    pub layup: Layup,
    pub model: Model,
    pub bc: BoundaryConditions,
    pub solver: SolverConfig,
    /// For `patch_strict`: the exact uniform jump in the local frame.
    pub exact_jump: Option<Local>,
}

/// Builds a benchmark problem.
pub fn make_problem(name: BenchmarkName, layup: Layup, options: &ProblemOptions) -> Result<Problem> {
    let (upper, lower) = layup.plies();
    let mut geom = name.geometry().with_plies(upper, lower);
    if let Some(nx) = options.nx {
        geom.nx = nx;
        if name.is_patch() && name != BenchmarkName::PatchInclined {
            geom.ny_per_arm = nx.div_ceil(2);
        }
    }
    if let Some(ny) = options.ny_per_arm {
        geom.ny_per_arm = ny;
    }
    if let Some(p) = options.perturb_fraction {
        geom.perturb_fraction = p;
    }
    if let Some(s) = options.seed {
        geom.seed = s;
    }
    if name == BenchmarkName::PatchStrict && layup != Layup::L0_0 {
        return Err(Error::Config(
            "patch_strict needs equal plies on both sides; a uniform strain cannot satisfy traction continuity otherwise"
                .into(),
        ));
    }
    let mesh = mesh::build(&geom)?;
    let (an, at) = options.stiffness.unwrap_or_else(|| name.default_stiffness());
    let params = options.cohesive.with_stiffness(an, at);
    let model_options = ModelOptions {
        formulation: options.formulation,
        integration: options.integration,
        beta: options.beta,
        elastic_interface: name.is_patch(),
    };
    let model = Model::new(mesh, options.material, params, model_options)?;
    let dofs_of = |set: &str| -> Result<Vec<usize>> { Ok(model.mesh.set(set)?.to_vec()) };

    let mut bc = BoundaryConditions::default();
    let mut exact_jump = None;
    let fix = |bc: &mut BoundaryConditions, node: usize, dir: usize, factor: f64| {
        bc.constraints.push(Dirichlet { dof: 2 * node + dir, factor });
    };
    match name {
        BenchmarkName::PatchH | BenchmarkName::PatchHPerturbed | BenchmarkName::PatchInclined => {
            for n in dofs_of("bottom")? {
                fix(&mut bc, n, 0, 0.0);
                fix(&mut bc, n, 1, 0.0);
            }
            // Δ is the compressive shortening; the load is the compressive force.
            for n in dofs_of("top")? {
                fix(&mut bc, n, 1, -1.0);
                bc.load.push((2 * n + 1, -1.0));
            }
        }
        BenchmarkName::PatchStrict => {
            let (bc_strict, jump) = strict_patch_conditions(&model, &options.strain)?;
            bc = bc_strict;
            exact_jump = Some(jump);
        }
        BenchmarkName::Dcb => {
            for n in dofs_of("right")? {
                fix(&mut bc, n, 0, 0.0);
                fix(&mut bc, n, 1, 0.0);
            }
            // Δ is the total opening; each arm tip moves by half of it.
            let top = dofs_of("top_left")?[0];
            let bottom = dofs_of("bottom_left")?[0];
            fix(&mut bc, top, 1, 0.5);
            fix(&mut bc, bottom, 1, -0.5);
            bc.load.push((2 * top + 1, 1.0));
        }
        BenchmarkName::Enf => {
            let left = dofs_of("bottom_left")?[0];
            let right = dofs_of("bottom_right")?[0];
            fix(&mut bc, left, 0, 0.0);
            fix(&mut bc, left, 1, 0.0);
            fix(&mut bc, right, 1, 0.0);
            let mid = dofs_of("top_mid")?[0];
            fix(&mut bc, mid, 1, -1.0);
            bc.load.push((2 * mid + 1, -1.0));
        }
        BenchmarkName::Frmm => {
            for n in dofs_of("right")? {
                fix(&mut bc, n, 0, 0.0);
                fix(&mut bc, n, 1, 0.0);
            }
            let top = dofs_of("top_left")?[0];
            fix(&mut bc, top, 1, 1.0);
            bc.load.push((2 * top + 1, 1.0));
        }
    }
    let mut solver = name.default_solver();
    if name == BenchmarkName::PatchStrict {
        solver.total_disp = 1.0;
    }
    Ok(Problem { name, layup, model, bc, solver, exact_jump })
}

/// Boundary values of the exact piecewise-affine solution for a uniform
/// displacement gradient `A`: `u = A (x − x0)` below the interface and
/// `u = A (x − x0) + c` above, with `x0` the middle of the interface and
/// `c` the jump that carries the traction `σ n` through the cohesive law.
fn strict_patch_conditions(model: &Model, grad: &Matrix2<f64>) -> Result<(BoundaryConditions, Local)> {
    let mesh = &model.mesh;
    let kin = model.kinematics.first().ok_or_else(|| Error::Geometry("patch has no interface".into()))?;
    let d = reduced_stiffness(&model.material, mesh.q4[mesh.interfaces[0].upper].ply)?;
    let strain = Vector3::new(grad[(0, 0)], grad[(1, 1)], grad[(0, 1)] + grad[(1, 0)]);
    let sigma = d.0 * strain;
    let n = kin.normal();
    let t_global = Vector2::new(sigma[0] * n.x + sigma[2] * n.y, sigma[2] * n.x + sigma[1] * n.y);
    let t_local = kin.theta * t_global;
    let k = secant_stiffness_at(0.0, t_local[1], &model.params);
    let jump = Local::new(t_local[0] / k.t, t_local[1] / k.n);
    let c = kin.theta.transpose() * Vector2::new(jump.t, jump.n);

    let first = &mesh.interfaces[0];
    let last = mesh.interfaces.last().expect("non-empty");
    let x0 = Point2::from(0.5 * (mesh.nodes[first.bottom[0]].coords + mesh.nodes[last.bottom[1]].coords));

    let mut upper = vec![false; mesh.nodes.len()];
    for e in mesh.q4.iter().filter(|e| e.subdomain == Subdomain::Upper) {
        for &nd in &e.nodes {
            upper[nd] = true;
        }
    }
    let mut boundary = std::collections::BTreeSet::new();
    for set in ["bottom", "top", "left", "right"] {
        boundary.extend(mesh.set(set)?.iter().copied());
    }
    let mut bc = BoundaryConditions::default();
    for nd in boundary {
        let mut v = grad * (mesh.nodes[nd] - x0);
        if upper[nd] {
            v += c;
        }
        bc.constraints.push(Dirichlet { dof: 2 * nd, factor: v.x });
        bc.constraints.push(Dirichlet { dof: 2 * nd + 1, factor: v.y });
    }
    Ok((bc, jump))
}

/// Interface response sorted by `x1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TractionProfile {
    pub step: usize,
    pub x1: Vec<f64>,
    pub t_n: Vec<f64>,
    pub t_t: Vec<f64>,
    pub d_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileField {
    Normal,
    Tangential,
}

impl TractionProfile {
    pub fn field(&self, f: ProfileField) -> &[f64] {
        match f {
            ProfileField::Normal => &self.t_n,
            ProfileField::Tangential => &self.t_t,
        }
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1_mm,t_n,t_t,d_s\n");
        for i in 0..self.len() {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", self.x1[i], self.t_n[i], self.t_t[i], self.d_s[i]);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_csv(text, &["x1_mm", "t_n", "t_t", "d_s"])?;
        let mut p = TractionProfile::default();
        for r in rows {
            p.x1.push(r[0]);
            p.t_n.push(r[1]);
            p.t_t.push(r[2]);
            p.d_s.push(r[3]);
        }
        Ok(p)
    }
}

/// Profile of the per-point responses recorded at `step`.
pub fn extract_profile(responses: &[PointResponse], step: usize) -> TractionProfile {
    let mut order: Vec<usize> = (0..responses.len()).collect();
    order.sort_by(|&a, &b| responses[a].x.x.total_cmp(&responses[b].x.x));
    let mut p = TractionProfile { step, ..Default::default() };
    for i in order {
        let r = &responses[i];
        p.x1.push(r.x.x);
        p.t_n.push(r.traction.n);
        p.t_t.push(r.traction.t);
        p.d_s.push(r.damage);
    }
    p
}

/// Normalized total second difference `Σ|f[i−1] − 2f[i] + f[i+1]| / (max − min + ε)`.
pub fn oscillation_index(values: &[f64]) -> f64 {
    const EPS: f64 = 1e-12;
    if values.len() < 3 {
        return 0.0;
    }
    let total: f64 = values.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).abs()).sum();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    total / (hi - lo + EPS)
}

pub fn profile_oscillation_index(profile: &TractionProfile, field: ProfileField) -> Result<f64> {
    if profile.len() < 5 {
        return Err(Error::Config(format!("oscillation index needs at least 5 samples, got {}", profile.len())));
    }
    Ok(oscillation_index(profile.field(field)))
}

/// Simple beam theory for the DCB specimen (per unit width when `b = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamTheory {
    pub p_crit: f64,
    pub delta_crit: f64,
    /// Bending stiffness `E1 I` of one arm.
    pub ei: f64,
    pub b: f64,
    pub g_ic: f64,
    pub a0: f64,
}

impl BeamTheory {
    /// Load for a total opening `delta`: linear up to onset, then the propagation branch.
    pub fn load(&self, delta: f64) -> f64 {
        if delta <= self.delta_crit {
            delta / self.compliance(self.a0)
        } else {
            self.propagation_load(delta)
        }
    }

    pub fn compliance(&self, a: f64) -> f64 {
        2.0 * a.powi(3) / (3.0 * self.ei)
    }

    /// `P(Δ) = (G b E I)^{3/4} √(2 / (3 E I Δ))`, from eliminating `a`.
    pub fn propagation_load(&self, delta: f64) -> f64 {
        (self.g_ic * self.b * self.ei).powf(0.75) * (2.0 / (3.0 * self.ei * delta)).sqrt()
    }

    /// Crack length on the propagation branch at opening `delta`.
    pub fn crack_length(&self, delta: f64) -> f64 {
        (1.5 * self.ei * delta / (self.g_ic * self.b * self.ei).sqrt()).sqrt()
    }
}

pub fn dcb_beam_theory(e1: f64, arm_h: f64, b: f64, a0: f64, g_ic: f64) -> BeamTheory {
    let ei = e1 * b * arm_h.powi(3) / 12.0;
    let p_crit = (g_ic * b * ei).sqrt() / a0;
    let delta_crit = 2.0 * a0.powi(3) * p_crit / (3.0 * ei);
    BeamTheory { p_crit, delta_crit, ei, b, g_ic, a0 }
}

/// Load–displacement record of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadDispCurve {
    pub disp: Vec<f64>,
    pub load: Vec<f64>,
}

impl LoadDispCurve {
    pub fn from_points(points: &[(f64, f64)]) -> Self {
        Self { disp: points.iter().map(|p| p.0).collect(), load: points.iter().map(|p| p.1).collect() }
    }

    pub fn len(&self) -> usize {
        self.disp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disp.is_empty()
    }

    pub fn peak(&self) -> (f64, f64) {
        let mut best = (0.0, f64::NEG_INFINITY);
        for (&d, &p) in self.disp.iter().zip(&self.load) {
            if p > best.1 {
                best = (d, p);
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("disp_mm,load_N_per_mm\n");
        for (d, p) in self.disp.iter().zip(&self.load) {
            let _ = writeln!(s, "{d:.16e},{p:.16e}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = parse_csv(text, &["disp_mm", "load_N_per_mm"])?;
        Ok(Self { disp: rows.iter().map(|r| r[0]).collect(), load: rows.iter().map(|r| r[1]).collect() })
    }

    /// Linear interpolation; `None` outside the recorded range.
    pub fn interpolate(&self, d: f64) -> Option<f64> {
        let i = self.disp.windows(2).position(|w| w[0] <= d && d <= w[1])?;
        let (d0, d1) = (self.disp[i], self.disp[i + 1]);
        let (p0, p1) = (self.load[i], self.load[i + 1]);
        Some(if d1 > d0 { p0 + (p1 - p0) * (d - d0) / (d1 - d0) } else { p0 })
    }
}

/// Largest pointwise relative difference of two curves sampled at the same
/// displacements; the denominator is floored at `1e-3` of the larger peak.
pub fn max_relative_difference(a: &LoadDispCurve, b: &LoadDispCurve) -> Result<f64> {
    if a.len() != b.len() || a.disp.iter().zip(&b.disp).any(|(x, y)| x != y) {
        return Err(Error::Dimension("curves are not sampled at the same displacements".into()));
    }
    let floor = 1e-3 * a.peak().1.abs().max(b.peak().1.abs());
    Ok(a.load
        .iter()
        .zip(&b.load)
        .map(|(p, q)| (p - q).abs() / p.abs().max(q.abs()).max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max))
}

fn parse_csv(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != header {
        return Err(Error::Config(format!("unexpected CSV header {head:?}, expected {:?}", header.join(","))));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let v: std::result::Result<Vec<f64>, _> = l.split(',').map(|x| x.trim().parse::<f64>()).collect();
            match v {
                Ok(v) if v.len() == header.len() => Ok(v),
                _ => Err(Error::Config(format!("malformed CSV row {}: {l:?}", i + 2))),
            }
        })
        .collect()
}
