//! Run configuration, sweeps and result files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{BetaMode, Formulation, Integration};
use crate::bench::{
    extract_profile, make_problem, profile_oscillation_index, BenchmarkName, Layup, LoadDispCurve, ProblemOptions,
    ProfileField, TractionProfile,
};
use crate::error::{Error, Result};
use crate::solver::{run_simulation, RunResults, SolverConfig, SolverState};

/// A strictly positive, finite number.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Positive(f64);

impl Positive {
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Positive {
    type Error = String;

    fn try_from(v: f64) -> std::result::Result<Self, String> {
        if v > 0.0 && v.is_finite() {
            Ok(Positive(v))
        } else {
            Err(format!("expected a positive finite number, got {v}"))
        }
    }
}

impl From<Positive> for f64 {
    fn from(p: Positive) -> f64 {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Cohesive stiffness: one value for both directions, or a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Stiffness {
    Both(Positive),
    Pair { normal: Positive, tangential: Positive },
}

impl Stiffness {
    pub fn pair(self) -> (f64, f64) {
        match self {
            Stiffness::Both(a) => (a.get(), a.get()),
            Stiffness::Pair { normal, tangential } => (normal.get(), tangential.get()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Keyword(BetaKeyword),
    Both(Positive),
    Pair { normal: Positive, tangential: Positive },
}

impl Default for BetaSpec {
    fn default() -> Self {
        BetaSpec::Keyword(BetaKeyword::Auto)
    }
}

impl BetaSpec {
    pub fn mode(self) -> BetaMode {
        match self {
            BetaSpec::Keyword(BetaKeyword::Auto) => BetaMode::Auto,
            BetaSpec::Both(b) => BetaMode::Explicit { beta_n: b.get(), beta_t: b.get() },
            BetaSpec::Pair { normal, tangential } => {
                BetaMode::Explicit { beta_n: normal.get(), beta_t: tangential.get() }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshOverrides {
    pub nx: Option<usize>,
    pub ny_per_arm: Option<usize>,
    pub perturb_fraction: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub total_disp: Option<f64>,
    pub n_increments: Option<usize>,
    pub max_newton_iters: Option<usize>,
    pub tol_force_rel: Option<Positive>,
    pub tol_disp_rel: Option<Positive>,
    pub max_cutbacks: Option<usize>,
    pub force_floor: Option<Positive>,
}

impl SolverOverrides {
    fn apply(&self, mut c: SolverConfig) -> SolverConfig {
        if let Some(v) = self.total_disp {
            c.total_disp = v;
        }
        if let Some(v) = self.n_increments {
            c.n_increments = v;
        }
        if let Some(v) = self.max_newton_iters {
            c.max_newton_iters = v;
        }
        if let Some(v) = self.tol_force_rel {
            c.tol_force_rel = v.get();
        }
        if let Some(v) = self.tol_disp_rel {
            c.tol_disp_rel = v.get();
        }
        if let Some(v) = self.max_cutbacks {
            c.max_cutbacks = v;
        }
        if let Some(v) = self.force_floor {
            c.force_floor = v.get();
        }
        c
    }
}

/// A run specification as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub benchmark: BenchmarkName,
    #[serde(default)]
    pub layup: Layup,
    #[serde(default = "default_formulation")]
    pub formulation: OneOrMany<Formulation>,
    /// Benchmark default when absent.
    #[serde(default)]
    pub stiffness: Option<OneOrMany<Stiffness>>,
    #[serde(default)]
    pub beta: BetaSpec,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default)]
    pub mesh: MeshOverrides,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Steps at which profiles are written; the peak and three post-peak
    /// steps when absent.
    #[serde(default)]
    pub snapshots: Option<Vec<usize>>,
}

fn default_formulation() -> OneOrMany<Formulation> {
    OneOrMany::One(Formulation::Stabilized)
}

/// Parses and validates a JSON run specification.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.inner()))
    })?;
    if cfg.formulation.to_vec().is_empty() {
        return Err(Error::Config("at `formulation`: at least one formulation is required".into()));
    }
    if matches!(&cfg.stiffness, Some(OneOrMany::Many(v)) if v.is_empty()) {
        return Err(Error::Config("at `stiffness`: empty stiffness list".into()));
    }
    if let Some(p) = cfg.mesh.perturb_fraction {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::Config(format!("at `mesh.perturb_fraction`: expected a value in [0, 0.5), got {p}")));
        }
    }
    if cfg.solver.total_disp.is_some_and(|d| !d.is_finite()) {
        return Err(Error::Config("at `solver.total_disp`: expected a finite number".into()));
    }
    Ok(cfg)
}

/// One fully resolved run of a sweep. Its JSON form is hashed for the run id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRun {
    pub benchmark: BenchmarkName,
    pub layup: Layup,
    pub formulation: Formulation,
    pub alpha_n: f64,
    pub alpha_t: f64,
    pub beta: BetaMode,
    pub integration: Integration,
    pub mesh: MeshOverrides,
    pub solver: SolverConfig,
    pub snapshots: Option<Vec<usize>>,
}

impl ResolvedRun {
    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn run_id(&self) -> String {
        let json = serde_json::to_string(self).expect("resolved run serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn problem_options(&self) -> ProblemOptions {
        ProblemOptions {
            formulation: self.formulation,
            integration: self.integration,
            beta: self.beta,
            stiffness: Some((self.alpha_n, self.alpha_t)),
            nx: self.mesh.nx,
            ny_per_arm: self.mesh.ny_per_arm,
            perturb_fraction: self.mesh.perturb_fraction,
            seed: self.mesh.seed,
            ..ProblemOptions::default()
        }
    }
}

/// Expands formulations × stiffnesses. `seed` overrides the mesh seed.
pub fn resolve_runs(cfg: &RunConfig, seed: Option<u64>) -> Result<Vec<ResolvedRun>> {
    let stiffness: Vec<(f64, f64)> = match &cfg.stiffness {
        Some(s) => s.to_vec().into_iter().map(Stiffness::pair).collect(),
        None => vec![cfg.benchmark.default_stiffness()],
    };
    let solver = cfg.solver.apply(cfg.benchmark.default_solver());
    solver.validate()?;
    let mut mesh = cfg.mesh;
    if seed.is_some() {
        mesh.seed = seed;
    }
    let mut runs = Vec::new();
    for formulation in cfg.formulation.to_vec() {
        for &(alpha_n, alpha_t) in &stiffness {
            runs.push(ResolvedRun {
                benchmark: cfg.benchmark,
                layup: cfg.layup,
                formulation,
                alpha_n,
                alpha_t,
                beta: cfg.beta.mode(),
                integration: cfg.integration,
                mesh,
                solver,
                snapshots: cfg.snapshots.clone(),
            });
        }
    }
    Ok(runs)
}

/// Oscillation indices of one written profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub step: usize,
    pub disp: f64,
    pub oi_t_n: Option<f64>,
    pub oi_t_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub status: String,
    pub error: Option<String>,
    pub config: ResolvedRun,
    pub peak_load: f64,
    pub disp_at_peak: f64,
    pub steps: usize,
    pub total_iterations: usize,
    pub cutbacks: usize,
    pub snapshots: Vec<SnapshotSummary>,
    pub wall_time_s: f64,
}

/// Default snapshot steps: the peak and three steps spread over the
/// remaining post-peak part of the run.
pub fn default_snapshots(results: &RunResults) -> Vec<usize> {
    let last = results.curve.len().saturating_sub(1);
    let peak = results.peak_step();
    let mut steps = vec![peak];
    for k in 1..=3 {
        steps.push(peak + ((last - peak) * k).div_ceil(3));
    }
    steps.retain(|&s| s > 0 || last == 0);
    steps.dedup();
    steps
}

/// Outcome of [`execute_run`].
pub struct RunOutcome {
    pub summary: RunSummary,
    pub dir: PathBuf,
    /// The solver error, if the run stopped early.
    pub abort: Option<Error>,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs one resolved configuration and writes its files into `out/<run-id>/`.
///
/// A solver abort is not an error here: the partial results and the last
/// converged state are written and the abort is returned in the outcome.
pub fn execute_run(run: &ResolvedRun, out: &Path) -> Result<RunOutcome> {
    let id = run.run_id();
    let dir = out.join(&id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let problem = make_problem(run.benchmark, run.layup, &run.problem_options())?;
    let start = Instant::now();
    let (results, abort, last_good) = match run_simulation(&problem.model, &problem.bc, &run.solver) {
        Ok(r) => (r, None, None),
        Err(a) => {
            let a = *a;
            (a.partial, Some(a.error), Some(a.last_good))
        }
    };
    let wall = start.elapsed().as_secs_f64();

    let curve = LoadDispCurve::from_points(&results.curve);
    write(&dir.join("curve.csv"), &curve.to_csv())?;
    write(&dir.join("curve.svg"), &curve_svg(&curve, &format!("{} {}", run.benchmark, run.formulation.name())))?;

    let steps = match &run.snapshots {
        Some(s) => s.iter().copied().filter(|&s| s < results.profiles.len()).collect(),
        None => default_snapshots(&results),
    };
    let mut snapshots = Vec::new();
    for step in steps {
        let profile = extract_profile(&results.profiles[step], step);
        write(&dir.join(format!("profile_step{step}.csv")), &profile.to_csv())?;
        write(&dir.join(format!("profile_step{step}.svg")), &profile_svg(&profile))?;
        snapshots.push(SnapshotSummary {
            step,
            disp: results.curve[step].0,
            oi_t_n: profile_oscillation_index(&profile, ProfileField::Normal).ok(),
            oi_t_t: profile_oscillation_index(&profile, ProfileField::Tangential).ok(),
        });
    }
    if let Some(state) = &last_good {
        write(&dir.join("last_good_state.json"), &state_dump(state))?;
    }

    let (disp_at_peak, peak_load) = results.peak();
    let summary = RunSummary {
        run_id: id,
        status: if abort.is_some() { "aborted".into() } else { "ok".into() },
        error: abort.as_ref().map(|e| e.to_string()),
        config: run.clone(),
        peak_load,
        disp_at_peak,
        steps: results.increments.len(),
        total_iterations: results.increments.iter().map(|r| r.iterations).sum(),
        cutbacks: results.increments.iter().map(|r| r.cutbacks).sum(),
        snapshots,
        wall_time_s: wall,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write(&dir.join("summary.json"), &json)?;
    Ok(RunOutcome { summary, dir, abort })
}

fn state_dump(state: &SolverState) -> String {
    let v = serde_json::json!({
        "step": state.step,
        "applied": state.applied,
        "load": state.load,
        "u": state.u,
        "states": state.states,
    });
    serde_json::to_string(&v).expect("state serializes")
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line plot of one or more series sharing the axes.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[(&str, &[f64], &[f64])]) -> String {
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.1.iter().copied()));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.2.iter().copied()));
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (v, anchor, x, y) in [(x0, "start", MARGIN, H - MARGIN + 15.0), (x1, "end", W - MARGIN, H - MARGIN + 15.0)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    for (v, y) in [(y0, H - MARGIN), (y1, MARGIN + 10.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{v:.4e}</text>"#, MARGIN - 4.0);
    }
    for (k, (name, xs, ys)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = xs.iter().zip(ys.iter()).map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ =
            writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - MARGIN - 120.0,
            MARGIN + 18.0 * (k + 1) as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn curve_svg(curve: &LoadDispCurve, title: &str) -> String {
    svg_plot(title, "displacement (mm)", "load (N/mm)", &[("load", &curve.disp, &curve.load)])
}

fn profile_svg(p: &TractionProfile) -> String {
    svg_plot(
        &format!("interface tractions, step {}", p.step),
        "x1 (mm)",
        "traction (N/mm²)",
        &[("t_n", &p.x1, &p.t_n), ("t_t", &p.x1, &p.t_t)],
    )
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 3,
        Error::SolverAbort { .. } | Error::Singular { .. } => 2,
        _ => 1,
    }
}
