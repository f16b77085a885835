//! Displacement-controlled incremental solution with secant iterations.
//!
//! Each iteration assembles the secant system at the current iterate, solves
//! for a correction of the free dofs and re-evaluates trial damage from the
//! start-of-increment history. The secant system is exact whenever the
//! damage and contact pattern does not change, so elastic increments finish
//! after a single solve.

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{Model, PointResponse};
use crate::cohesive::{
    damage_for_history, dissipated_energy_density, equivalent_separation, macaulay, update_history, SeparationState,
};
use crate::error::{Error, Result};
use crate::linalg::{BandedLu, SystemLayout};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Final value of the driving displacement (mm).
    pub total_disp: f64,
    pub n_increments: usize,
    pub max_newton_iters: usize,
    pub tol_force_rel: f64,
    pub tol_disp_rel: f64,
    pub max_cutbacks: usize,
    /// Lower bound of the force reference (N).
    pub force_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            total_disp: 1.0,
            n_increments: 10,
            max_newton_iters: 200,
            tol_force_rel: 1e-3,
            tol_disp_rel: 1e-2,
            max_cutbacks: 6,
            force_floor: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_force_rel > 0.0 && self.tol_disp_rel > 0.0 && self.force_floor > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if !self.total_disp.is_finite() {
            return Err(Error::Config("total_disp must be finite".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::Config("max_newton_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Prescribed displacement `u[dof] = factor · Δ`, with `Δ` the driving displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dirichlet {
    pub dof: usize,
    pub factor: f64,
}

/// Constraints plus the reaction combination reported as the load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConditions {
    pub constraints: Vec<Dirichlet>,
    /// Load = Σ coefficient · reaction at dof.
    pub load: Vec<(usize, f64)>,
}

impl BoundaryConditions {
    pub fn mask(&self, n: usize) -> Result<Vec<bool>> {
        let mut mask = vec![false; n];
        for c in &self.constraints {
            if c.dof >= n {
                return Err(Error::Dimension(format!("constraint on dof {} of {n}", c.dof)));
            }
            if mask[c.dof] {
                return Err(Error::Config(format!("dof {} is constrained twice", c.dof)));
            }
            mask[c.dof] = true;
        }
        Ok(mask)
    }

    fn impose(&self, u: &mut [f64], applied: f64) {
        for c in &self.constraints {
            u[c.dof] = c.factor * applied;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: Vec<f64>,
    pub states: Vec<SeparationState>,
    pub step: usize,
    /// Driving displacement (mm).
    pub applied: f64,
    /// Internal force at each constrained dof, in constraint order (N).
    pub reactions: Vec<f64>,
    pub load: f64,
}

impl SolverState {
    pub fn initial(model: &Model, bc: &BoundaryConditions) -> Self {
        Self {
            u: vec![0.0; model.n_dofs()],
            states: model.initial_states(),
            step: 0,
            applied: 0.0,
            reactions: vec![0.0; bc.constraints.len()],
            load: 0.0,
        }
    }

    pub fn max_damage(&self) -> f64 {
        self.states.iter().filter(|s| !s.precracked).fold(0.0, |m, s| m.max(s.damage))
    }
}

/// Outcome of one converged increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementRecord {
    pub step: usize,
    pub applied: f64,
    pub load: f64,
    pub iterations: usize,
    pub cutbacks: usize,
    pub max_damage: f64,
    /// Work of all reactions along the path so far (N·mm per unit width).
    pub external_work: f64,
    /// Cohesive energy dissipated so far (N·mm per unit width).
    pub dissipated: f64,
}

/// Per-iteration diagnostics of one increment attempt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationLog {
    pub residuals: Vec<f64>,
}

/// Reusable solver for one model and one set of boundary conditions.
pub struct IncrementSolver<'a> {
    pub model: &'a Model,
    pub bc: &'a BoundaryConditions,
    pub config: SolverConfig,
    layout: SystemLayout,
}

/// Largest number of points whose damage is corrected jointly.
const MAX_ACTIVE: usize = 96;

/// Bits that determine the secant matrix at a point.
fn signature(model: &Model, u: &[f64], states: &[SeparationState]) -> Vec<(u64, bool)> {
    model.jumps(u).iter().zip(states).map(|(j, s)| (s.damage.to_bits(), s.damage > 0.0 && j.n < 0.0)).collect()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl<'a> IncrementSolver<'a> {
    pub fn new(model: &'a Model, bc: &'a BoundaryConditions, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let mask = bc.mask(model.n_dofs())?;
        let (k, _) = model.assemble(&vec![0.0; model.n_dofs()], &model.initial_states())?;
        let layout = SystemLayout::new(&k, &mask)?;
        Ok(Self { model, bc, config, layout })
    }

    /// Advances `state` to the driving displacement `target` without cutbacks.
    ///
    /// Each iteration solves with the secant matrix of a damage estimate `x`
    /// and evaluates the damage `g(x)` implied by the resulting displacements.
    /// The plain update `x ← g(x)` contracts very slowly once points soften,
    /// so the points whose damage moves are corrected jointly by a Newton
    /// step on `x = g(x)`. Its Jacobian needs one extra back-substitution per
    /// such point with the factors already at hand; the system matrix stays
    /// the secant one.
    pub fn solve_increment(&self, state: &SolverState, target: f64) -> Result<(SolverState, usize, IterationLog)> {
        let model = self.model;
        let cfg = &self.config;
        let committed = &state.states;
        let mut u = state.u.clone();
        self.bc.impose(&mut u, target);
        let u_start = &state.u;
        // States implied by the current displacements (committed if converged).
        let mut trial: Vec<SeparationState> = committed.clone();
        // History used for the next secant matrix.
        let mut x: Vec<f64> = committed.iter().map(|s| s.kappa).collect();
        let mut log = IterationLog::default();
        let mut last_du = f64::INFINITY;
        let mut sig_prev: Option<Vec<(u64, bool)>> = None;
        let mut rejected = 0;
        for it in 0..=cfg.max_newton_iters {
            let sig = signature(model, &u, &trial);
            let sig_same = sig_prev.as_ref() == Some(&sig);
            sig_prev = Some(sig);
            let (mut k, mut f) = model.assemble(&u, &trial)?;
            let r_norm = max_abs((0..f.len()).filter(|&i| self.layout.is_free(i)).map(|i| f[i]));
            let f_ref = max_abs(f.iter().copied()).max(cfg.force_floor);
            log.residuals.push(r_norm);
            debug!("step={} iter={} residual={:.6e} reference={:.6e}", state.step + 1, it, r_norm, f_ref);
            let force_ok = r_norm <= cfg.tol_force_rel * f_ref;
            let moved = max_abs(u.iter().zip(u_start).map(|(a, b)| a - b));
            let converged = if it == 0 {
                moved == 0.0 && force_ok
            } else {
                force_ok && (sig_same || last_du <= cfg.tol_disp_rel * moved)
            };
            if converged {
                let reactions: Vec<f64> = self.bc.constraints.iter().map(|c| f[c.dof]).collect();
                let load = self.bc.load.iter().map(|&(d, c)| c * f[d]).sum();
                let next = SolverState { u, states: trial, step: state.step + 1, applied: target, reactions, load };
                return Ok((next, it, log));
            }
            if it == cfg.max_newton_iters {
                break;
            }

            let solve_states = self.with_history(&trial, &x, committed);
            if solve_states != trial {
                (k, f) = model.assemble(&u, &solve_states)?;
            }
            let lu = self.layout.factor(&k)?;
            let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
            let du = self.layout.solve_factored(&k, &lu, &rhs)?;
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
            }
            last_du = max_abs(du.iter().copied());
            if !u.iter().all(|x| x.is_finite()) {
                break;
            }
            trial = self.trial_states(&u, committed);
            if model.options.elastic_interface {
                continue;
            }
            let g: Vec<f64> = trial.iter().map(|s| s.kappa).collect();
            x = self.history_step(&u, &x, &g, committed, &k, &lu, &mut rejected)?;
        }
        Err(Error::SolverAbort {
            step: state.step + 1,
            reason: format!(
                "no convergence in {} iterations (last residual {:.3e})",
                cfg.max_newton_iters,
                log.residuals.last().copied().unwrap_or(f64::NAN)
            ),
        })
    }

    /// Newton correction of the history estimate `x` given its image `g`.
    ///
    /// `k` and `lu` are the secant matrix used to reach `u` and its factors.
    #[allow(clippy::too_many_arguments)]
    fn history_step(
        &self,
        u: &[f64],
        x: &[f64],
        g: &[f64],
        committed: &[SeparationState],
        k: &CsrMatrix,
        lu: &BandedLu,
        rejected: &mut u32,
    ) -> Result<Vec<f64>> {
        let model = self.model;
        let params = &model.params;
        let jumps = model.jumps(u);
        // Only points whose damage responds to the history matter.
        let mut active: Vec<usize> = (0..x.len())
            .filter(|&i| {
                let c = &committed[i];
                !c.precracked && damage_for_history(c, x[i].max(g[i]), jumps[i].n, jumps[i].t, params) > c.damage
            })
            .collect();
        if active.is_empty() {
            *rejected = 0;
            return Ok(g.to_vec());
        }
        if active.len() > MAX_ACTIVE {
            active.sort_by(|&a, &b| (g[b] - x[b]).abs().total_cmp(&(g[a] - x[a]).abs()).then(a.cmp(&b)));
            active.truncate(MAX_ACTIVE);
            active.sort_unstable();
        }
        let states = self.with_history(&self.trial_states(u, committed), x, committed);
        // Gradient of each active point's equivalent separation with respect
        // to its jump; zero while it unloads below the committed history.
        let grads: Vec<[f64; 2]> = active
            .iter()
            .map(|&i| {
                let j = jumps[i];
                let de = equivalent_separation(j.n, j.t);
                if de <= committed[i].kappa || de == 0.0 {
                    [0.0, 0.0]
                } else {
                    [j.t / de, macaulay(j.n) / de]
                }
            })
            .collect();
        let n = active.len();
        let mut jac = DMatrix::<f64>::identity(n, n);
        for (c, &p) in active.iter().enumerate() {
            // Force sensitivity to point p's history, by a difference on its
            // element. A point still below onset is differentiated where it
            // is heading, otherwise it would look inert.
            let e = p / 2;
            let mut base_states = states.clone();
            let at = |kappa: f64, st: &mut Vec<SeparationState>| {
                st[p].kappa = kappa;
                st[p].damage = damage_for_history(&committed[p], kappa, jumps[p].n, jumps[p].t, params);
            };
            let mut kb = x[p];
            let h = 1e-7 * kb.abs().max(1e-12);
            let mut shifted = states.clone();
            at(kb + h, &mut shifted);
            if shifted[p].damage == states[p].damage && g[p] > x[p] {
                kb = g[p];
                at(kb, &mut base_states);
                at(kb + 1e-7 * kb, &mut shifted);
            }
            let h = shifted[p].kappa - kb;
            if shifted[p].damage == base_states[p].damage {
                continue;
            }
            let base = model.element(e, u, &base_states);
            let pert = model.element(e, u, &shifted);
            let mut rhs = vec![0.0; u.len()];
            for (r, &dof) in base.row_dofs.iter().enumerate() {
                rhs[dof] -= (pert.f_int[r] - base.f_int[r]) / h;
            }
            let v = self.layout.solve_factored(k, lu, &rhs)?;
            for (r, &q) in active.iter().enumerate() {
                let jv = model.kinematics[q / 2].jump(q % 2, &v);
                jac[(r, c)] -= grads[r][0] * jv.t + grads[r][1] * jv.n;
            }
        }
        let rhs = DVector::from_iterator(n, active.iter().map(|&i| g[i] - x[i]));
        let mut next = g.to_vec();
        let Some(step) = jac.lu().solve(&rhs) else {
            *rejected = 0;
            return Ok(next);
        };
        // More history at one point opens the others, so near a stable
        // equilibrium the Newton step agrees in sign with the plain update,
        // point by point. A step that does not heads for an unstable one.
        if step.iter().zip(rhs.iter()).any(|(s, r)| s * r < 0.0) {
            // No stable equilibrium nearby: the plain update crawls through
            // the bottleneck left by the vanished one. While every point keeps
            // growing, lengthen the step geometrically.
            if rhs.iter().all(|&r| r > 0.0) {
                *rejected += 1;
                let stretch = f64::from(1u32 << (*rejected).min(10));
                for (&i, r) in active.iter().zip(rhs.iter()) {
                    next[i] = x[i] + stretch * r;
                }
            } else {
                *rejected = 0;
            }
            return Ok(next);
        }
        *rejected = 0;
        for (&i, s) in active.iter().zip(step.iter()) {
            next[i] = (x[i] + s).max(committed[i].kappa);
        }
        Ok(next)
    }

    /// `states` with the history replaced by `kappa` and damage to match.
    fn with_history(
        &self,
        states: &[SeparationState],
        kappa: &[f64],
        committed: &[SeparationState],
    ) -> Vec<SeparationState> {
        let params = &self.model.params;
        states
            .iter()
            .zip(kappa)
            .zip(committed)
            .map(|((s, &k), c)| SeparationState {
                kappa: k,
                damage: damage_for_history(c, k, s.delta_n, s.delta_t, params),
                ..*s
            })
            .collect()
    }

    /// States implied by `u` on top of the committed history.
    fn trial_states(&self, u: &[f64], committed: &[SeparationState]) -> Vec<SeparationState> {
        let model = self.model;
        model
            .jumps(u)
            .iter()
            .zip(committed)
            .map(|(j, s)| {
                if model.options.elastic_interface {
                    SeparationState { delta_n: j.n, delta_t: j.t, ..*s }
                } else {
                    update_history(s, j.n, j.t, &model.params)
                }
            })
            .collect()
    }

    /// Advances to `target`, halving the step on failure up to `max_cutbacks` times.
    ///
    /// Returns the new state, total iterations and the number of cutbacks.
    pub fn solve_with_cutbacks(&self, state: &SolverState, target: f64) -> Result<(SolverState, usize, usize)> {
        self.cutback(state, target, 0)
    }

    fn cutback(&self, state: &SolverState, target: f64, depth: usize) -> Result<(SolverState, usize, usize)> {
        match self.solve_increment(state, target) {
            Ok((s, it, _)) => Ok((s, it, 0)),
            Err(e @ Error::SolverAbort { .. }) | Err(e @ Error::Singular { .. }) => {
                if depth >= self.config.max_cutbacks {
                    return Err(e);
                }
                debug!("cutback depth={} from={:.6e} to={:.6e}", depth + 1, state.applied, target);
                let mid = 0.5 * (state.applied + target);
                let (s1, i1, c1) = self.cutback(state, mid, depth + 1)?;
                let (mut s2, i2, c2) = self.cutback(&s1, target, depth + 1)?;
                s2.step = state.step + 1;
                Ok((s2, i1 + i2, 1 + c1 + c2))
            }
            Err(e) => Err(e),
        }
    }
}

/// Everything recorded during a run.
#[derive(Debug, Clone, Default)]
pub struct RunResults {
    /// `(driving displacement, load)`, starting at the origin.
    pub curve: Vec<(f64, f64)>,
    pub increments: Vec<IncrementRecord>,
    /// Interface response at every converged step, including step 0.
    pub profiles: Vec<Vec<PointResponse>>,
    pub final_state: Option<SolverState>,
}

impl RunResults {
    /// Index of the step with the largest load.
    pub fn peak_step(&self) -> usize {
        self.curve
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(k, m), (i, &(_, p))| if p > m { (i, p) } else { (k, m) })
            .0
    }

    pub fn peak(&self) -> (f64, f64) {
        self.curve.get(self.peak_step()).copied().unwrap_or((0.0, 0.0))
    }
}

/// A run that stopped early, with everything up to the last converged step.
#[derive(Debug)]
pub struct RunAbort {
    pub error: Error,
    pub partial: RunResults,
    pub last_good: SolverState,
}

fn dissipated_total(model: &Model, states: &[SeparationState]) -> f64 {
    model
        .kinematics
        .iter()
        .enumerate()
        .map(|(e, kin)| {
            (0..2)
                .map(|p| kin.points[p].weight * dissipated_energy_density(&states[2 * e + p], &model.params))
                .sum::<f64>()
        })
        .sum()
}

/// Runs all increments from the unloaded state.
pub fn run_simulation(
    model: &Model,
    bc: &BoundaryConditions,
    config: &SolverConfig,
) -> std::result::Result<RunResults, Box<RunAbort>> {
    let initial = SolverState::initial(model, bc);
    let abort =
        |error: Error, partial: RunResults, last_good: SolverState| Box::new(RunAbort { error, partial, last_good });
    let solver = match IncrementSolver::new(model, bc, *config) {
        Ok(s) => s,
        Err(e) => return Err(abort(e, RunResults::default(), initial)),
    };
    let mut results = RunResults::default();
    if config.n_increments == 0 {
        results.final_state = Some(initial);
        return Ok(results);
    }
    results.curve.push((0.0, 0.0));
    results.profiles.push(model.point_responses(&initial.u, &initial.states));
    let mut state = initial;
    let mut work = 0.0;
    for step in 1..=config.n_increments {
        let target = config.total_disp * step as f64 / config.n_increments as f64;
        let (next, iterations, cutbacks) = match solver.solve_with_cutbacks(&state, target) {
            Ok(r) => r,
            Err(e) => {
                results.final_state = Some(state.clone());
                return Err(abort(e, results, state));
            }
        };
        for (c, (r0, r1)) in bc.constraints.iter().zip(state.reactions.iter().zip(&next.reactions)) {
            work += 0.5 * (r0 + r1) * (next.u[c.dof] - state.u[c.dof]);
        }
        let record = IncrementRecord {
            step,
            applied: next.applied,
            load: next.load,
            iterations,
            cutbacks,
            max_damage: next.max_damage(),
            external_work: work,
            dissipated: dissipated_total(model, &next.states),
        };
        info!(
            "step={} disp={:.6e} load={:.6e} iters={} cutbacks={} max_damage={:.6}",
            record.step, record.applied, record.load, record.iterations, record.cutbacks, record.max_damage
        );
        results.curve.push((next.applied, next.load));
        results.profiles.push(model.point_responses(&next.u, &next.states));
        results.increments.push(record);
        state = next;
    }
    results.final_state = Some(state);
    Ok(results)
}
