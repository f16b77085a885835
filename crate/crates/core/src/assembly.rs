//! Element matrices and global assembly.
//!
//! The discrete weak form is `Σ ∫ ∇w : σ dΩ + ∫ ⟦w⟧ · T dΓ = 0` with the jump
//! `⟦u⟧ = u(Ω1) − u(Ω2)` and `T` the traction the interface transmits, in
//! the local `(τ, n)` frame:
//!
//! * standard: `T = K δ`, with `K` the secant cohesive stiffness;
//! * stabilized: `T = (I − S) Θ ⟨σ⟩_γ n + S K δ`, where
//!   `⟨σ⟩_γ = γ1 σ(Ω1) + γ2 σ(Ω2)` is taken from the neighbouring elements.
//!
//! The interface residual is linear in `u` once damage and the contact
//! state are fixed, so the matrices below are exact for frozen damage. The
//! stabilized interface stiffness couples the jump test function with the
//! neighbour displacements only and is therefore unsymmetric.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Point2, SMatrix, SVector, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohesive::{
    interface_weights, secant_stiffness_at, stabilization_parameters, CohesiveParams, Local, SeparationState,
    StabilizationData,
};
use crate::error::{Error, Result};
use crate::material::{reduced_stiffness, LaminaProperties, PlaneStressMatrix, PlyAngle};
use crate::mesh::Mesh;
use crate::shape::{self, CORNERS, GAUSS_2, GAUSS_POINTS};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Standard,
    Stabilized,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Standard => "standard",
            Formulation::Stabilized => "stabilized",
        }
    }
}

/// Quadrature along interface elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    #[default]
    Gauss,
    /// Two-point nodal rule.
    NewtonCotes,
}

impl Integration {
    fn abscissae(self) -> [f64; 2] {
        match self {
            Integration::Gauss => [-GAUSS_2, GAUSS_2],
            Integration::NewtonCotes => [-1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum BetaMode {
    /// From the local coercivity estimate of each interface element.
    #[default]
    Auto,
    Explicit {
        beta_n: f64,
        beta_t: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub formulation: Formulation,
    pub integration: Integration,
    pub beta: BetaMode,
    /// Keep the interface linear elastic: no damage evolution, and the
    /// fracture constants only need to be positive.
    pub elastic_interface: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            formulation: Formulation::Stabilized,
            integration: Integration::Gauss,
            beta: BetaMode::Auto,
            elastic_interface: false,
        }
    }
}

/// Element stiffness and internal force with their global equation numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices {
    pub k: DMatrix<f64>,
    pub f_int: DVector<f64>,
    pub row_dofs: Vec<usize>,
    pub col_dofs: Vec<usize>,
}

/// Geometry of one interface integration point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfacePoint {
    pub x: Point2<f64>,
    /// Interpolation weights of node pair 0 and node pair 1.
    pub n: [f64; 2],
    /// Quadrature weight including the Jacobian `ℓ/2`.
    pub weight: f64,
    /// Strain-displacement matrices of the neighbours evaluated at this point.
    pub b_upper: SMatrix<f64, 3, 8>,
    pub b_lower: SMatrix<f64, 3, 8>,
}

/// Everything an interface element needs that does not change during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceKinematics {
    /// Bottom pair then top pair, x and y for each node.
    pub dofs: [usize; 8],
    pub upper_dofs: [usize; 8],
    pub lower_dofs: [usize; 8],
    /// Rows are the unit tangent and the unit normal.
    pub theta: Matrix2<f64>,
    pub length: f64,
    pub points: [InterfacePoint; 2],
    pub d_upper: Matrix3<f64>,
    pub d_lower: Matrix3<f64>,
}

impl InterfaceKinematics {
    pub fn tangent(&self) -> Vector2<f64> {
        Vector2::new(self.theta[(0, 0)], self.theta[(0, 1)])
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.theta[(1, 0)], self.theta[(1, 1)])
    }

    /// `Θ N⟦⟧`, mapping the 8 interface dofs to the local jump.
    fn jump_operator(&self, p: &InterfacePoint) -> SMatrix<f64, 2, 8> {
        let mut nj = SMatrix::<f64, 2, 8>::zeros();
        for a in 0..2 {
            for c in 0..2 {
                nj[(c, 2 * a + c)] = -p.n[a];
                nj[(c, 4 + 2 * a + c)] = p.n[a];
            }
        }
        self.theta * nj
    }

    /// Maps Voigt stress to local traction `Θ σ n`.
    fn traction_operator(&self) -> SMatrix<f64, 2, 3> {
        let n = self.normal();
        let nn = SMatrix::<f64, 2, 3>::new(n.x, 0.0, n.y, 0.0, n.y, n.x);
        self.theta * nn
    }

    pub fn jump(&self, p: usize, u: &[f64]) -> Local {
        let d = self.jump_operator(&self.points[p]) * gather(u, &self.dofs);
        Local::new(d[0], d[1])
    }

    /// Weighted neighbour stress `⟨σ⟩_γ` projected on the normal, in the local frame.
    pub fn average_traction(&self, p: usize, u: &[f64], stab: &StabilizationData) -> Local {
        let pt = &self.points[p];
        let s = stab.gamma1 * self.d_upper * pt.b_upper * gather(u, &self.upper_dofs)
            + stab.gamma2 * self.d_lower * pt.b_lower * gather(u, &self.lower_dofs);
        let t = self.traction_operator() * s;
        Local::new(t[0], t[1])
    }
}

fn gather(u: &[f64], dofs: &[usize; 8]) -> SVector<f64, 8> {
    SVector::<f64, 8>::from_fn(|i, _| u[dofs[i]])
}

fn node_dofs(nodes: &[usize]) -> Vec<usize> {
    nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect()
}

/// Bilinear plane-stress element with 2×2 Gauss integration (unit thickness).
///
/// `id` only labels errors; the returned dof map is local (0..8).
pub fn q4_element(
    id: usize,
    coords: &[Point2<f64>; 4],
    d: &PlaneStressMatrix,
    u_elem: &[f64; 8],
) -> Result<ElementMatrices> {
    let k = q4_stiffness(coords, d).map_err(|reason| Error::Element { element: id, reason })?;
    let f = k * SVector::<f64, 8>::from_column_slice(u_elem);
    let dofs: Vec<usize> = (0..8).collect();
    Ok(ElementMatrices {
        k: DMatrix::from_column_slice(8, 8, k.as_slice()),
        f_int: DVector::from_column_slice(f.as_slice()),
        row_dofs: dofs.clone(),
        col_dofs: dofs,
    })
}

fn q4_stiffness(coords: &[Point2<f64>; 4], d: &PlaneStressMatrix) -> std::result::Result<SMatrix<f64, 8, 8>, String> {
    let mut k = SMatrix::<f64, 8, 8>::zeros();
    for &(xi, eta) in &GAUSS_POINTS {
        let (b, det) = shape::b_matrix(coords, xi, eta)
            .ok_or_else(|| format!("non-positive Jacobian at Gauss point ({xi:.3}, {eta:.3})"))?;
        k += b.transpose() * d.0 * b * det;
    }
    Ok(k)
}

/// Stresses at the four Gauss points of a Q4 element.
pub fn q4_stresses(
    id: usize,
    coords: &[Point2<f64>; 4],
    d: &PlaneStressMatrix,
    u_elem: &[f64; 8],
) -> Result<[SVector<f64, 3>; 4]> {
    let u = SVector::<f64, 8>::from_column_slice(u_elem);
    let mut out = [SVector::<f64, 3>::zeros(); 4];
    for (g, &(xi, eta)) in GAUSS_POINTS.iter().enumerate() {
        let (b, _) = shape::b_matrix(coords, xi, eta)
            .ok_or_else(|| Error::Element { element: id, reason: "non-positive Jacobian".into() })?;
        out[g] = d.0 * b * u;
    }
    Ok(out)
}

/// Traction transmitted at one point under the standard form.
pub fn standard_traction(jump: Local, state: &SeparationState, params: &CohesiveParams) -> Local {
    let k = secant_stiffness_at(state.damage, jump.n, params);
    Local::new(k.t * jump.t, k.n * jump.n)
}

/// `(I − S, S K)` per direction; `I − S` is formed as `K/(K + β)` to keep accuracy as `S → I`.
///
/// Contact is decided by the sign of the normal traction the point would
/// carry when closed, not by the sign of the jump: with the average-stress
/// term a fully damaged point carries `(I − S)⟨σ⟩n` at `δn = 0⁻` but nothing
/// at `δn = 0⁺`, and a jump-based switch chatters across that gap. The two
/// tests agree wherever the jump and the traction have the same sign.
fn stabilized_factors(
    jump: Local,
    average: Local,
    state: &SeparationState,
    params: &CohesiveParams,
    stab: &StabilizationData,
) -> (Local, Local) {
    let factors = |k: Local| {
        let one_minus_s = Local::new(k.t / (k.t + stab.beta_t), k.n / (k.n + stab.beta_n));
        let s_k = Local::new(stab.beta_t / (k.t + stab.beta_t) * k.t, stab.beta_n / (k.n + stab.beta_n) * k.n);
        (one_minus_s, s_k)
    };
    let (a, b) = factors(secant_stiffness_at(state.damage, -1.0, params));
    let closed_n = a.n * average.n + b.n * jump.n;
    if closed_n <= 0.0 {
        (a, b)
    } else {
        factors(secant_stiffness_at(state.damage, 1.0, params))
    }
}

/// Traction transmitted at one point under the stabilized form.
pub fn stabilized_traction(
    jump: Local,
    average: Local,
    state: &SeparationState,
    params: &CohesiveParams,
    stab: &StabilizationData,
) -> Local {
    let (a, b) = stabilized_factors(jump, average, state, params, stab);
    Local::new(a.t * average.t + b.t * jump.t, a.n * average.n + b.n * jump.n)
}

/// Cohesive term of the standard weak form (8×8, symmetric).
pub fn interface_element_standard(
    kin: &InterfaceKinematics,
    u: &[f64],
    states: &[SeparationState],
    params: &CohesiveParams,
) -> ElementMatrices {
    let mut k = SMatrix::<f64, 8, 8>::zeros();
    for (p, pt) in kin.points.iter().enumerate() {
        let jo = kin.jump_operator(pt);
        let jump = kin.jump(p, u);
        let ks = secant_stiffness_at(states[p].damage, jump.n, params);
        let kd = Matrix2::new(ks.t, 0.0, 0.0, ks.n);
        k += jo.transpose() * kd * jo * pt.weight;
    }
    let f = k * gather(u, &kin.dofs);
    ElementMatrices {
        k: DMatrix::from_column_slice(8, 8, k.as_slice()),
        f_int: DVector::from_column_slice(f.as_slice()),
        row_dofs: kin.dofs.to_vec(),
        col_dofs: kin.dofs.to_vec(),
    }
}

/// Interface terms of the stabilized weak form (8×24, unsymmetric).
///
/// Columns are the interface dofs, then the upper and lower neighbour dofs;
/// repeated global dofs are summed on assembly.
pub fn interface_element_stabilized(
    kin: &InterfaceKinematics,
    u: &[f64],
    states: &[SeparationState],
    params: &CohesiveParams,
    stab: &StabilizationData,
) -> ElementMatrices {
    let mut k = SMatrix::<f64, 8, 24>::zeros();
    let mut f = SVector::<f64, 8>::zeros();
    let tn = kin.traction_operator();
    for (p, pt) in kin.points.iter().enumerate() {
        let jo = kin.jump_operator(pt);
        let jump = kin.jump(p, u);
        let avg = kin.average_traction(p, u, stab);
        let t = stabilized_traction(jump, avg, &states[p], params, stab);
        f += jo.transpose() * Vector2::new(t.t, t.n) * pt.weight;

        let (a, b) = stabilized_factors(jump, avg, &states[p], params, stab);
        let am = Matrix2::new(a.t, 0.0, 0.0, a.n);
        let bm = Matrix2::new(b.t, 0.0, 0.0, b.n);
        let wj = jo.transpose() * pt.weight;
        let mut kj = k.fixed_view_mut::<8, 8>(0, 0);
        kj += wj * bm * jo;
        let mut ku = k.fixed_view_mut::<8, 8>(0, 8);
        ku += wj * am * tn * (kin.d_upper * pt.b_upper) * stab.gamma1;
        let mut kl = k.fixed_view_mut::<8, 8>(0, 16);
        kl += wj * am * tn * (kin.d_lower * pt.b_lower) * stab.gamma2;
    }
    let mut cols = kin.dofs.to_vec();
    cols.extend_from_slice(&kin.upper_dofs);
    cols.extend_from_slice(&kin.lower_dofs);
    ElementMatrices {
        k: DMatrix::from_column_slice(8, 24, k.as_slice()),
        f_int: DVector::from_column_slice(f.as_slice()),
        row_dofs: kin.dofs.to_vec(),
        col_dofs: cols,
    }
}

/// Per-point response recorded for output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResponse {
    pub x: Point2<f64>,
    pub jump: Local,
    /// Traction used in the residual of the active formulation.
    pub traction: Local,
    pub damage: f64,
}

/// Mesh, materials and precomputed element data for one simulation.
#[derive(Debug, Clone)]
pub struct Model {
    pub mesh: Mesh,
    pub material: LaminaProperties,
    pub params: CohesiveParams,
    pub options: ModelOptions,
    pub kinematics: Vec<InterfaceKinematics>,
    pub stabilization: Vec<StabilizationData>,
    d0: PlaneStressMatrix,
    d90: PlaneStressMatrix,
    /// Bulk stiffness on the full pattern; interface slots hold zeros.
    bulk: CsrMatrix,
    /// Value slots for each interface element matrix, row-major.
    slots: Vec<Vec<usize>>,
}

impl Model {
    pub fn new(mesh: Mesh, material: LaminaProperties, params: CohesiveParams, options: ModelOptions) -> Result<Self> {
        if options.elastic_interface {
            params.validate_positive()?;
        } else {
            params.validate()?;
        }
        mesh.check()?;
        if let BetaMode::Explicit { beta_n, beta_t } = options.beta {
            if !(beta_n > 0.0 && beta_t > 0.0) {
                return Err(Error::Config(format!(
                    "stabilization parameters must be positive, got ({beta_n}, {beta_t})"
                )));
            }
        }
        let d0 = reduced_stiffness(&material, PlyAngle::Deg0)?;
        let d90 = reduced_stiffness(&material, PlyAngle::Deg90)?;
        let ply_d = |ply: PlyAngle| if ply == PlyAngle::Deg0 { d0 } else { d90 };

        let mut kinematics = Vec::with_capacity(mesh.interfaces.len());
        let mut stabilization = Vec::with_capacity(mesh.interfaces.len());
        for i in 0..mesh.interfaces.len() {
            let kin = interface_kinematics(&mesh, i, options.integration, &ply_d)?;
            let ie = &mesh.interfaces[i];
            let (du, dl) = (ply_d(mesh.q4[ie.upper].ply), ply_d(mesh.q4[ie.lower].ply));
            let (au, al) = (shape::area(&mesh.q4_coords(ie.upper)), shape::area(&mesh.q4_coords(ie.lower)));
            let (gamma1, gamma2) = interface_weights(&du, &dl, au, al);
            let (beta_n, beta_t) = match options.beta {
                BetaMode::Auto => stabilization_parameters(&du, &dl, au, al, gamma1, gamma2, kin.length),
                BetaMode::Explicit { beta_n, beta_t } => (beta_n, beta_t),
            };
            kinematics.push(kin);
            stabilization.push(StabilizationData { beta_n, beta_t, gamma1, gamma2 });
        }

        let n = mesh.n_dofs();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        let q4_dofs: Vec<Vec<usize>> = mesh.q4.iter().map(|e| node_dofs(&e.nodes)).collect();
        for dofs in &q4_dofs {
            for &r in dofs {
                rows[r].extend_from_slice(dofs);
            }
        }
        let if_cols = |kin: &InterfaceKinematics| -> Vec<usize> {
            let mut cols = kin.dofs.to_vec();
            if options.formulation == Formulation::Stabilized {
                cols.extend_from_slice(&kin.upper_dofs);
                cols.extend_from_slice(&kin.lower_dofs);
            }
            cols
        };
        for kin in &kinematics {
            let cols = if_cols(kin);
            for &r in &kin.dofs {
                rows[r].extend_from_slice(&cols);
            }
        }
        let mut bulk = CsrMatrix::from_pattern(rows);

        for (e, dofs) in q4_dofs.iter().enumerate() {
            let k = q4_stiffness(&mesh.q4_coords(e), &ply_d(mesh.q4[e].ply))
                .map_err(|reason| Error::Element { element: e, reason })?;
            for (a, &r) in dofs.iter().enumerate() {
                for (b, &c) in dofs.iter().enumerate() {
                    let s = bulk.slot(r, c).expect("bulk pattern entry");
                    bulk.values[s] += k[(a, b)];
                }
            }
        }
        let slots = kinematics
            .iter()
            .map(|kin| {
                let cols = if_cols(kin);
                kin.dofs
                    .iter()
                    .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
                    .map(|(r, c)| bulk.slot(r, c).expect("interface pattern entry"))
                    .collect()
            })
            .collect();

        Ok(Self { mesh, material, params, options, kinematics, stabilization, d0, d90, bulk, slots })
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }

    pub fn n_points(&self) -> usize {
        2 * self.kinematics.len()
    }

    pub fn ply_stiffness(&self, ply: PlyAngle) -> &PlaneStressMatrix {
        match ply {
            PlyAngle::Deg0 => &self.d0,
            PlyAngle::Deg90 => &self.d90,
        }
    }

    /// Initial point states; precracked elements start fully damaged.
    pub fn initial_states(&self) -> Vec<SeparationState> {
        self.mesh
            .interfaces
            .iter()
            .flat_map(|ie| {
                let s = if ie.precracked { SeparationState::precracked() } else { SeparationState::intact() };
                [s, s]
            })
            .collect()
    }

    /// Mean stabilization parameters over the interface elements.
    pub fn mean_beta(&self) -> Local {
        let n = self.stabilization.len().max(1) as f64;
        let (bt, bn) = self.stabilization.iter().fold((0.0, 0.0), |(t, n), s| (t + s.beta_t, n + s.beta_n));
        Local::new(bt / n, bn / n)
    }

    pub fn element(&self, e: usize, u: &[f64], states: &[SeparationState]) -> ElementMatrices {
        let kin = &self.kinematics[e];
        let st = &states[2 * e..2 * e + 2];
        match self.options.formulation {
            Formulation::Standard => interface_element_standard(kin, u, st, &self.params),
            Formulation::Stabilized => interface_element_stabilized(kin, u, st, &self.params, &self.stabilization[e]),
        }
    }

    /// Global secant stiffness and internal force vector.
    ///
    /// The residual of the unconstrained system is `R = f_ext − f_int` with
    /// `f_ext = 0` in all benchmarks; reactions are `f_int` at constrained dofs.
    pub fn assemble(&self, u: &[f64], states: &[SeparationState]) -> Result<(CsrMatrix, Vec<f64>)> {
        if u.len() != self.n_dofs() || states.len() != self.n_points() {
            return Err(Error::Dimension(format!(
                "expected {} dofs and {} points, got {} and {}",
                self.n_dofs(),
                self.n_points(),
                u.len(),
                states.len()
            )));
        }
        let mut f = self.bulk.mul_vec(u);
        let mut k = self.bulk.clone();
        let elements: Vec<ElementMatrices> =
            (0..self.kinematics.len()).into_par_iter().map(|e| self.element(e, u, states)).collect();
        for (e, em) in elements.iter().enumerate() {
            let slots = &self.slots[e];
            let nc = em.col_dofs.len();
            for (a, &r) in em.row_dofs.iter().enumerate() {
                f[r] += em.f_int[a];
                for b in 0..nc {
                    k.values[slots[a * nc + b]] += em.k[(a, b)];
                }
            }
        }
        Ok((k, f))
    }

    /// Internal force only.
    pub fn internal_force(&self, u: &[f64], states: &[SeparationState]) -> Result<Vec<f64>> {
        self.assemble(u, states).map(|(_, f)| f)
    }

    /// Local jumps at all interface points, element-major.
    pub fn jumps(&self, u: &[f64]) -> Vec<Local> {
        self.kinematics.iter().flat_map(|kin| [kin.jump(0, u), kin.jump(1, u)]).collect()
    }

    /// Per-point traction of the active formulation, computed exactly as in the residual.
    pub fn point_responses(&self, u: &[f64], states: &[SeparationState]) -> Vec<PointResponse> {
        let mut out = Vec::with_capacity(self.n_points());
        for (e, kin) in self.kinematics.iter().enumerate() {
            for p in 0..2 {
                let state = &states[2 * e + p];
                let jump = kin.jump(p, u);
                let traction = match self.options.formulation {
                    Formulation::Standard => standard_traction(jump, state, &self.params),
                    Formulation::Stabilized => {
                        let stab = &self.stabilization[e];
                        stabilized_traction(jump, kin.average_traction(p, u, stab), state, &self.params, stab)
                    }
                };
                out.push(PointResponse { x: kin.points[p].x, jump, traction, damage: state.damage });
            }
        }
        out
    }

    /// Stresses at the Gauss points of every continuum element.
    pub fn bulk_stresses(&self, u: &[f64]) -> Result<Vec<[SVector<f64, 3>; 4]>> {
        self.mesh
            .q4
            .iter()
            .enumerate()
            .map(|(e, el)| {
                let ue: [f64; 8] = std::array::from_fn(|i| u[2 * el.nodes[i / 2] + i % 2]);
                q4_stresses(e, &self.mesh.q4_coords(e), self.ply_stiffness(el.ply), &ue)
            })
            .collect()
    }
}

/// Natural coordinates of the edge point `s ∈ [−1, 1]` running from local corner `a` to `b`.
fn edge_point(a: usize, b: usize, s: f64) -> (f64, f64) {
    let (wa, wb) = (0.5 * (1.0 - s), 0.5 * (1.0 + s));
    (wa * CORNERS[a].0 + wb * CORNERS[b].0, wa * CORNERS[a].1 + wb * CORNERS[b].1)
}

fn corner_of(nodes: &[usize; 4], n: usize) -> Option<usize> {
    nodes.iter().position(|&m| m == n)
}

fn interface_kinematics(
    mesh: &Mesh,
    i: usize,
    integration: Integration,
    ply_d: &dyn Fn(PlyAngle) -> PlaneStressMatrix,
) -> Result<InterfaceKinematics> {
    let ie = &mesh.interfaces[i];
    let link_err = |side: &str| Error::Assembly(format!("interface {i} is not attached to its {side} neighbour"));
    let up = mesh.q4.get(ie.upper).ok_or_else(|| link_err("upper"))?;
    let lo = mesh.q4.get(ie.lower).ok_or_else(|| link_err("lower"))?;
    let uc = [corner_of(&up.nodes, ie.top[0]), corner_of(&up.nodes, ie.top[1])];
    let lc = [corner_of(&lo.nodes, ie.bottom[0]), corner_of(&lo.nodes, ie.bottom[1])];
    let (Some(u0), Some(u1)) = (uc[0], uc[1]) else { return Err(link_err("upper")) };
    let (Some(l0), Some(l1)) = (lc[0], lc[1]) else { return Err(link_err("lower")) };

    let x0 = mesh.nodes[ie.bottom[0]];
    let x1 = mesh.nodes[ie.bottom[1]];
    let length = (x1 - x0).norm();
    if !(length > 0.0) {
        return Err(Error::Element { element: i, reason: "interface element has zero length".into() });
    }
    let t = (x1 - x0) / length;
    let n = Vector2::new(-t.y, t.x);
    let theta = Matrix2::new(t.x, t.y, n.x, n.y);

    let centroid = |nodes: &[usize; 4]| nodes.iter().map(|&k| mesh.nodes[k].coords).sum::<Vector2<f64>>() / 4.0;
    if (centroid(&up.nodes) - x0.coords).dot(&n) <= 0.0 || (centroid(&lo.nodes) - x0.coords).dot(&n) >= 0.0 {
        return Err(Error::Assembly(format!("interface {i}: normal does not point into the upper subdomain")));
    }

    let up_coords = mesh.q4_coords(ie.upper);
    let lo_coords = mesh.q4_coords(ie.lower);
    let mut points = Vec::with_capacity(2);
    for s in integration.abscissae() {
        let b_at = |coords: &[Point2<f64>; 4], a: usize, b: usize, side: &str| {
            let (xi, eta) = edge_point(a, b, s);
            shape::b_matrix(coords, xi, eta).map(|(b, _)| b).ok_or_else(|| Error::Element {
                element: i,
                reason: format!("{side} neighbour has a non-positive Jacobian on the interface"),
            })
        };
        points.push(InterfacePoint {
            x: Point2::from(x0.coords * (0.5 * (1.0 - s)) + x1.coords * (0.5 * (1.0 + s))),
            n: [0.5 * (1.0 - s), 0.5 * (1.0 + s)],
            weight: 0.5 * length,
            b_upper: b_at(&up_coords, u0, u1, "upper")?,
            b_lower: b_at(&lo_coords, l0, l1, "lower")?,
        });
    }

    let dofs: [usize; 8] = node_dofs(&[ie.bottom[0], ie.bottom[1], ie.top[0], ie.top[1]]).try_into().expect("8 dofs");
    Ok(InterfaceKinematics {
        dofs,
        upper_dofs: node_dofs(&up.nodes).try_into().expect("8 dofs"),
        lower_dofs: node_dofs(&lo.nodes).try_into().expect("8 dofs"),
        theta,
        length,
        points: [points[0], points[1]],
        d_upper: ply_d(up.ply).0,
        d_lower: ply_d(lo.ply).0,
    })
}
