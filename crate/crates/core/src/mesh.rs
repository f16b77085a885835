//! Structured meshes with duplicated interface nodes.
//!
//! Every mesh is two stacked blocks: the lower block is Ω2 and the upper
//! block is Ω1, joined along the interface by zero-thickness elements whose
//! paired nodes coincide in the reference configuration. Nodes are numbered
//! column by column, which keeps the bandwidth of the assembled system small.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::PlyAngle;
use crate::shape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subdomain {
    /// Ω1, the side the interface normal points into.
    Upper,
    /// Ω2.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q4Element {
    /// Counter-clockwise node ids.
    pub nodes: [usize; 4],
    pub ply: PlyAngle,
    pub subdomain: Subdomain,
}

/// Zero-thickness four-node interface element.
///
/// `top[i]` is the duplicate of `bottom[i]`; the tangent runs from node 0 to
/// node 1 and the normal is the tangent rotated by +90°, pointing into Ω1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceElement {
    /// Nodes on the Ω2 face.
    pub bottom: [usize; 2],
    /// Nodes on the Ω1 face.
    pub top: [usize; 2],
    /// Neighbouring continuum element in Ω1.
    pub upper: usize,
    /// Neighbouring continuum element in Ω2.
    pub lower: usize,
    pub precracked: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub nodes: Vec<Point2<f64>>,
    pub q4: Vec<Q4Element>,
    pub interfaces: Vec<InterfaceElement>,
    pub sets: BTreeMap<String, Vec<usize>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    PatchHorizontal,
    PatchInclined,
    Dcb,
    Enf,
    Frmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    /// Length along X1 (mm).
    pub length: f64,
    /// Total thickness along X2 (mm).
    pub height: f64,
    /// Pre-crack length measured from X1 = 0 (mm).
    pub a0: f64,
    /// Element columns (interface elements).
    pub nx: usize,
    /// Element rows in each of the two blocks.
    pub ny_per_arm: usize,
    pub perturb_fraction: f64,
    pub seed: u64,
    /// Interface angle to X1 in degrees (inclined patch only).
    pub angle_deg: f64,
    pub upper_ply: PlyAngle,
    pub lower_ply: PlyAngle,
}

impl GeometrySpec {
    pub fn patch_horizontal(nx: usize) -> Self {
        Self {
            kind: GeometryKind::PatchHorizontal,
            length: 1.0,
            height: 1.0,
            a0: 0.0,
            nx,
            ny_per_arm: nx.div_ceil(2),
            perturb_fraction: 0.0,
            seed: 0,
            angle_deg: 0.0,
            upper_ply: PlyAngle::Deg0,
            lower_ply: PlyAngle::Deg0,
        }
    }

    /// 13 interface elements at 140.4° through the centre, 9 rows on each side.
    pub fn patch_inclined() -> Self {
        Self {
            kind: GeometryKind::PatchInclined,
            nx: 13,
            ny_per_arm: 9,
            angle_deg: 140.4,
            ..Self::patch_horizontal(10)
        }
    }

    pub fn dcb() -> Self {
        Self::beam(GeometryKind::Dcb, 150.0, 300)
    }

    pub fn enf() -> Self {
        Self::beam(GeometryKind::Enf, 100.0, 200)
    }

    pub fn frmm() -> Self {
        Self::beam(GeometryKind::Frmm, 50.0, 100)
    }

    fn beam(kind: GeometryKind, length: f64, nx: usize) -> Self {
        Self {
            kind,
            length,
            height: 3.1,
            a0: 35.0,
            nx,
            ny_per_arm: 4,
            perturb_fraction: 0.0,
            seed: 0,
            angle_deg: 0.0,
            upper_ply: PlyAngle::Deg0,
            lower_ply: PlyAngle::Deg0,
        }
    }

    pub fn with_plies(mut self, upper: PlyAngle, lower: PlyAngle) -> Self {
        self.upper_ply = upper;
        self.lower_ply = lower;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 1 || self.ny_per_arm < 1 {
            return Err(Error::Geometry("nx and ny_per_arm must be at least 1".into()));
        }
        if !(self.length > 0.0 && self.height > 0.0) {
            return Err(Error::Geometry("length and height must be positive".into()));
        }
        if !(self.a0 >= 0.0 && self.a0 < self.length) {
            return Err(Error::Geometry(format!("pre-crack a0 = {} must lie in [0, L = {})", self.a0, self.length)));
        }
        if !(0.0..0.5).contains(&self.perturb_fraction) {
            return Err(Error::Geometry(format!("perturb_fraction {} must lie in [0, 0.5)", self.perturb_fraction)));
        }
        Ok(())
    }
}

impl Mesh {
    pub fn q4_coords(&self, e: usize) -> [Point2<f64>; 4] {
        self.q4[e].nodes.map(|n| self.nodes[n])
    }

    pub fn interface_length(&self, i: usize) -> f64 {
        let ie = &self.interfaces[i];
        (self.nodes[ie.bottom[1]] - self.nodes[ie.bottom[0]]).norm()
    }

    pub fn set(&self, name: &str) -> Result<&[usize]> {
        self.sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Geometry(format!("mesh has no node set named {name:?}")))
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    /// Checks the structural invariants every builder guarantees.
    pub fn check(&self) -> Result<()> {
        for (e, _) in self.q4.iter().enumerate() {
            let j = shape::min_gauss_jacobian(&self.q4_coords(e));
            if !(j > 0.0) {
                return Err(Error::Geometry(format!("element {e} has non-positive Jacobian {j:e}")));
            }
        }
        for (i, ie) in self.interfaces.iter().enumerate() {
            for k in 0..2 {
                if self.nodes[ie.bottom[k]] != self.nodes[ie.top[k]] {
                    return Err(Error::Geometry(format!("interface {i} has non-zero thickness")));
                }
            }
            let up = &self.q4[ie.upper];
            let lo = &self.q4[ie.lower];
            if up.subdomain != Subdomain::Upper || lo.subdomain != Subdomain::Lower {
                return Err(Error::Geometry(format!("interface {i} neighbours are not in opposite subdomains")));
            }
            if !ie.top.iter().all(|n| up.nodes.contains(n)) || !ie.bottom.iter().all(|n| lo.nodes.contains(n)) {
                return Err(Error::Geometry(format!("interface {i} is not attached to its neighbours")));
            }
        }
        Ok(())
    }

    /// Plain-text listing of nodes and elements.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# delam-fem mesh v1");
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {:.16e} {:.16e}", p.x, p.y);
        }
        let _ = writeln!(s, "q4 {}", self.q4.len());
        for (i, e) in self.q4.iter().enumerate() {
            let ply = match e.ply {
                PlyAngle::Deg0 => 0,
                PlyAngle::Deg90 => 90,
            };
            let sub = match e.subdomain {
                Subdomain::Upper => 1,
                Subdomain::Lower => 2,
            };
            let [a, b, c, d] = e.nodes;
            let _ = writeln!(s, "{i} {a} {b} {c} {d} {ply} {sub}");
        }
        let _ = writeln!(s, "interfaces {}", self.interfaces.len());
        for (i, e) in self.interfaces.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i} {} {} {} {} {} {} {}",
                e.bottom[0],
                e.bottom[1],
                e.top[0],
                e.top[1],
                e.upper,
                e.lower,
                u8::from(e.precracked)
            );
        }
        s
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.dump()).map_err(|e| Error::io(path, e))
    }
}

/// Two stacked blocks sharing a column layout.
struct Layered<'a> {
    xs: &'a [f64],
    ny_lower: usize,
    ny_upper: usize,
    upper_ply: PlyAngle,
    lower_ply: PlyAngle,
}

impl Layered<'_> {
    fn per_column(&self) -> usize {
        self.ny_lower + self.ny_upper + 2
    }

    fn lower_node(&self, i: usize, j: usize) -> usize {
        i * self.per_column() + j
    }

    fn upper_node(&self, i: usize, j: usize) -> usize {
        i * self.per_column() + self.ny_lower + 1 + j
    }

    /// `y_lower(i, j)` for rows `0..=ny_lower` and `y_upper(i, j)` for rows
    /// `0..=ny_upper`; row `ny_lower` below and row 0 above lie on the interface.
    fn build(&self, y_lower: impl Fn(usize, usize) -> f64, y_upper: impl Fn(usize, usize) -> f64) -> Mesh {
        let nx = self.xs.len() - 1;
        let mut nodes = Vec::with_capacity((nx + 1) * self.per_column());
        for (i, &x) in self.xs.iter().enumerate() {
            for j in 0..self.ny_lower {
                nodes.push(Point2::new(x, y_lower(i, j)));
            }
            // Both faces take the same coordinate so the pair coincides bitwise.
            nodes.push(Point2::new(x, y_upper(i, 0)));
            for j in 0..=self.ny_upper {
                nodes.push(Point2::new(x, y_upper(i, j)));
            }
        }

        let per_elem_col = self.ny_lower + self.ny_upper;
        let mut q4 = Vec::with_capacity(nx * per_elem_col);
        for i in 0..nx {
            for j in 0..self.ny_lower {
                q4.push(Q4Element {
                    nodes: [
                        self.lower_node(i, j),
                        self.lower_node(i + 1, j),
                        self.lower_node(i + 1, j + 1),
                        self.lower_node(i, j + 1),
                    ],
                    ply: self.lower_ply,
                    subdomain: Subdomain::Lower,
                });
            }
            for j in 0..self.ny_upper {
                q4.push(Q4Element {
                    nodes: [
                        self.upper_node(i, j),
                        self.upper_node(i + 1, j),
                        self.upper_node(i + 1, j + 1),
                        self.upper_node(i, j + 1),
                    ],
                    ply: self.upper_ply,
                    subdomain: Subdomain::Upper,
                });
            }
        }

        let interfaces = (0..nx)
            .map(|i| InterfaceElement {
                bottom: [self.lower_node(i, self.ny_lower), self.lower_node(i + 1, self.ny_lower)],
                top: [self.upper_node(i, 0), self.upper_node(i + 1, 0)],
                upper: i * per_elem_col + self.ny_lower,
                lower: i * per_elem_col + self.ny_lower - 1,
                precracked: false,
            })
            .collect();

        let mut sets = BTreeMap::new();
        sets.insert("bottom".into(), (0..=nx).map(|i| self.lower_node(i, 0)).collect());
        sets.insert("top".into(), (0..=nx).map(|i| self.upper_node(i, self.ny_upper)).collect());
        let column = |i: usize| -> Vec<usize> { (0..self.per_column()).map(|k| i * self.per_column() + k).collect() };
        sets.insert("left".into(), column(0));
        sets.insert("right".into(), column(nx));
        sets.insert("bottom_left".into(), vec![self.lower_node(0, 0)]);
        sets.insert("bottom_right".into(), vec![self.lower_node(nx, 0)]);
        sets.insert("top_left".into(), vec![self.upper_node(0, self.ny_upper)]);
        sets.insert("top_right".into(), vec![self.upper_node(nx, self.ny_upper)]);

        Mesh { nodes, q4, interfaces, sets, warnings: Vec::new() }
    }
}

fn uniform(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Square patch with a straight horizontal or inclined interface.
pub fn build_patch(spec: &GeometrySpec) -> Result<Mesh> {
    spec.validate()?;
    let (l, h) = (spec.length, spec.height);
    let xs = uniform(spec.nx, 0.0, l);
    let ny = spec.ny_per_arm;
    let layered = Layered { xs: &xs, ny_lower: ny, ny_upper: ny, upper_ply: spec.upper_ply, lower_ply: spec.lower_ply };
    let mesh = match spec.kind {
        GeometryKind::PatchHorizontal => {
            let yi = 0.5 * h;
            layered.build(|_, j| yi * j as f64 / ny as f64, |_, j| yi + (h - yi) * j as f64 / ny as f64)
        }
        GeometryKind::PatchInclined => {
            let slope = spec.angle_deg.to_radians().tan();
            let interface_y = |x: f64| 0.5 * h + (x - 0.5 * l) * slope;
            let (y_left, y_right) = (interface_y(0.0), interface_y(l));
            let inside = |y: f64| y > 0.0 && y < h && y.is_finite();
            if !inside(y_left) || !inside(y_right) {
                return Err(Error::Geometry(format!(
                    "interface at {}° leaves the patch through its top or bottom edge",
                    spec.angle_deg
                )));
            }
            let yi: Vec<f64> = xs.iter().map(|&x| interface_y(x)).collect();
            layered.build(|i, j| yi[i] * j as f64 / ny as f64, |i, j| yi[i] + (h - yi[i]) * j as f64 / ny as f64)
        }
        other => return Err(Error::Geometry(format!("build_patch cannot build {other:?}"))),
    };
    mesh.check()?;
    if spec.perturb_fraction > 0.0 {
        return perturb_interface(&mesh, spec.perturb_fraction, spec.seed);
    }
    Ok(mesh)
}

/// Layered beam with a pre-crack at the left end.
pub fn build_beam(spec: &GeometrySpec) -> Result<Mesh> {
    spec.validate()?;
    if !matches!(spec.kind, GeometryKind::Dcb | GeometryKind::Enf | GeometryKind::Frmm) {
        return Err(Error::Geometry(format!("build_beam cannot build {:?}", spec.kind)));
    }
    let (l, h, nx, ny) = (spec.length, spec.height, spec.nx, spec.ny_per_arm);
    let xs = uniform(nx, 0.0, l);
    let arm = 0.5 * h;
    let layered = Layered { xs: &xs, ny_lower: ny, ny_upper: ny, upper_ply: spec.upper_ply, lower_ply: spec.lower_ply };
    let mut mesh = layered.build(|_, j| arm * j as f64 / ny as f64, |_, j| arm + arm * j as f64 / ny as f64);

    let dx = l / nx as f64;
    let crack_cols = (spec.a0 / dx).round() as usize;
    let snapped = crack_cols as f64 * dx;
    if (snapped - spec.a0).abs() > 1e-9 * dx {
        mesh.warnings.push(format!("pre-crack a0 = {} is not on the element grid; snapped to {snapped}", spec.a0));
    }
    for ie in mesh.interfaces.iter_mut().take(crack_cols) {
        ie.precracked = true;
    }

    if spec.kind == GeometryKind::Enf {
        if nx % 2 != 0 {
            return Err(Error::Geometry("ENF needs an even number of columns for the mid-span load node".into()));
        }
        let mid = vec![layered.upper_node(nx / 2, ny)];
        mesh.sets.insert("top_mid".into(), mid);
    }
    for w in &mesh.warnings {
        log::warn!("{w}");
    }
    mesh.check()?;
    if spec.perturb_fraction > 0.0 {
        return perturb_interface(&mesh, spec.perturb_fraction, spec.seed);
    }
    Ok(mesh)
}

pub fn build(spec: &GeometrySpec) -> Result<Mesh> {
    match spec.kind {
        GeometryKind::PatchHorizontal | GeometryKind::PatchInclined => build_patch(spec),
        _ => build_beam(spec),
    }
}

/// Moves interior interface node pairs vertically by seeded uniform amounts
/// in `[−fraction·h, fraction·h]`, where `h` is the interface element length.
pub fn perturb_interface(mesh: &Mesh, fraction: f64, seed: u64) -> Result<Mesh> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(Error::Geometry(format!("perturbation fraction {fraction} must lie in [0, 0.5)")));
    }
    if fraction == 0.0 || mesh.interfaces.is_empty() {
        return Ok(mesh.clone());
    }
    let y0 = mesh.nodes[mesh.interfaces[0].bottom[0]].y;
    let horizontal = mesh
        .interfaces
        .iter()
        .all(|ie| ie.bottom.iter().all(|&n| (mesh.nodes[n].y - y0).abs() <= 1e-12 * (1.0 + y0.abs())));
    if !horizontal {
        return Err(Error::Geometry("perturbation requires a horizontal interface".into()));
    }

    // Interface node pairs in order of X1, with the number of elements sharing each.
    let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for ie in &mesh.interfaces {
        for k in 0..2 {
            *pairs.entry((ie.bottom[k], ie.top[k])).or_default() += 1;
        }
    }
    let mut ordered: Vec<((usize, usize), usize)> = pairs.into_iter().collect();
    ordered.sort_by(|a, b| mesh.nodes[a.0 .0].x.total_cmp(&mesh.nodes[b.0 .0].x));

    let h = mesh.interface_length(0);
    let amplitude = fraction * h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = mesh.clone();
    for ((bottom, top), count) in ordered {
        if count < 2 {
            continue;
        }
        let dy = rng.random_range(-amplitude..=amplitude);
        let y = mesh.nodes[bottom].y + dy;
        out.nodes[bottom].y = y;
        out.nodes[top].y = y;
    }
    out.check()?;
    Ok(out)
}

/// Warns when fewer than three interface elements fit in the process zone
/// `l_cz = E·G_C/strength²` of either pure mode.
pub fn process_zone_warnings(
    mesh: &Mesh,
    e_transverse: f64,
    g_ic: f64,
    g_iic: f64,
    sigma_max: f64,
    tau_max: f64,
) -> Vec<String> {
    let lcz_1 = e_transverse * g_ic / (sigma_max * sigma_max);
    let lcz_2 = e_transverse * g_iic / (tau_max * tau_max);
    let limit = lcz_1.min(lcz_2) / 3.0;
    let longest = (0..mesh.interfaces.len()).map(|i| mesh.interface_length(i)).fold(0.0, f64::max);
    if longest > limit {
        vec![format!(
            "interface element length {longest:.4} mm exceeds l_cz/3 = {limit:.4} mm (l_cz = {lcz_1:.3}/{lcz_2:.3} mm)"
        )]
    } else {
        Vec::new()
    }
}
