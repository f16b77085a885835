//! Bilinear quadrilateral shape functions and Gauss rules.

use nalgebra::{Matrix2, Point2, SMatrix, Vector2};

/// `1/√3`, the abscissa of the two-point Gauss rule on [−1, 1].
pub const GAUSS_2: f64 = 0.577_350_269_189_625_8;

/// Corner natural coordinates, counter-clockwise from (−1, −1).
pub const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// 2×2 Gauss points; each has unit weight.
pub const GAUSS_POINTS: [(f64, f64); 4] =
    [(-GAUSS_2, -GAUSS_2), (GAUSS_2, -GAUSS_2), (GAUSS_2, GAUSS_2), (-GAUSS_2, GAUSS_2)];

pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, &(xa, ea)) in CORNERS.iter().enumerate() {
        n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ea * eta);
    }
    n
}

/// Derivatives with respect to (ξ, η); column `a` belongs to node `a`.
pub fn shape_derivatives(xi: f64, eta: f64) -> SMatrix<f64, 2, 4> {
    let mut dn = SMatrix::<f64, 2, 4>::zeros();
    for (a, &(xa, ea)) in CORNERS.iter().enumerate() {
        dn[(0, a)] = 0.25 * xa * (1.0 + ea * eta);
        dn[(1, a)] = 0.25 * ea * (1.0 + xa * xi);
    }
    dn
}

/// Jacobian `∂x/∂ξ` laid out as `[[∂x/∂ξ, ∂y/∂ξ], [∂x/∂η, ∂y/∂η]]`.
pub fn jacobian(coords: &[Point2<f64>; 4], xi: f64, eta: f64) -> Matrix2<f64> {
    let dn = shape_derivatives(xi, eta);
    let mut j = Matrix2::zeros();
    for a in 0..4 {
        j[(0, 0)] += dn[(0, a)] * coords[a].x;
        j[(0, 1)] += dn[(0, a)] * coords[a].y;
        j[(1, 0)] += dn[(1, a)] * coords[a].x;
        j[(1, 1)] += dn[(1, a)] * coords[a].y;
    }
    j
}

/// Strain-displacement matrix at (ξ, η) and the Jacobian determinant.
///
/// Returns `None` when the Jacobian is not positive.
pub fn b_matrix(coords: &[Point2<f64>; 4], xi: f64, eta: f64) -> Option<(SMatrix<f64, 3, 8>, f64)> {
    let j = jacobian(coords, xi, eta);
    let det = j.determinant();
    if !(det > 0.0) {
        return None;
    }
    let inv = j.try_inverse()?;
    let dxy = inv * shape_derivatives(xi, eta);
    let mut b = SMatrix::<f64, 3, 8>::zeros();
    for a in 0..4 {
        let (dx, dy) = (dxy[(0, a)], dxy[(1, a)]);
        b[(0, 2 * a)] = dx;
        b[(1, 2 * a + 1)] = dy;
        b[(2, 2 * a)] = dy;
        b[(2, 2 * a + 1)] = dx;
    }
    Some((b, det))
}

/// Smallest Jacobian determinant over the 2×2 Gauss points.
pub fn min_gauss_jacobian(coords: &[Point2<f64>; 4]) -> f64 {
    GAUSS_POINTS.iter().map(|&(xi, eta)| jacobian(coords, xi, eta).determinant()).fold(f64::INFINITY, f64::min)
}

/// Element area by 2×2 Gauss quadrature (exact for bilinear geometry).
pub fn area(coords: &[Point2<f64>; 4]) -> f64 {
    GAUSS_POINTS.iter().map(|&(xi, eta)| jacobian(coords, xi, eta).determinant()).sum()
}

/// Physical position of the natural point (ξ, η).
pub fn map(coords: &[Point2<f64>; 4], xi: f64, eta: f64) -> Point2<f64> {
    let n = shape(xi, eta);
    let mut p = Vector2::zeros();
    for a in 0..4 {
        p += coords[a].coords * n[a];
    }
    Point2::from(p)
}
