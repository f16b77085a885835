//! Lamina elastic constants and plane-stress constitutive matrices.
//!
//! Voigt order is `(σ11, σ22, σ12)` against `(ε11, ε22, 2ε12)`. Units are
//! N and mm throughout, so moduli are in N/mm².

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transversely isotropic lamina constants (fibre direction is axis 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminaProperties {
    #[serde(rename = "E11")]
    pub e11: f64,
    #[serde(rename = "E22")]
    pub e22: f64,
    #[serde(rename = "E33")]
    pub e33: f64,
    #[serde(rename = "G12")]
    pub g12: f64,
    #[serde(rename = "G13")]
    pub g13: f64,
    #[serde(rename = "G23")]
    pub g23: f64,
    pub nu12: f64,
    pub nu13: f64,
    pub nu23: f64,
}

impl LaminaProperties {
    /// HTA/6376C unidirectional carbon/epoxy.
    pub const fn hta_6376c() -> Self {
        Self {
            e11: 1.2e5,
            e22: 1.05e4,
            e33: 1.05e4,
            g12: 5.52e3,
            g13: 5.52e3,
            g23: 3.48e3,
            nu12: 0.3,
            nu13: 0.3,
            nu23: 0.51,
        }
    }

    /// Isotropic material with the given Young's modulus and Poisson ratio.
    pub fn isotropic(e: f64, nu: f64) -> Self {
        let g = e / (2.0 * (1.0 + nu));
        Self { e11: e, e22: e, e33: e, g12: g, g13: g, g23: g, nu12: nu, nu13: nu, nu23: nu }
    }

    /// Minor Poisson ratio ν21 = ν12·E22/E11.
    pub fn nu21(&self) -> f64 {
        self.nu12 * self.e22 / self.e11
    }

    pub fn validate(&self) -> Result<()> {
        let moduli = [
            ("E11", self.e11),
            ("E22", self.e22),
            ("E33", self.e33),
            ("G12", self.g12),
            ("G13", self.g13),
            ("G23", self.g23),
        ];
        for (name, v) in moduli {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidMaterial(format!("{name} must be positive, got {v}")));
            }
        }
        let product = self.nu12 * self.nu21();
        if !(0.0..1.0).contains(&product) {
            return Err(Error::InvalidMaterial(format!("nu12*nu21 must lie in [0, 1), got {product}")));
        }
        if !(self.nu23 > -1.0 && self.nu23 < 1.0) {
            return Err(Error::InvalidMaterial(format!("nu23 must lie in (-1, 1), got {}", self.nu23)));
        }
        Ok(())
    }

    /// Transverse-isotropy consistency: E22 = E33, G12 = G13, ν12 = ν13.
    pub fn is_transversely_isotropic(&self, rel_tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs());
        close(self.e22, self.e33) && close(self.g12, self.g13) && close(self.nu12, self.nu13)
    }
}

impl Default for LaminaProperties {
    fn default() -> Self {
        Self::hta_6376c()
    }
}

/// In-plane ply orientation. The laminate plane is X1–X2 and X3 is out of plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PlyAngle {
    /// Fibres along X1.
    Deg0,
    /// Fibres along X3, so the X1–X2 plane is the plane of isotropy.
    Deg90,
}

/// Symmetric 3×3 reduced stiffness in Voigt notation (N/mm²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStressMatrix(pub Matrix3<f64>);

impl PlaneStressMatrix {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn q11(&self) -> f64 {
        self.0[(0, 0)]
    }
    pub fn q22(&self) -> f64 {
        self.0[(1, 1)]
    }
    pub fn q12(&self) -> f64 {
        self.0[(0, 1)]
    }
    pub fn q66(&self) -> f64 {
        self.0[(2, 2)]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0 * c)
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let eig = self.0.symmetric_eigen().eigenvalues;
        [eig[0], eig[1], eig[2]]
    }
}

/// Plane-stress reduced stiffness of a ply in the X1–X2 plane.
pub fn reduced_stiffness(props: &LaminaProperties, angle: PlyAngle) -> Result<PlaneStressMatrix> {
    props.validate()?;
    let (e1, e2, nu12, g12) = match angle {
        PlyAngle::Deg0 => (props.e11, props.e22, props.nu12, props.g12),
        PlyAngle::Deg90 => (props.e22, props.e33, props.nu23, props.g23),
    };
    let nu21 = nu12 * e2 / e1;
    let denom = 1.0 - nu12 * nu21;
    let q11 = e1 / denom;
    let q22 = e2 / denom;
    let q12 = nu12 * e2 / denom;
    let d = PlaneStressMatrix(Matrix3::new(q11, q12, 0.0, q12, q22, 0.0, 0.0, 0.0, g12));
    if d.eigenvalues().iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidMaterial(format!("reduced stiffness for {angle:?} ply is not positive definite")));
    }
    Ok(d)
}

/// Largest eigenvalue magnitude of the Voigt matrix.
pub fn spectral_norm(d: &PlaneStressMatrix) -> f64 {
    d.eigenvalues().iter().fold(0.0_f64, |m, l| m.max(l.abs()))
}
