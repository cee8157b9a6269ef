//! Fixed-size tensor algebra over the two world charts used by the solver.
//!
//! Four coordinate systems are in play:
//!
//! - rectangular Cartesian coordinates `Y` (reference) and `y` (deformed),
//! - curvilinear world coordinates `Θ` (reference) and `θ` (deformed), either
//!   Cartesian `(x, y, z)` or cylindrical `(r, φ, z)`,
//! - normalized element coordinates `ξ ∈ [0,1]³`,
//! - locally orthonormal body coordinates `X`, with `X¹` along the muscle fiber
//!   and `X²` along the collagen struts.
//!
//! The deformation gradient is stored in mixed form, `Φ[(α, I)] = ∂θ^α/∂X^I`,
//! and the right Cauchy-Green tensor is obtained by interposing the deformed
//! world metric: `C_IJ = Φ_I^α g_αβ Φ_J^β`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// World coordinate chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateChart {
    /// `(x, y, z)`.
    Cartesian,
    /// `(r, φ, z)` with the axis along `z`.
    Cylindrical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric {
    pub covariant: Mat3,
    pub contravariant: Mat3,
    pub point: Vec3,
}

impl Metric {
    /// `sqrt(det g)`, the volume factor of the chart.
    pub fn volume_factor(&self) -> f64 {
        self.covariant.determinant().sqrt()
    }
}

fn check_radius(chart: CoordinateChart, point: &Vec3) -> Result<()> {
    if chart == CoordinateChart::Cylindrical && !(point[0] > 0.0) {
        return Err(Error::Domain(format!(
            "cylindrical chart requires r > 0, got r = {}",
            point[0]
        )));
    }
    Ok(())
}

pub fn metric_at(chart: CoordinateChart, point: &Vec3) -> Result<Metric> {
    check_radius(chart, point)?;
    let (covariant, contravariant) = match chart {
        CoordinateChart::Cartesian => (Mat3::identity(), Mat3::identity()),
        CoordinateChart::Cylindrical => {
            let r = point[0];
            (
                Mat3::from_diagonal(&Vec3::new(1.0, r * r, 1.0)),
                Mat3::from_diagonal(&Vec3::new(1.0, 1.0 / (r * r), 1.0)),
            )
        }
    };
    Ok(Metric {
        covariant,
        contravariant,
        point: *point,
    })
}

/// Cartesian position of a chart point.
pub fn to_cartesian(chart: CoordinateChart, point: &Vec3) -> Vec3 {
    match chart {
        CoordinateChart::Cartesian => *point,
        CoordinateChart::Cylindrical => {
            let (r, phi, z) = (point[0], point[1], point[2]);
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        }
    }
}

/// Covariant basis vectors `g_α = ∂y/∂θ^α` in Cartesian components, as matrix columns.
pub fn covariant_basis(chart: CoordinateChart, point: &Vec3) -> Mat3 {
    match chart {
        CoordinateChart::Cartesian => Mat3::identity(),
        CoordinateChart::Cylindrical => {
            let (r, phi) = (point[0], point[1]);
            let (s, c) = phi.sin_cos();
            Mat3::new(c, -r * s, 0.0, s, r * c, 0.0, 0.0, 0.0, 1.0)
        }
    }
}

/// Contravariant basis vectors `g^α` in Cartesian components, as matrix columns.
pub fn contravariant_basis(chart: CoordinateChart, point: &Vec3) -> Result<Mat3> {
    check_radius(chart, point)?;
    Ok(match chart {
        CoordinateChart::Cartesian => Mat3::identity(),
        CoordinateChart::Cylindrical => {
            let (r, phi) = (point[0], point[1]);
            let (s, c) = phi.sin_cos();
            Mat3::new(c, -s / r, 0.0, s, c / r, 0.0, 0.0, 0.0, 1.0)
        }
    })
}

/// Reference body frame: `∂Θ^A/∂X^I` at a reference point.
///
/// Slab: `X = (x, y, z)`. Cylinder: `X¹` circumferential, `X²` axial,
/// `X³` radial, so that `G_I^(x)` is orthonormal.
pub fn body_frame(chart: CoordinateChart, reference_point: &Vec3) -> Result<Mat3> {
    check_radius(chart, reference_point)?;
    Ok(match chart {
        CoordinateChart::Cartesian => Mat3::identity(),
        CoordinateChart::Cylindrical => {
            let r = reference_point[0];
            // rows: (R, Φ, Z); columns: (X¹, X², X³)
            Mat3::new(0.0, 0.0, 1.0, 1.0 / r, 0.0, 0.0, 0.0, 1.0, 0.0)
        }
    })
}

/// Mixed-basis deformation gradient, `Φ[(α, I)] = ∂θ^α/∂X^I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationGradient(pub Mat3);

pub fn deformation_gradient(partials: &Mat3) -> DeformationGradient {
    DeformationGradient(*partials)
}

impl DeformationGradient {
    /// Builds `Φ` from world partials `∂θ/∂Θ` and the reference body frame.
    pub fn from_world(d_theta_d_ref: &Mat3, frame: &Mat3) -> Self {
        DeformationGradient(d_theta_d_ref * frame)
    }

    pub fn components(&self) -> &Mat3 {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub phi: DeformationGradient,
    /// Right Cauchy-Green components in the fiber frame.
    pub c: Mat3,
    /// Green strain `(C - I) / 2`.
    pub e: Mat3,
    pub i1: f64,
    pub i3: f64,
    pub i4: f64,
    pub i6: f64,
}

impl KinematicState {
    pub fn fiber_stretch(&self) -> f64 {
        self.i4.sqrt()
    }

    pub fn cross_fiber_stretch(&self) -> f64 {
        self.i6.sqrt()
    }
}

/// Strain measures at a point with deformed world coordinates `deformed_point`.
pub fn strain_state(
    phi: &DeformationGradient,
    chart: CoordinateChart,
    deformed_point: &Vec3,
) -> Result<KinematicState> {
    let metric = metric_at(chart, deformed_point)?;
    let det_phi = phi.0.determinant();
    if !(det_phi > 0.0) {
        return Err(Error::InvertedElement {
            element: usize::MAX,
            point: usize::MAX,
            det: det_phi,
        });
    }
    let c = phi.0.transpose() * metric.covariant * phi.0;
    // exact symmetry, independent of summation order
    let c = (c + c.transpose()) * 0.5;
    let e = (c - Mat3::identity()) * 0.5;
    Ok(KinematicState {
        phi: *phi,
        c,
        e,
        i1: c.trace(),
        i3: c.determinant(),
        i4: c[(0, 0)],
        i6: c[(1, 1)],
    })
}

/// Christoffel symbols of the second kind, `Γ[β][α][γ] = Γ^β_{αγ}`.
pub fn christoffel(chart: CoordinateChart, point: &Vec3) -> Result<[[[f64; 3]; 3]; 3]> {
    check_radius(chart, point)?;
    let mut g = [[[0.0; 3]; 3]; 3];
    if chart == CoordinateChart::Cylindrical {
        let r = point[0];
        g[0][1][1] = -r;
        g[1][0][1] = 1.0 / r;
        g[1][1][0] = 1.0 / r;
    }
    Ok(g)
}

/// Correction coefficients of the covariant derivative of a covector field,
/// `c[I][α][β] = g_{α,I} · g^β = Γ^β_{αγ} Φ_I^γ`, so that
/// `∇_I(δu_α) = ∂δu_α/∂X^I − c[I][α][β] δu_β`.
pub fn covariant_gradient_coefficients(
    chart: CoordinateChart,
    deformed_point: &Vec3,
    phi: &DeformationGradient,
) -> Result<[[[f64; 3]; 3]; 3]> {
    let gamma = christoffel(chart, deformed_point)?;
    let mut c = [[[0.0; 3]; 3]; 3];
    for (i, ci) in c.iter_mut().enumerate() {
        for (alpha, cia) in ci.iter_mut().enumerate() {
            for (beta, v) in cia.iter_mut().enumerate() {
                *v = (0..3).map(|g| gamma[beta][alpha][g] * phi.0[(g, i)]).sum();
            }
        }
    }
    Ok(c)
}
