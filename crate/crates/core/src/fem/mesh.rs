//! Structured hexahedral meshes over a world chart.
//!
//! Nodes carry reference world coordinates `Θ`; for the cylinder these are
//! `(R, Φ, Z)` and elements are boxes in that chart, so the reference geometry
//! is exact. Element node `k` follows the corner ordering of
//! [`shape::corner`](super::shape::corner).
//!
//! The JSON form (see `docs/mesh.schema.json`) is
//!
//! ```json
//! { "chart": "cartesian", "nodes": [[x, y, z], ...],
//!   "elements": [[n0, ..., n7], ...], "frames": ["slab", ...],
//!   "faces": { "xmin": [{ "element": 0, "face": 0 }, ...], ... } }
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::shape::{face_nodes, gauss_points, shape_eval};
use crate::error::{Error, Result};
use crate::tensor::{body_frame, metric_at, CoordinateChart, Mat3, Vec3};

/// Orientation of the body frame `X` inside an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberFrame {
    /// `X = (x, y, z)`: fibers along `x`, struts along `y`.
    Slab,
    /// `X¹` circumferential, `X²` axial, `X³` radial.
    Circumferential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceRef {
    pub element: usize,
    pub face: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mesh {
    pub chart: CoordinateChart,
    pub nodes: Vec<Vec3>,
    pub elements: Vec<[usize; 8]>,
    pub frames: Vec<FiberFrame>,
    pub faces: BTreeMap<String, Vec<FaceRef>>,
}

/// Reference-configuration geometry at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct ReferencePoint {
    pub position: Vec3,
    /// `∂ψ_n/∂X^I`.
    pub dpsi_dx: [Vec3; 8],
    pub psi: [f64; 8],
    /// Physical volume weight (includes the Gauss weight).
    pub dv: f64,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn face_set(&self, label: &str) -> Result<&[FaceRef]> {
        self.faces
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Mesh(format!("unknown face set '{label}'")))
    }

    /// Sorted, de-duplicated node ids on a face set.
    pub fn face_set_nodes(&self, label: &str) -> Result<Vec<usize>> {
        let mut ids: Vec<usize> = self
            .face_set(label)?
            .iter()
            .flat_map(|f| face_nodes(f.face).map(|k| self.elements[f.element][k]))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    pub fn element_nodes(&self, e: usize, coords: &[Vec3]) -> [Vec3; 8] {
        self.elements[e].map(|n| coords[n])
    }

    fn frame_matrix(&self, e: usize, position: &Vec3) -> Result<Mat3> {
        match self.frames[e] {
            FiberFrame::Slab => Ok(Mat3::identity()),
            FiberFrame::Circumferential => body_frame(CoordinateChart::Cylindrical, position),
        }
    }

    /// Reference geometry of element `e` at its eight Gauss points.
    pub fn reference_points(&self, e: usize) -> Result<[ReferencePoint; 8]> {
        let xs = self.element_nodes(e, &self.nodes);
        let mut out = [ReferencePoint {
            position: Vec3::zeros(),
            dpsi_dx: [Vec3::zeros(); 8],
            psi: [0.0; 8],
            dv: 0.0,
        }; 8];
        for (g, (xi, w)) in gauss_points().iter().enumerate() {
            let s = shape_eval(xi);
            let mut position = Vec3::zeros();
            let mut jac = Mat3::zeros(); // ∂Θ/∂ξ
            for n in 0..8 {
                position += s.psi[n] * xs[n];
                jac += xs[n] * s.dpsi[n].transpose();
            }
            let det = jac.determinant();
            let metric = metric_at(self.chart, &position).map_err(|_| Error::InvertedElement {
                element: e,
                point: g,
                det,
            })?;
            if !(det > 0.0) {
                return Err(Error::InvertedElement {
                    element: e,
                    point: g,
                    det,
                });
            }
            let frame = self.frame_matrix(e, &position)?;
            // ∂ξ/∂X = (∂Θ/∂ξ)⁻¹ ∂Θ/∂X
            let dxi_dx = jac.try_inverse().ok_or(Error::InvertedElement {
                element: e,
                point: g,
                det,
            })? * frame;
            let mut dpsi_dx = [Vec3::zeros(); 8];
            for n in 0..8 {
                dpsi_dx[n] = dxi_dx.transpose() * s.dpsi[n];
            }
            out[g] = ReferencePoint {
                position,
                dpsi_dx,
                psi: s.psi,
                dv: det * metric.volume_factor() * w,
            };
        }
        Ok(out)
    }

    pub fn element_volume(&self, e: usize) -> Result<f64> {
        Ok(self.reference_points(e)?.iter().map(|p| p.dv).sum())
    }

    pub fn reference_volume(&self) -> Result<f64> {
        (0..self.element_count()).map(|e| self.element_volume(e)).sum()
    }

    /// Reference area of a face set by 2×2 Gauss quadrature.
    pub fn face_set_area(&self, label: &str) -> Result<f64> {
        let mut area = 0.0;
        for f in self.face_set(label)? {
            let xs = self.element_nodes(f.element, &self.nodes);
            for (xi, w) in super::shape::face_gauss_points(f.face) {
                let (ta, tb) = super::assembly::face_tangents(self.chart, &xs, &xi, f.face);
                area += ta.cross(&tb).norm() * w;
            }
        }
        Ok(area)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.frames.len() != self.elements.len() {
            return Err(Error::Mesh(format!(
                "{} frames for {} elements",
                self.frames.len(),
                self.elements.len()
            )));
        }
        if self.elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }
        if self.nodes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Mesh("non-finite node coordinate".into()));
        }
        for (e, conn) in self.elements.iter().enumerate() {
            if let Some(bad) = conn.iter().find(|&&i| i >= n) {
                return Err(Error::Mesh(format!("element {e} references node {bad} of {n}")));
            }
        }
        for (label, refs) in &self.faces {
            for f in refs {
                if f.element >= self.elements.len() || f.face >= 6 {
                    return Err(Error::Mesh(format!(
                        "face set '{label}' references element {} face {}",
                        f.element, f.face
                    )));
                }
            }
        }
        if self.chart == CoordinateChart::Cartesian && self.frames.contains(&FiberFrame::Circumferential) {
            return Err(Error::Mesh("circumferential frames need a cylindrical chart".into()));
        }
        for e in 0..self.elements.len() {
            self.reference_points(e)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a mesh.
    pub fn from_json(text: &str) -> Result<Self> {
        let mesh: Mesh = serde_json::from_str(text).map_err(|e| Error::Mesh(e.to_string()))?;
        mesh.validate()?;
        Ok(mesh)
    }
}

fn structured(
    chart: CoordinateChart,
    frame: FiberFrame,
    origin: Vec3,
    size: Vec3,
    counts: [usize; 3],
    labels: [&str; 6],
) -> Result<Mesh> {
    if counts.contains(&0) {
        return Err(Error::Mesh(format!("element counts must be positive, got {counts:?}")));
    }
    if !size.iter().all(|&s| s > 0.0 && s.is_finite()) {
        return Err(Error::Mesh(format!("dimensions must be positive, got {size:?}")));
    }
    let [nx, ny, nz] = counts;
    let idx = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(Vec3::new(
                    origin[0] + size[0] * i as f64 / nx as f64,
                    origin[1] + size[1] * j as f64 / ny as f64,
                    origin[2] + size[2] * k as f64 / nz as f64,
                ));
            }
        }
    }
    let mut elements = Vec::with_capacity(nx * ny * nz);
    let mut faces: BTreeMap<String, Vec<FaceRef>> = labels.iter().map(|l| (l.to_string(), Vec::new())).collect();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let e = elements.len();
                elements
                    .push([0, 1, 2, 3, 4, 5, 6, 7].map(|c| idx(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))));
                let on = [i == 0, i + 1 == nx, j == 0, j + 1 == ny, k == 0, k + 1 == nz];
                for (face, hit) in on.iter().enumerate() {
                    if *hit {
                        faces.get_mut(labels[face]).unwrap().push(FaceRef { element: e, face });
                    }
                }
            }
        }
    }
    let frames = vec![frame; elements.len()];
    let mesh = Mesh {
        chart,
        nodes,
        elements,
        frames,
        faces,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Slab `[0,Lx]×[0,Ly]×[0,Lz]` (cm) with fibers along `x`.
pub fn build_slab_mesh(lx: f64, ly: f64, lz: f64, nx: usize, ny: usize, nz: usize) -> Result<Mesh> {
    structured(
        CoordinateChart::Cartesian,
        FiberFrame::Slab,
        Vec3::zeros(),
        Vec3::new(lx, ly, lz),
        [nx, ny, nz],
        ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"],
    )
}

/// Thick-walled cylinder sector in `(R, Φ, Z)`, `Φ ∈ [0, sector_angle]`.
pub fn build_cylinder_mesh(
    r_int: f64,
    r_ext: f64,
    length: f64,
    nr: usize,
    nphi: usize,
    nz: usize,
    sector_angle: f64,
) -> Result<Mesh> {
    if !(r_int > 0.0 && r_ext > r_int) {
        return Err(Error::Mesh(format!(
            "need 0 < r_int < r_ext, got r_int = {r_int}, r_ext = {r_ext}"
        )));
    }
    if !(sector_angle > 0.0 && sector_angle <= 2.0 * PI) {
        return Err(Error::Mesh(format!(
            "sector angle must lie in (0, 2π], got {sector_angle}"
        )));
    }
    structured(
        CoordinateChart::Cylindrical,
        FiberFrame::Circumferential,
        Vec3::new(r_int, 0.0, 0.0),
        Vec3::new(r_ext - r_int, sector_angle, length),
        [nr, nphi, nz],
        ["inner", "outer", "phi_min", "phi_max", "bottom", "top"],
    )
}
