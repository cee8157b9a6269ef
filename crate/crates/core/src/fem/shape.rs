//! Trilinear shape functions on the unit cube and Gauss rules.

use crate::tensor::Vec3;

/// Local corner `k` sits at `(k & 1, (k >> 1) & 1, (k >> 2) & 1)` in `ξ`.
pub fn corner(k: usize) -> [f64; 3] {
    [(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeValues {
    pub psi: [f64; 8],
    /// `∂ψ_n/∂ξ_K`.
    pub dpsi: [Vec3; 8],
}

pub fn shape_eval(xi: &Vec3) -> ShapeValues {
    let mut psi = [0.0; 8];
    let mut dpsi = [Vec3::zeros(); 8];
    for k in 0..8 {
        let c = corner(k);
        // 1D factors and their derivatives
        let f = [0, 1, 2].map(|d| if c[d] == 1.0 { xi[d] } else { 1.0 - xi[d] });
        let df = [0, 1, 2].map(|d| if c[d] == 1.0 { 1.0 } else { -1.0 });
        psi[k] = f[0] * f[1] * f[2];
        dpsi[k] = Vec3::new(df[0] * f[1] * f[2], f[0] * df[1] * f[2], f[0] * f[1] * df[2]);
    }
    ShapeValues { psi, dpsi }
}

const G: f64 = 0.288_675_134_594_812_9; // 1 / (2√3)

/// Two-point Gauss rule on `[0, 1]`.
pub const GAUSS_1D: [(f64, f64); 2] = [(0.5 - G, 0.5), (0.5 + G, 0.5)];

/// 2×2×2 Gauss points on the unit cube, `ξ1` fastest.
pub fn gauss_points() -> [(Vec3, f64); 8] {
    let mut out = [(Vec3::zeros(), 0.0); 8];
    for (k, slot) in out.iter_mut().enumerate() {
        let (a, wa) = GAUSS_1D[k & 1];
        let (b, wb) = GAUSS_1D[(k >> 1) & 1];
        let (c, wc) = GAUSS_1D[(k >> 2) & 1];
        *slot = (Vec3::new(a, b, c), wa * wb * wc);
    }
    out
}

/// Local face `f`: normal axis `f / 2`, at `ξ = f % 2`; the two in-face
/// directions are ordered so that `t_a × t_b` points out of the element.
pub fn face_axes(face: usize) -> (usize, usize, usize, f64) {
    let axis = face / 2;
    let at = (face % 2) as f64;
    let (a, b) = match face {
        0 => (2, 1),
        1 => (1, 2),
        2 => (0, 2),
        3 => (2, 0),
        4 => (1, 0),
        5 => (0, 1),
        _ => panic!("hexahedron has six faces, got {face}"),
    };
    (axis, a, b, at)
}

/// Local nodes lying on face `f`.
pub fn face_nodes(face: usize) -> [usize; 4] {
    let (axis, _, _, at) = face_axes(face);
    let mut out = [0; 4];
    let mut n = 0;
    for k in 0..8 {
        if corner(k)[axis] == at {
            out[n] = k;
            n += 1;
        }
    }
    out
}

/// 2×2 Gauss points on face `f`, as volume coordinates with weights.
pub fn face_gauss_points(face: usize) -> [(Vec3, f64); 4] {
    let (axis, a, b, at) = face_axes(face);
    let mut out = [(Vec3::zeros(), 0.0); 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let (u, wu) = GAUSS_1D[k & 1];
        let (v, wv) = GAUSS_1D[(k >> 1) & 1];
        let mut xi = Vec3::zeros();
        xi[axis] = at;
        xi[a] = u;
        xi[b] = v;
        *slot = (xi, wu * wv);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interpolation_property() {
        for k in 0..8 {
            let c = corner(k);
            let s = shape_eval(&Vec3::new(c[0], c[1], c[2]));
            for n in 0..8 {
                assert_eq!(s.psi[n], if n == k { 1.0 } else { 0.0 });
            }
        }
        let s = shape_eval(&Vec3::new(0.5, 0.5, 0.5));
        assert!(s.psi.iter().all(|&v| v == 0.125));
    }

    #[test]
    fn gauss_weights_sum_to_one() {
        let w: f64 = gauss_points().iter().map(|p| p.1).sum();
        assert!((w - 1.0).abs() < 1e-15);
        // exact for cubic monomials
        let m: f64 = gauss_points().iter().map(|(x, w)| w * x[0].powi(3)).sum();
        assert!((m - 0.25).abs() < 1e-15);
    }

    #[test]
    fn faces_are_outward() {
        for f in 0..6 {
            let (axis, a, b, at) = face_axes(f);
            let mut ea = Vec3::zeros();
            ea[a] = 1.0;
            let mut eb = Vec3::zeros();
            eb[b] = 1.0;
            let n = ea.cross(&eb);
            let sign = if at == 1.0 { 1.0 } else { -1.0 };
            assert_eq!(n[axis], sign);
            assert_eq!(face_nodes(f).len(), 4);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
            let s = shape_eval(&Vec3::new(x, y, z));
            let sum: f64 = s.psi.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-15);
            let dsum = s.dpsi.iter().fold(Vec3::zeros(), |a, d| a + d);
            prop_assert!(dsum.abs().max() < 1e-15);
        }
    }
}
