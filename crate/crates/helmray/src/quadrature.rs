//! Tensor-product Gauss-Legendre quadrature for element interiors and faces.
//!
//! Integrands of the modulated basis oscillate like exp(2i*omega*x/c), so
//! the number of points per axis is chosen from the total phase swing
//! across an element rather than a fixed polynomial order.

use crate::mesh::Face;
use crate::Point;

/// 1D Gauss-Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess: Chebyshev-like approximation of the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Quadrature rule with `points_per_axis` Gauss-Legendre points, reused for
/// element interiors and faces of a fixed-size Cartesian mesh.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points_per_axis: usize,
    /// Nodes mapped to [0, 1].
    nodes01: Vec<f64>,
    /// Weights scaled for [0, 1].
    weights01: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(points_per_axis: usize) -> Self {
        let (nodes, weights) = gauss_legendre(points_per_axis);
        QuadratureRule {
            points_per_axis,
            nodes01: nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights01: weights.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// Points per axis needed so that element integrals of integrands
    /// oscillating with total phase `2*omega*h/c_min` stay near machine
    /// accuracy: about half the phase swing plus a safety margin.
    pub fn points_for(omega: f64, h: f64, c_min: f64) -> usize {
        let phase = omega * h / c_min;
        (phase.ceil() as usize + 8).max(4)
    }

    pub fn for_oscillation(omega: f64, h: f64, c_min: f64) -> Self {
        QuadratureRule::new(Self::points_for(omega, h, c_min))
    }

    /// Tensor points and weights over the box [lower, upper] in `dim`
    /// dimensions.
    pub fn cell_points(&self, dim: usize, lower: &Point, upper: &Point) -> Vec<(Point, f64)> {
        let n = self.points_per_axis;
        let total = n.pow(dim as u32);
        let mut out = Vec::with_capacity(total);
        let vol_scale: f64 = (0..dim).map(|a| upper[a] - lower[a]).product();
        for flat in 0..total {
            let mut idx = flat;
            let mut p = [0.0; 3];
            let mut w = vol_scale;
            for a in 0..dim {
                let i = idx % n;
                idx /= n;
                p[a] = lower[a] + self.nodes01[i] * (upper[a] - lower[a]);
                w *= self.weights01[i];
            }
            out.push((p, w));
        }
        out
    }

    /// Tensor points and weights over a mesh face.
    pub fn face_points(&self, dim: usize, face: &Face) -> Vec<(Point, f64)> {
        let n = self.points_per_axis;
        let other: Vec<usize> = (0..dim).filter(|&a| a != face.axis).collect();
        let total = n.pow(other.len() as u32);
        let mut out = Vec::with_capacity(total);
        let area = face.measure(dim);
        for flat in 0..total {
            let mut idx = flat;
            let mut p = face.corner;
            let mut w = area;
            for &a in &other {
                let i = idx % n;
                idx /= n;
                p[a] = face.corner[a] + self.nodes01[i] * face.extent[a];
                w *= self.weights01[i];
            }
            out.push((p, w));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn low_order_nodes_match_tables() {
        let (x, w) = gauss_legendre(3);
        assert_relative_eq!(x[0], -0.774596669241483, max_relative = 1e-12);
        assert_relative_eq!(x[1], 0.0, epsilon = 1e-15);
        assert_relative_eq!(w[1], 0.888888888888889, max_relative = 1e-12);
        let (x, w) = gauss_legendre(5);
        assert_relative_eq!(x[4], 0.906179845938664, max_relative = 1e-12);
        assert_relative_eq!(w[0], 0.236926885056189, max_relative = 1e-12);
    }

    #[test]
    fn weights_positive_and_sum_to_measure() {
        for n in 1..40 {
            let rule = QuadratureRule::new(n);
            let pts = rule.cell_points(2, &[0.0, 0.0, 0.0], &[0.5, 0.25, 0.0]);
            assert!(pts.iter().all(|&(_, w)| w > 0.0));
            let sum: f64 = pts.iter().map(|&(_, w)| w).sum();
            assert_relative_eq!(sum, 0.125, max_relative = 1e-13);
        }
    }

    proptest! {
        // Exactness for polynomials of degree <= 2n-1 per axis.
        #[test]
        fn polynomial_exactness(n in 1usize..12, k in 0usize..8) {
            let deg = (2 * n - 1).min(k);
            let rule = QuadratureRule::new(n);
            let pts = rule.cell_points(1, &[0.0; 3], &[1.0, 0.0, 0.0]);
            let got: f64 = pts.iter().map(|&(p, w)| w * p[0].powi(deg as i32)).sum();
            let exact = 1.0 / (deg as f64 + 1.0);
            prop_assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn oscillatory_rule_reaches_tight_accuracy() {
        // Worst case at the paper scale: total phase 2*omega*H with
        // omega = 80*pi, H = 1/40 -> 4*pi per element.
        let omega = 80.0 * std::f64::consts::PI;
        let h = 1.0 / 40.0;
        let rule = QuadratureRule::for_oscillation(omega, h, 1.0);
        let pts = rule.cell_points(1, &[0.0; 3], &[h, 0.0, 0.0]);
        let kappa = 2.0 * omega;
        let got: num_complex::Complex64 = pts
            .iter()
            .map(|&(p, w)| num_complex::Complex64::new(0.0, kappa * p[0]).exp() * w)
            .sum();
        let exact = (num_complex::Complex64::new(0.0, kappa * h).exp()
            - num_complex::Complex64::new(1.0, 0.0))
            / num_complex::Complex64::new(0.0, kappa);
        assert!((got - exact).norm() <= 1e-11 * exact.norm().max(h));
    }

    #[test]
    fn face_points_cover_face() {
        let mesh = crate::mesh::build_mesh(
            &crate::mesh::MeshSpec::new_2d([0.0, 0.0], [1.0, 1.0], [2, 2]),
            crate::mesh::NodalRule::default(),
        )
        .unwrap();
        let rule = QuadratureRule::new(4);
        for f in &mesh.faces {
            let pts = rule.face_points(2, f);
            let sum: f64 = pts.iter().map(|&(_, w)| w).sum();
            assert_relative_eq!(sum, 0.5, max_relative = 1e-13);
            for (p, _) in pts {
                assert_relative_eq!(p[f.axis], f.corner[f.axis]);
            }
        }
    }
}
