//! Nonlocal Biot–Savart kernels and the per-scale model strain.
//!
//! The strain contributed by annulus `A_j` under a linear deformation `h` is
//! `g_i = ∫_{A_j} ω_{0,j}(s) K_{1i}(h·s) ds`, assembled as
//! `[[-g2, g1], [g1, g2]]`. Only the off-diagonal (nonlocal) part of the Riesz
//! kernels enters; the delta-supported local part is dropped, so the result is
//! pure symmetric strain with no rotation component.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::littlewood_paley::BandVorticity;
use crate::sl2::{ScaleIndex, Sl2Matrix, TraceFreeMatrix};

pub const DEFAULT_N_R: usize = 24;
pub const DEFAULT_N_THETA: usize = 96;

const ORIGIN_GUARD: f64 = 1e-300;
const DEGENERATE_GUARD: f64 = 1e-12;

/// `K₁₂(x) = x₁x₂ / (π|x|⁴)`.
pub fn kernel_k12(x: [f64; 2]) -> Result<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2.sqrt() < ORIGIN_GUARD {
        return Err(Error::KernelAtOrigin);
    }
    Ok(x[0] * x[1] / (PI * r2 * r2))
}

/// `K₁₁(x) = (x₂² − x₁²) / (2π|x|⁴)`.
pub fn kernel_k11(x: [f64; 2]) -> Result<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2.sqrt() < ORIGIN_GUARD {
        return Err(Error::KernelAtOrigin);
    }
    Ok((x[1] * x[1] - x[0] * x[0]) / (2.0 * PI * r2 * r2))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Polar tensor rule on `A_j = {2^{-j} ≤ |x| < 2^{1-j}}`: Gauss–Legendre in
/// `r` times the periodic trapezoid rule in `θ`, with the Jacobian `r` folded
/// into the weights. Nodes are ordered radius-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusQuadrature {
    pub j: ScaleIndex,
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub n_r: usize,
    pub n_theta: usize,
}

impl AnnulusQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Exact area `3π·4^{-j}` of the annulus.
    pub fn area(&self) -> f64 {
        3.0 * PI * (-2.0 * self.j.0 as f64).exp2()
    }

    /// Quadrature estimate of `∫_{A_j} f`.
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Polar coordinates `(r, θ)` of node `i`.
    pub fn polar(&self, i: usize) -> (f64, f64) {
        let [x, y] = self.nodes[i];
        (x.hypot(y), y.atan2(x))
    }
}

pub fn build_annulus_quadrature(j: ScaleIndex, n_r: usize, n_theta: usize) -> Result<AnnulusQuadrature> {
    if n_r < 4 {
        return Err(Error::InvalidQuadrature(format!("n_r = {n_r} must be at least 4")));
    }
    if n_theta < 8 {
        return Err(Error::InvalidQuadrature(format!(
            "n_theta = {n_theta} must be at least 8"
        )));
    }
    let r0 = j.inner_radius();
    let r1 = 2.0 * r0;
    let (gx, gw) = gauss_legendre(n_r);
    let dtheta = 2.0 * PI / n_theta as f64;
    let angles: Vec<(f64, f64)> = (0..n_theta)
        .map(|k| (dtheta * k as f64).sin_cos())
        .collect();
    let mut nodes = Vec::with_capacity(n_r * n_theta);
    let mut weights = Vec::with_capacity(n_r * n_theta);
    for (x, w) in gx.iter().zip(&gw) {
        let r = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * x;
        let wr = 0.5 * (r1 - r0) * w * r * dtheta;
        for &(s, c) in &angles {
            nodes.push([r * c, r * s]);
            weights.push(wr);
        }
    }
    Ok(AnnulusQuadrature {
        j,
        nodes,
        weights,
        n_r,
        n_theta,
    })
}

/// Model strain `(∇u)_{j,h}` for one band and one deformation.
///
/// Summation runs over the nodes in their stored order on the calling thread.
pub fn grad_u_model(band: &BandVorticity, quad: &AnnulusQuadrature, h: &Sl2Matrix) -> Result<TraceFreeMatrix> {
    if band.j != quad.j {
        return Err(Error::ShapeMismatch(format!(
            "band scale {} does not match quadrature scale {}",
            band.j.0, quad.j.0
        )));
    }
    if band.node_values.len() != quad.len() {
        return Err(Error::ShapeMismatch(format!(
            "band has {} node values, quadrature has {} nodes",
            band.node_values.len(),
            quad.len()
        )));
    }
    if !h.is_finite() || h.det_drift() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "deformation must be finite with unit determinant (det = {})",
            h.det()
        )));
    }
    let (mut g1, mut g2) = (0.0, 0.0);
    for ((&s, &w), &omega) in quad.nodes.iter().zip(&quad.weights).zip(&band.node_values) {
        let [y1, y2] = h.apply(s);
        let r2 = y1 * y1 + y2 * y2;
        if r2.sqrt() < DEGENERATE_GUARD {
            return Err(Error::DegenerateDeformation {
                scale: quad.j.0,
                norm: r2.sqrt(),
            });
        }
        let wo = w * omega / (PI * r2 * r2);
        g1 += wo * 0.5 * (y2 * y2 - y1 * y1);
        g2 += wo * y1 * y2;
    }
    Ok(TraceFreeMatrix::new(g1, g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::littlewood_paley::BandVorticity;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn pattern_band(quad: &AnnulusQuadrature, f: impl Fn(f64, f64) -> f64) -> BandVorticity {
        let values = (0..quad.len())
            .map(|i| {
                let (r, t) = quad.polar(i);
                f(r * quad.j.inner_radius().recip(), t)
            })
            .collect();
        BandVorticity::from_node_values(quad.j, values)
    }

    #[test]
    fn kernel_values() {
        assert_abs_diff_eq!(kernel_k12([1.0, 1.0]).unwrap(), 1.0 / (4.0 * PI), epsilon = 1e-16);
        assert_abs_diff_eq!(kernel_k12([1.0, 1.0]).unwrap(), 0.07957747, epsilon = 1e-8);
        assert_eq!(kernel_k12([1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            kernel_k12([2.0, 2.0]).unwrap(),
            0.25 * kernel_k12([1.0, 1.0]).unwrap(),
            epsilon = 1e-17
        );
        assert_eq!(kernel_k11([1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(kernel_k11([1.0, 0.0]).unwrap(), -1.0 / (2.0 * PI), epsilon = 1e-16);
        assert_abs_diff_eq!(kernel_k11([1.0, 0.0]).unwrap(), -0.15915494, epsilon = 1e-8);
        assert_abs_diff_eq!(kernel_k11([0.0, 1.0]).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-16);
        assert!(matches!(kernel_k11([0.0, 0.0]), Err(Error::KernelAtOrigin)));
        assert!(matches!(kernel_k12([0.0, 0.0]), Err(Error::KernelAtOrigin)));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [4, 7, 24] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn annulus_area_and_symmetry() {
        let q0 = build_annulus_quadrature(ScaleIndex(0), 24, 96).unwrap();
        assert!((q0.weights.iter().sum::<f64>() - 3.0 * PI).abs() < 1e-12 * 3.0 * PI);
        let q5 = build_annulus_quadrature(ScaleIndex(5), 24, 96).unwrap();
        let area5 = 3.0 * PI * 4f64.powi(-5);
        assert!((q5.weights.iter().sum::<f64>() - area5).abs() < 1e-12 * area5);
        assert!(q0.integrate(|x| x[0]).abs() < 1e-14);
        for q in [&q0, &q5] {
            let (lo, hi) = (q.j.inner_radius(), 2.0 * q.j.inner_radius());
            assert!(q.nodes.iter().all(|x| {
                let r = x[0].hypot(x[1]);
                r >= lo && r < hi
            }));
        }
    }

    #[test]
    fn invalid_resolution_rejected() {
        assert!(build_annulus_quadrature(ScaleIndex(0), 3, 96).is_err());
        assert!(build_annulus_quadrature(ScaleIndex(0), 24, 7).is_err());
    }

    #[test]
    fn radial_band_has_no_strain() {
        for n_theta in [8, 12, 96] {
            let q = build_annulus_quadrature(ScaleIndex(2), 6, n_theta).unwrap();
            let band = pattern_band(&q, |r, _| (3.0 * r).sin() + 2.0);
            let g = grad_u_model(&band, &q, &Sl2Matrix::IDENTITY).unwrap();
            assert!(g.g1.abs() < 1e-12 && g.g2.abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn quadrupole_band_matches_polar_integral() {
        // K11 = -cos2θ/(2πr²): angular integral π, radial integral ln 2
        let q = build_annulus_quadrature(ScaleIndex(1), 24, 96).unwrap();
        let band = pattern_band(&q, |_, t| (2.0 * t).cos());
        let g = grad_u_model(&band, &q, &Sl2Matrix::IDENTITY).unwrap();
        assert_abs_diff_eq!(g.g1, -LN_2 / 2.0, epsilon = 1e-12);
        assert!(g.g2.abs() < 1e-12);
        assert_abs_diff_eq!(g.g1, -0.34657, epsilon = 1e-5);

        let rot = Sl2Matrix::rotation(PI / 4.0);
        let g = grad_u_model(&band, &q, &rot).unwrap();
        assert!(g.g1.abs() < 1e-12);
        assert_abs_diff_eq!(g.g2, LN_2 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pattern_is_scale_invariant() {
        let h = Sl2Matrix::new(1.3, 0.4, 0.2, (1.0 + 0.4 * 0.2) / 1.3);
        let reference = {
            let q = build_annulus_quadrature(ScaleIndex(0), 24, 96).unwrap();
            grad_u_model(&pattern_band(&q, |r, t| r * (2.0 * t).cos() + (t).sin()), &q, &h).unwrap()
        };
        for j in 1..=10 {
            let q = build_annulus_quadrature(ScaleIndex(j), 24, 96).unwrap();
            let g = grad_u_model(&pattern_band(&q, |r, t| r * (2.0 * t).cos() + (t).sin()), &q, &h).unwrap();
            assert!((g.g1 - reference.g1).abs() < 1e-10);
            assert!((g.g2 - reference.g2).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_converges_under_stretching() {
        let h = Sl2Matrix::diag(2.0, 0.5);
        let eval = |n_r, n_theta| {
            let q = build_annulus_quadrature(ScaleIndex(0), n_r, n_theta).unwrap();
            grad_u_model(&pattern_band(&q, |_, t| (2.0 * t).cos()), &q, &h).unwrap()
        };
        let coarse = eval(DEFAULT_N_R, DEFAULT_N_THETA);
        let fine = eval(64, 256);
        assert!((coarse.g1 - fine.g1).abs() < 1e-8);
        assert!((coarse.g2 - fine.g2).abs() < 1e-8);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let q = build_annulus_quadrature(ScaleIndex(1), 4, 8).unwrap();
        let other = build_annulus_quadrature(ScaleIndex(2), 4, 8).unwrap();
        let band = pattern_band(&other, |_, _| 1.0);
        assert!(grad_u_model(&band, &q, &Sl2Matrix::IDENTITY).is_err());
        let band = pattern_band(&q, |_, _| 1.0);
        assert!(grad_u_model(&band, &q, &Sl2Matrix::diag(2.0, 2.0)).is_err());
        let singular = Sl2Matrix::new(1.0, 0.0, 0.0, 1.0 - 1e-7);
        assert!(grad_u_model(&band, &q, &singular).is_ok());
    }

    #[test]
    fn corrupted_deformation_is_degenerate() {
        let q = build_annulus_quadrature(ScaleIndex(0), 4, 8).unwrap();
        let band = pattern_band(&q, |_, _| 1.0);
        // unit determinant but collapses the first node direction onto the origin numerically
        let h = Sl2Matrix::new(1e-14, 0.0, 0.0, 1e14);
        assert!(matches!(
            grad_u_model(&band, &q, &h),
            Err(Error::DegenerateDeformation { .. })
        ));
    }

    proptest! {
        #[test]
        fn model_is_linear_in_band(
            alpha in -3.0..3.0f64,
            beta in -3.0..3.0f64,
            seed in 0u64..1000,
        ) {
            let q = build_annulus_quadrature(ScaleIndex(1), 6, 16).unwrap();
            let f = |i: usize, s: u64| (((i as u64 * 2654435761 + s * 97) % 1000) as f64 / 500.0) - 1.0;
            let a: Vec<f64> = (0..q.len()).map(|i| f(i, seed)).collect();
            let b: Vec<f64> = (0..q.len()).map(|i| f(i, seed + 7)).collect();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let h = Sl2Matrix::new(1.1, 0.3, -0.2, (1.0 - 0.3 * 0.2) / 1.1);
            let ga = grad_u_model(&BandVorticity::from_node_values(q.j, a), &q, &h).unwrap();
            let gb = grad_u_model(&BandVorticity::from_node_values(q.j, b), &q, &h).unwrap();
            let gm = grad_u_model(&BandVorticity::from_node_values(q.j, mix), &q, &h).unwrap();
            prop_assert!((gm.g1 - (alpha * ga.g1 + beta * gb.g1)).abs() < 1e-12);
            prop_assert!((gm.g2 - (alpha * ga.g2 + beta * gb.g2)).abs() < 1e-12);
        }
    }
}
