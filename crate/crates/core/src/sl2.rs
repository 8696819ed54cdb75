//! 2×2 matrix algebra for the per-scale deformations and their generators.
//!
//! [`Sl2Matrix`] holds a unit-determinant linear map, [`TraceFreeMatrix`] the
//! symmetric strain `[[-g2, g1], [g1, g2]]` produced by the kernel integrals,
//! and [`Generator`] a general element `[[a, b], [c, -a]]` of the Lie algebra.
//! The general form is needed because commutators of two strains are
//! rotations, and the geometric integrator combines stage generators with
//! commutator corrections.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `μ²t²` the exponential falls back to its Taylor expansion.
const NILPOTENT_CUTOFF: f64 = 1e-14;

/// Dyadic scale index `j`; annulus `A_j` has radius `~2^{-j}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScaleIndex(pub usize);

impl ScaleIndex {
    pub fn get(self) -> usize {
        self.0
    }

    /// Inner radius `2^{-j}` of the annulus at this scale.
    pub fn inner_radius(self) -> f64 {
        (-(self.0 as f64)).exp2()
    }
}

impl From<usize> for ScaleIndex {
    fn from(j: usize) -> Self {
        ScaleIndex(j)
    }
}

/// Row-major 2×2 real matrix `[[a, b], [c, d]]`, expected to lie in SL(2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sl2Matrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Sl2Matrix {
    pub const IDENTITY: Sl2Matrix = Sl2Matrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Sl2Matrix { a, b, c, d }
    }

    pub fn diag(x: f64, y: f64) -> Self {
        Sl2Matrix::new(x, 0.0, 0.0, y)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Sl2Matrix::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn det_drift(&self) -> f64 {
        (self.det() - 1.0).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Inverse, valid for unit determinant (adjugate).
    pub fn inverse(&self) -> Self {
        Sl2Matrix::new(self.d, -self.b, -self.c, self.a)
    }

    /// Singular values `(σ_max, σ_min)` from the closed form for 2×2 matrices.
    pub fn singular_values(&self) -> (f64, f64) {
        let p = (self.a + self.d).hypot(self.b - self.c);
        let q = (self.a - self.d).hypot(self.b + self.c);
        (0.5 * (p + q), 0.5 * (p - q).abs())
    }

    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.a * x[0] + self.b * x[1],
            self.c * x[0] + self.d * x[1],
        ]
    }

    pub fn max_abs_diff(&self, other: &Sl2Matrix) -> f64 {
        [
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
        ]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Divide by `√det`, restoring unit determinant for positive `det`.
    pub fn renormalized(&self) -> Self {
        let s = self.det().sqrt().recip();
        Sl2Matrix::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

impl Mul for Sl2Matrix {
    type Output = Sl2Matrix;

    fn mul(self, o: Sl2Matrix) -> Sl2Matrix {
        Sl2Matrix::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// Matrix product of two SL(2) elements.
pub fn sl2_compose(lhs: &Sl2Matrix, rhs: &Sl2Matrix) -> Sl2Matrix {
    *lhs * *rhs
}

/// Symmetric trace-free strain `[[-g2, g1], [g1, g2]]`.
///
/// Only `(g1, g2)` are stored, so the trace is zero by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceFreeMatrix {
    pub g1: f64,
    pub g2: f64,
}

impl TraceFreeMatrix {
    pub const ZERO: TraceFreeMatrix = TraceFreeMatrix { g1: 0.0, g2: 0.0 };

    pub fn new(g1: f64, g2: f64) -> Self {
        TraceFreeMatrix { g1, g2 }
    }

    /// Entries `[[m11, m12], [m21, m22]]`.
    pub fn entries(&self) -> [[f64; 2]; 2] {
        [[-self.g2, self.g1], [self.g1, self.g2]]
    }

    pub fn trace(&self) -> f64 {
        let e = self.entries();
        e[0][0] + e[1][1]
    }

    pub fn frobenius(&self) -> f64 {
        (2.0 * (self.g1 * self.g1 + self.g2 * self.g2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.g1.is_finite() && self.g2.is_finite()
    }

    pub fn scale(&self, s: f64) -> Self {
        TraceFreeMatrix::new(self.g1 * s, self.g2 * s)
    }
}

impl Add for TraceFreeMatrix {
    type Output = TraceFreeMatrix;

    fn add(self, o: TraceFreeMatrix) -> TraceFreeMatrix {
        TraceFreeMatrix::new(self.g1 + o.g1, self.g2 + o.g2)
    }
}

impl AddAssign for TraceFreeMatrix {
    fn add_assign(&mut self, o: TraceFreeMatrix) {
        self.g1 += o.g1;
        self.g2 += o.g2;
    }
}

impl Sub for TraceFreeMatrix {
    type Output = TraceFreeMatrix;

    fn sub(self, o: TraceFreeMatrix) -> TraceFreeMatrix {
        TraceFreeMatrix::new(self.g1 - o.g1, self.g2 - o.g2)
    }
}

/// General element `[[a, b], [c, -a]]` of sl(2).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Generator {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Generator {
    pub const ZERO: Generator = Generator {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Generator { a, b, c }
    }

    /// Infinitesimal rotation `[[0, -θ], [θ, 0]]`.
    pub fn rotation(theta: f64) -> Self {
        Generator::new(0.0, -theta, theta)
    }

    pub fn det(&self) -> f64 {
        -self.a * self.a - self.b * self.c
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    pub fn scale(&self, s: f64) -> Self {
        Generator::new(self.a * s, self.b * s, self.c * s)
    }

    /// Lie bracket `[X, Y] = XY - YX`.
    pub fn bracket(&self, o: &Generator) -> Generator {
        Generator::new(
            self.b * o.c - self.c * o.b,
            2.0 * (self.a * o.b - self.b * o.a),
            2.0 * (self.c * o.a - self.a * o.c),
        )
    }

    pub fn frobenius(&self) -> f64 {
        (2.0 * self.a * self.a + self.b * self.b + self.c * self.c).sqrt()
    }
}

impl From<TraceFreeMatrix> for Generator {
    fn from(m: TraceFreeMatrix) -> Self {
        Generator::new(-m.g2, m.g1, m.g1)
    }
}

impl Add for Generator {
    type Output = Generator;

    fn add(self, o: Generator) -> Generator {
        Generator::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }
}

impl Sub for Generator {
    type Output = Generator;

    fn sub(self, o: Generator) -> Generator {
        Generator::new(self.a - o.a, self.b - o.b, self.c - o.c)
    }
}

impl Neg for Generator {
    type Output = Generator;

    fn neg(self) -> Generator {
        self.scale(-1.0)
    }
}

/// Exact exponential `exp(tA)` of a trace-free matrix.
///
/// With `μ² = -det A`, `A² = μ² I`, so the series sums to
/// `C(μ²t²) I + t S(μ²t²) A` with `C = cosh`/`cos` and `S = sinhc`/`sinc`
/// depending on the sign of `μ²`.
pub fn sl2_exp(generator: impl Into<Generator>, t: f64) -> Result<Sl2Matrix> {
    let g = generator.into();
    if !g.is_finite() || !t.is_finite() {
        return Err(Error::NonFiniteGenerator);
    }
    let mu2 = -g.det();
    let z = mu2 * t * t;
    let (even, odd) = if z.abs() < NILPOTENT_CUTOFF {
        (1.0 + 0.5 * z, t * (1.0 + z / 6.0))
    } else if mu2 > 0.0 {
        let mu = mu2.sqrt();
        ((mu * t).cosh(), (mu * t).sinh() / mu)
    } else {
        let nu = (-mu2).sqrt();
        ((nu * t).cos(), (nu * t).sin() / nu)
    };
    Ok(Sl2Matrix::new(
        even + odd * g.a,
        odd * g.b,
        odd * g.c,
        even - odd * g.a,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Truncated power series of `exp(tA)`, independent of the closed form.
    fn series_exp(g: Generator, t: f64, terms: usize) -> Sl2Matrix {
        let m = [[g.a * t, g.b * t], [g.c * t, -g.a * t]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        let mut sum = term;
        for k in 1..terms {
            let mut next = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    next[i][j] = (term[i][0] * m[0][j] + term[i][1] * m[1][j]) / k as f64;
                }
            }
            term = next;
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        Sl2Matrix::new(sum[0][0], sum[0][1], sum[1][0], sum[1][1])
    }

    #[test]
    fn exp_of_symmetric_swap_is_hyperbolic() {
        // eigenvalues ±1 with eigenvectors (1, ±1)/√2
        let e = 1f64.exp();
        let (ch, sh) = (0.5 * (e + 1.0 / e), 0.5 * (e - 1.0 / e));
        let m = sl2_exp(TraceFreeMatrix::new(1.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(m.a, ch, epsilon = 1e-14);
        assert_abs_diff_eq!(m.b, sh, epsilon = 1e-14);
        assert_abs_diff_eq!(m.c, sh, epsilon = 1e-14);
        assert_abs_diff_eq!(m.d, ch, epsilon = 1e-14);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for t in [0.0, 1.0, -3.5, 1e6] {
            assert_eq!(sl2_exp(Generator::ZERO, t).unwrap(), Sl2Matrix::IDENTITY);
        }
    }

    #[test]
    fn exp_of_rotation_generator_matches_series() {
        for theta in [0.1, 0.7, 1.9] {
            let g = Generator::rotation(theta);
            let m = sl2_exp(g, 1.0).unwrap();
            let s = series_exp(g, 1.0, 20);
            assert!(m.max_abs_diff(&s) < 1e-12);
            assert!(m.max_abs_diff(&Sl2Matrix::rotation(theta)) < 1e-14);
        }
    }

    #[test]
    fn non_finite_generator_is_rejected() {
        assert!(matches!(
            sl2_exp(TraceFreeMatrix::new(f64::NAN, 0.0), 1.0),
            Err(Error::NonFiniteGenerator)
        ));
        assert!(sl2_exp(Generator::ZERO, f64::INFINITY).is_err());
    }

    #[test]
    fn compose_identity_and_inverse() {
        let id = Sl2Matrix::IDENTITY;
        assert_eq!(sl2_compose(&id, &id), id);
        let x = sl2_exp(TraceFreeMatrix::new(1.0, 0.0), 0.3).unwrap();
        let p = sl2_compose(&x, &x.inverse());
        assert!(p.max_abs_diff(&id) < 1e-12);
    }

    #[test]
    fn nilpotent_generator_uses_linear_branch() {
        let g = Generator::new(0.0, 1.0, 0.0);
        let m = sl2_exp(g, 2.5).unwrap();
        assert_eq!(m, Sl2Matrix::new(1.0, 2.5, 0.0, 1.0));
    }

    #[test]
    fn bracket_of_two_strains_is_rotation() {
        let x: Generator = TraceFreeMatrix::new(1.0, 0.0).into();
        let y: Generator = TraceFreeMatrix::new(0.0, 1.0).into();
        let r = x.bracket(&y);
        assert_eq!(r.a, 0.0);
        assert_abs_diff_eq!(r.b, -r.c, epsilon = 0.0);
        assert!(r.b != 0.0);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let (s1, s2) = Sl2Matrix::diag(3.0, 1.0 / 3.0).singular_values();
        assert_abs_diff_eq!(s1, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s2, 1.0 / 3.0, epsilon = 1e-15);
    }

    fn generator() -> impl Strategy<Value = Generator> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c)| Generator::new(a, b, c))
    }

    proptest! {
        #[test]
        fn exp_has_unit_determinant(g in generator(), t in -2.0..2.0f64) {
            let m = sl2_exp(g, t).unwrap();
            prop_assert!(m.det_drift() <= 1e-12 * m.frobenius().powi(2).max(1.0));
        }

        #[test]
        fn exp_is_one_parameter_group(g in generator(), s in -1.0..1.0f64, t in -1.0..1.0f64) {
            let lhs = sl2_exp(g, s + t).unwrap();
            let rhs = sl2_exp(g, s).unwrap() * sl2_exp(g, t).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * lhs.frobenius().max(1.0));
        }

        #[test]
        fn exp_matches_power_series(g in generator(), t in -1.0..1.0f64) {
            // keep ‖tA‖ ≤ 2
            let norm = g.frobenius() * t.abs();
            let t = if norm > 2.0 { t * 2.0 / norm } else { t };
            let m = sl2_exp(g, t).unwrap();
            prop_assert!(m.max_abs_diff(&series_exp(g, t, 20)) < 1e-10);
        }

        #[test]
        fn determinant_is_multiplicative(g in generator(), h in generator(), s in -1.0..1.0f64, t in -1.0..1.0f64) {
            let x = sl2_exp(g, s).unwrap();
            let y = sl2_exp(h, t).unwrap();
            let p = sl2_compose(&x, &y);
            let scale = x.frobenius().powi(2) * y.frobenius().powi(2);
            prop_assert!((p.det() - x.det() * y.det()).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn strain_trace_is_zero(g1 in -1e3..1e3f64, g2 in -1e3..1e3f64) {
            prop_assert_eq!(TraceFreeMatrix::new(g1, g2).trace(), 0.0);
        }
    }
}
