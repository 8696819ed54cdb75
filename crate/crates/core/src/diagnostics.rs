//! Growth observables on trajectories, exponential versus double-exponential
//! classification, and a scalar harness for the "similar ODEs stay similar"
//! estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::Trajectory;
use crate::par::Execution;
use crate::sl2::Sl2Matrix;

/// Samples with `σ_max` at or below this are treated as carrying no growth.
pub const GROWTH_THRESHOLD: f64 = 1.0 + 1e-6;
pub const GRONWALL_KAPPA: f64 = 10.0;
pub const GRONWALL_EXPONENT: f64 = -0.91;
pub const GRONWALL_SLOPE_LIMIT: f64 = -0.85;
pub const GRONWALL_C: f64 = 0.09;

/// Largest singular value.
pub fn operator_norm(h: &Sl2Matrix) -> f64 {
    h.singular_values().0
}

/// Per-sample, per-scale observables. Outer index is the sample, inner the scale.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrowthSeries {
    pub times: Vec<f64>,
    pub sigma_max: Vec<Vec<f64>>,
    pub sigma_min: Vec<Vec<f64>>,
    pub frobenius: Vec<Vec<f64>>,
    pub det_drift: Vec<Vec<f64>>,
    pub generator_norm: Vec<Vec<f64>>,
    /// `Σ_k ‖c_k‖_F` over all scales.
    pub contribution_sum: Vec<f64>,
}

impl GrowthSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn scales(&self) -> usize {
        self.sigma_max.first().map_or(0, Vec::len)
    }

    pub fn sigma_max_at(&self, j: usize) -> Vec<f64> {
        self.sigma_max.iter().map(|row| row[j]).collect()
    }

    pub fn max_det_drift(&self) -> f64 {
        self.det_drift.iter().flatten().fold(0.0_f64, |m, &d| m.max(d))
    }
}

pub fn growth_metrics(traj: &Trajectory) -> GrowthSeries {
    let mut out = GrowthSeries::default();
    for sample in &traj.samples {
        let h = &sample.state.h;
        let sv: Vec<(f64, f64)> = h.iter().map(Sl2Matrix::singular_values).collect();
        out.times.push(sample.state.t);
        out.sigma_max.push(sv.iter().map(|s| s.0).collect());
        out.sigma_min.push(sv.iter().map(|s| s.1).collect());
        out.frobenius.push(h.iter().map(Sl2Matrix::frobenius).collect());
        out.det_drift.push(h.iter().map(Sl2Matrix::det_drift).collect());
        out.generator_norm
            .push(sample.rhs.generators.iter().map(|g| g.frobenius()).collect());
        out.contribution_sum
            .push(sample.rhs.contributions.iter().map(|c| c.frobenius()).sum());
    }
    out
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Residual sum of squares over total sum of squares (`1 − R²`).
    pub unexplained: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let unexplained = if ss_tot > 0.0 { ss_res / ss_tot } else { 0.0 };
    Some(LinearFit {
        slope,
        intercept,
        residual: (ss_res / n as f64).sqrt(),
        unexplained,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    NoGrowth,
    SingleExponential,
    DoubleExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub scale: usize,
    pub samples_used: usize,
    pub classification: GrowthClass,
    /// Fit of `log σ_max` against `t`.
    pub single: Option<LinearFit>,
    /// Fit of `log log σ_max` against `t`.
    pub double: Option<LinearFit>,
}

impl GrowthFit {
    /// Slope of the preferred model, if any growth was detected.
    pub fn rate(&self) -> Option<f64> {
        match self.classification {
            GrowthClass::NoGrowth => None,
            GrowthClass::SingleExponential => self.single.map(|f| f.slope),
            GrowthClass::DoubleExponential => self.double.map(|f| f.slope),
        }
    }
}

/// Classify a single `σ_max(t)` series. Only samples above
/// [`GROWTH_THRESHOLD`] enter the fits; fewer than half of them (or fewer
/// than three) yields [`GrowthClass::NoGrowth`]. The model with the smaller
/// unexplained variance fraction wins, ties going to single-exponential.
pub fn fit_growth(scale: usize, times: &[f64], sigma: &[f64]) -> GrowthFit {
    let (t, s): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(sigma)
        .filter(|(_, &s)| s > GROWTH_THRESHOLD && s.is_finite())
        .map(|(&t, &s)| (t, s))
        .unzip();
    let no_growth = GrowthFit {
        scale,
        samples_used: t.len(),
        classification: GrowthClass::NoGrowth,
        single: None,
        double: None,
    };
    if t.len() < 3 || 2 * t.len() < times.len() {
        return no_growth;
    }
    let log_s: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let log_log_s: Vec<f64> = log_s.iter().map(|v| v.ln()).collect();
    let single = linear_fit(&t, &log_s);
    let double = linear_fit(&t, &log_log_s);
    let classification = match (single, double) {
        (Some(a), Some(b)) if b.unexplained < a.unexplained => GrowthClass::DoubleExponential,
        (Some(_), _) => GrowthClass::SingleExponential,
        (None, Some(_)) => GrowthClass::DoubleExponential,
        (None, None) => return no_growth,
    };
    GrowthFit {
        scale,
        samples_used: t.len(),
        classification,
        single,
        double,
    }
}

pub fn doubleexp_fit(series: &GrowthSeries, j: usize) -> GrowthFit {
    fit_growth(j, &series.times, &series.sigma_max_at(j))
}

/// Coefficient profile `F(t)` for the scalar harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingProfile {
    /// `F(t) = N`, the extreme allowed by `F = O(N)`.
    Constant,
    /// `F(t) = N·(3/4 + sin(2πf·N·t + φ)/4)` with `f`, `φ` drawn from the seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallPoint {
    pub n: f64,
    pub horizon: f64,
    pub steps: usize,
    /// `max_t |w − v|` over the step grid.
    pub max_diff: f64,
    pub final_diff: f64,
    /// `κ·E·N^{-0.91}`.
    pub bound: f64,
    /// `(E/N)·e^{N·T}`, the bound from integrating `|w−v|' ≤ N|w−v| + E`.
    pub exponential_bound: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub e: f64,
    pub points: Vec<GronwallPoint>,
    /// Regression slope of `log(max|w−v|/E)` against `log N`; absent when
    /// `E = 0` or fewer than two values of `N` were run.
    pub slope: Option<f64>,
    pub slope_ok: bool,
    pub bounds_ok: bool,
    pub pass: bool,
}

pub const GRONWALL_NS: [f64; 4] = [256.0, 1024.0, 4096.0, 16384.0];

struct Profile {
    n: f64,
    omega: f64,
    phase: f64,
    constant: bool,
}

impl Profile {
    fn new(n: f64, profile: ForcingProfile) -> Self {
        match profile {
            ForcingProfile::Constant => Profile {
                n,
                omega: 0.0,
                phase: 0.0,
                constant: true,
            },
            ForcingProfile::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f: f64 = rng.gen_range(0.5..2.0);
                Profile {
                    n,
                    omega: 2.0 * std::f64::consts::PI * f * n,
                    phase: rng.gen_range(0.0..2.0 * std::f64::consts::PI),
                    constant: false,
                }
            }
        }
    }

    fn f(&self, t: f64) -> f64 {
        if self.constant {
            self.n
        } else {
            self.n * (0.75 + 0.25 * (self.omega * t + self.phase).sin())
        }
    }
}

/// Integrate `w' = F w + G₁`, `v' = F v + G₂` from `w(0) = v(0) = 0` to
/// `T = 0.09·ln N / N` with classical RK4, where `G₂ ≡ 1` and
/// `G₁ = G₂ + E` on `t ≤ 1/N`. Step boundaries are placed on `min(1/N, T)`.
pub fn gronwall_point(n: f64, e: f64, num_steps: usize, profile: ForcingProfile) -> GronwallPoint {
    let horizon = GRONWALL_C * n.ln() / n;
    let switch = (1.0 / n).min(horizon);
    let num_steps = num_steps.max(2);
    let first = if switch < horizon {
        ((num_steps as f64 * switch / horizon).round() as usize).clamp(1, num_steps - 1)
    } else {
        num_steps
    };
    let profile = Profile::new(n, profile);
    let (mut w, mut v) = (0.0_f64, 0.0_f64);
    let mut max_diff = 0.0_f64;
    let rk4 = |y: f64, t0: f64, dt: f64, g: f64| {
        let k1 = profile.f(t0) * y + g;
        let k2 = profile.f(t0 + dt / 2.0) * (y + dt / 2.0 * k1) + g;
        let k3 = profile.f(t0 + dt / 2.0) * (y + dt / 2.0 * k2) + g;
        let k4 = profile.f(t0 + dt) * (y + dt * k3) + g;
        y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let phases = [(0.0, switch, first, e), (switch, horizon, num_steps - first, 0.0)];
    for &(start, end, steps, mismatch) in &phases {
        if steps == 0 {
            continue;
        }
        let dt = (end - start) / steps as f64;
        for k in 0..steps {
            let t0 = start + k as f64 * dt;
            w = rk4(w, t0, dt, 1.0 + mismatch);
            v = rk4(v, t0, dt, 1.0);
            max_diff = max_diff.max((w - v).abs());
        }
    }
    let final_diff = (w - v).abs();
    let bound = GRONWALL_KAPPA * e * n.powf(GRONWALL_EXPONENT);
    let exponential_bound = e / n * (n * horizon).exp();
    GronwallPoint {
        n,
        horizon,
        steps: num_steps,
        max_diff,
        final_diff,
        bound,
        exponential_bound,
        within_bound: final_diff <= bound && max_diff <= exponential_bound,
    }
}

pub fn gronwall_harness_with(
    ns: &[f64],
    e: f64,
    num_steps: usize,
    profile: ForcingProfile,
    exec: Execution,
) -> GronwallReport {
    let points = exec.map(ns.len(), |i| gronwall_point(ns[i], e, num_steps, profile));
    let slope = if e > 0.0 {
        let x: Vec<f64> = points.iter().map(|p| p.n.ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| (p.max_diff / e).ln()).collect();
        linear_fit(&x, &y).map(|f| f.slope)
    } else {
        None
    };
    let bounds_ok = points.iter().all(|p| p.within_bound);
    let slope_ok = match slope {
        Some(s) => s <= GRONWALL_SLOPE_LIMIT,
        None => e == 0.0 && points.iter().all(|p| p.max_diff == 0.0),
    };
    GronwallReport {
        e,
        points,
        slope,
        slope_ok,
        bounds_ok,
        pass: slope_ok && bounds_ok,
    }
}

pub fn gronwall_harness(ns: &[f64], e: f64, num_steps: usize) -> GronwallReport {
    gronwall_harness_with(ns, e, num_steps, ForcingProfile::Constant, Execution::default())
}
