//! The coupled per-scale system `dh_j/dt = (Σ_{k<j} (∇u)_{k,h_k}) h_j`,
//! `h_j(0) = I`, integrated with a fourth-order Runge–Kutta–Munthe-Kaas scheme.
//!
//! Every update is `h_j ← exp(Ω_j) h_j` with `Ω_j` trace-free, so the states
//! stay in SL(2) up to rounding. Coupling is strictly triangular: `h_j` only
//! sees bands `k < j`.

use serde::{Deserialize, Serialize};

use crate::biot_savart::{grad_u_model, AnnulusQuadrature, DEFAULT_N_R, DEFAULT_N_THETA};
use crate::error::{Error, Result};
use crate::littlewood_paley::BandVorticity;
use crate::par::Execution;
use crate::sl2::{sl2_exp, Generator, Sl2Matrix, TraceFreeMatrix};

pub const DEFAULT_HORIZON_C: f64 = 0.09;
pub const DEFAULT_TAU: f64 = 0.01;
/// States whose determinant drifts further than this are renormalized.
pub const DET_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    Natural,
    #[serde(rename = "2")]
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// Numerical and physical parameters of one cascade run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Scale `N` of the summed per-band gradient norms (inverse time).
    pub n: f64,
    /// Number of scales `J`.
    pub scales: usize,
    pub horizon_c: f64,
    pub tau: f64,
    /// Half-width of the band window, in dyadic bands.
    pub logn_bands: usize,
    pub n_r: usize,
    pub n_theta: usize,
    pub log_base_horizon: LogBase,
    pub seed: u64,
}

impl ModelParams {
    pub fn new(n: f64, scales: usize) -> Self {
        ModelParams {
            n,
            scales,
            horizon_c: DEFAULT_HORIZON_C,
            tau: DEFAULT_TAU,
            logn_bands: default_logn_bands(n),
            n_r: DEFAULT_N_R,
            n_theta: DEFAULT_N_THETA,
            log_base_horizon: LogBase::Natural,
            seed: 0,
        }
    }

    /// `T = C·log(N)/N`.
    pub fn horizon(&self) -> f64 {
        self.horizon_c * self.log_base_horizon.log(self.n) / self.n
    }

    /// `Δt = τ/N`.
    pub fn dt(&self) -> f64 {
        self.tau / self.n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n.is_finite() && self.n > 1.0) {
            return Err(Error::InvalidParameter(format!("N must exceed 1 (got {})", self.n)));
        }
        if self.scales == 0 {
            return Err(Error::InvalidParameter("J must be at least 1".into()));
        }
        if !(self.horizon_c.is_finite() && self.horizon_c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be positive (got {})", self.horizon_c)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive (got {})", self.tau)));
        }
        if self.dt() > self.horizon() {
            return Err(Error::InvalidParameter(format!(
                "step tau/N = {} exceeds the horizon {}",
                self.dt(),
                self.horizon()
            )));
        }
        Ok(())
    }
}

/// `⌈log₂ N⌉`, the default band-window half-width.
pub fn default_logn_bands(n: f64) -> usize {
    if n > 1.0 {
        n.log2().ceil() as usize
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeState {
    pub t: f64,
    pub h: Vec<Sl2Matrix>,
}

impl CascadeState {
    pub fn identity(scales: usize) -> Self {
        CascadeState {
            t: 0.0,
            h: vec![Sl2Matrix::IDENTITY; scales],
        }
    }

    pub fn max_det_drift(&self) -> f64 {
        self.h.iter().fold(0.0_f64, |m, h| m.max(h.det_drift()))
    }
}

/// Right-hand side at one state: per-scale contributions `c_k` and their
/// exclusive prefix sums `M_j = Σ_{k<j} c_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub contributions: Vec<TraceFreeMatrix>,
    pub generators: Vec<TraceFreeMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: CascadeState,
    pub rhs: Rhs,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub steps: usize,
    pub renormalizations: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn scales(&self) -> usize {
        self.samples.first().map_or(0, |s| s.state.h.len())
    }
}

/// Band data and quadrature rules for all scales, plus the execution strategy
/// used for the per-scale kernel evaluations.
#[derive(Debug, Clone)]
pub struct Cascade {
    bands: Vec<BandVorticity>,
    quads: Vec<AnnulusQuadrature>,
    exec: Execution,
}

impl Cascade {
    pub fn new(bands: Vec<BandVorticity>, quads: Vec<AnnulusQuadrature>) -> Result<Self> {
        if bands.len() != quads.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} bands for {} quadrature rules",
                bands.len(),
                quads.len()
            )));
        }
        if bands.is_empty() {
            return Err(Error::ShapeMismatch("at least one scale is required".into()));
        }
        for (k, (b, q)) in bands.iter().zip(&quads).enumerate() {
            if b.j.0 != k || q.j.0 != k {
                return Err(Error::ShapeMismatch(format!(
                    "entry {k} holds band scale {} and quadrature scale {}",
                    b.j.0, q.j.0
                )));
            }
            if b.node_values.len() != q.len() {
                return Err(Error::ShapeMismatch(format!(
                    "scale {k}: {} node values for {} nodes",
                    b.node_values.len(),
                    q.len()
                )));
            }
        }
        Ok(Cascade {
            bands,
            quads,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn scales(&self) -> usize {
        self.bands.len()
    }

    pub fn bands(&self) -> &[BandVorticity] {
        &self.bands
    }

    pub fn quads(&self) -> &[AnnulusQuadrature] {
        &self.quads
    }

    pub fn rhs(&self, h: &[Sl2Matrix]) -> Result<Rhs> {
        if h.len() != self.scales() {
            return Err(Error::ShapeMismatch(format!(
                "state has {} scales, cascade has {}",
                h.len(),
                self.scales()
            )));
        }
        if h.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFiniteGenerator);
        }
        let contributions = self
            .exec
            .map(self.scales(), |k| grad_u_model(&self.bands[k], &self.quads[k], &h[k]))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let mut generators = Vec::with_capacity(contributions.len());
        let mut acc = TraceFreeMatrix::ZERO;
        for c in &contributions {
            generators.push(acc);
            acc += *c;
        }
        Ok(Rhs {
            contributions,
            generators,
        })
    }

    fn stage(&self, h: &[Sl2Matrix], dt: f64) -> Result<Vec<Generator>> {
        Ok(self
            .rhs(h)?
            .generators
            .into_iter()
            .map(|m| Generator::from(m).scale(dt))
            .collect())
    }

    fn advance(h: &[Sl2Matrix], omega: &[Generator]) -> Result<Vec<Sl2Matrix>> {
        h.iter()
            .zip(omega)
            .map(|(h, w)| Ok(sl2_exp(*w, 1.0)? * *h))
            .collect()
    }

    /// One RKMK4 step; `dt` may be negative for backward integration.
    fn step_signed(&self, state: &CascadeState, dt: f64) -> Result<CascadeState> {
        let h = &state.h;
        let k1 = self.stage(h, dt)?;
        let u2: Vec<Generator> = k1.iter().map(|k| k.scale(0.5)).collect();
        let k2 = self.stage(&Self::advance(h, &u2)?, dt)?;
        let u3: Vec<Generator> = k1
            .iter()
            .zip(&k2)
            .map(|(a, b)| b.scale(0.5) - a.bracket(b).scale(0.125))
            .collect();
        let k3 = self.stage(&Self::advance(h, &u3)?, dt)?;
        let k4 = self.stage(&Self::advance(h, &k3)?, dt)?;
        let omega: Vec<Generator> = (0..h.len())
            .map(|j| {
                let avg = (k1[j] + k2[j].scale(2.0) + k3[j].scale(2.0) + k4[j]).scale(1.0 / 6.0);
                avg - k1[j].bracket(&k4[j]).scale(1.0 / 12.0)
            })
            .collect();
        Ok(CascadeState {
            t: state.t + dt,
            h: Self::advance(h, &omega)?,
        })
    }

    pub fn step(&self, state: &CascadeState, dt: f64) -> Result<CascadeState> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be positive (got {dt})")));
        }
        self.step_signed(state, dt)
    }

    fn sample(&self, state: CascadeState) -> Result<Sample> {
        let rhs = self.rhs(&state.h)?;
        Ok(Sample { state, rhs })
    }

    /// Integrate from `h_j = I` at `t = 0` to `t_end` with fixed step `dt`,
    /// shortening the final step to land on `t_end`. A sample is recorded at
    /// `t = 0`, every `sample_interval` steps, and at `t_end`.
    pub fn integrate(&self, t_end: f64, dt: f64, sample_interval: usize) -> Result<Trajectory> {
        if !(t_end.is_finite() && t_end > 0.0 && dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need positive end time and step (got T = {t_end}, dt = {dt})"
            )));
        }
        let interval = sample_interval.max(1);
        let steps = ((t_end / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let mut traj = Trajectory::default();
        let mut state = CascadeState::identity(self.scales());
        traj.samples.push(self.sample(state.clone())?);
        for k in 1..=steps {
            let target = if k == steps { t_end } else { k as f64 * dt };
            let stepped = match self.step_signed(&state, target - state.t) {
                Err(Error::NonFiniteGenerator) => None,
                other => Some(other?),
            };
            let blown = stepped.as_ref().is_none_or(|s| s.h.iter().any(|h| !h.is_finite()));
            if blown {
                traj.steps = k - 1;
                return Err(Error::BlowUp {
                    t: target,
                    partial: Box::new(traj),
                });
            }
            let mut next = stepped.expect("checked above");
            next.t = target;
            for h in next.h.iter_mut() {
                if h.det_drift() > DET_TOLERANCE {
                    *h = h.renormalized();
                    traj.renormalizations += 1;
                }
            }
            state = next;
            if k % interval == 0 || k == steps {
                traj.samples.push(self.sample(state.clone())?);
            }
        }
        traj.steps = steps;
        Ok(traj)
    }

    /// Integrate over the model horizon `T = C·log(N)/N` with `Δt = τ/N`.
    pub fn run(&self, params: &ModelParams, sample_interval: usize) -> Result<Trajectory> {
        params.validate()?;
        if params.scales != self.scales() {
            return Err(Error::ShapeMismatch(format!(
                "parameters request {} scales, cascade has {}",
                params.scales,
                self.scales()
            )));
        }
        self.integrate(params.horizon(), params.dt(), sample_interval)
    }
}

pub fn rhs_generators(
    state: &CascadeState,
    bands: &[BandVorticity],
    quads: &[AnnulusQuadrature],
) -> Result<Vec<TraceFreeMatrix>> {
    let cascade = Cascade::new(bands.to_vec(), quads.to_vec())?;
    Ok(cascade.rhs(&state.h)?.generators)
}

pub fn step_rkmk4(
    state: &CascadeState,
    bands: &[BandVorticity],
    quads: &[AnnulusQuadrature],
    dt: f64,
) -> Result<CascadeState> {
    Cascade::new(bands.to_vec(), quads.to_vec())?.step(state, dt)
}

pub fn run(params: &ModelParams, bands: &[BandVorticity], quads: &[AnnulusQuadrature]) -> Result<Trajectory> {
    Cascade::new(bands.to_vec(), quads.to_vec())?.run(params, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biot_savart::build_annulus_quadrature;
    use crate::sl2::ScaleIndex;
    use std::f64::consts::LN_2;

    fn quads(scales: usize, n_r: usize, n_theta: usize) -> Vec<AnnulusQuadrature> {
        (0..scales)
            .map(|j| build_annulus_quadrature(ScaleIndex(j), n_r, n_theta).unwrap())
            .collect()
    }

    fn pattern(q: &AnnulusQuadrature, f: impl Fn(f64, f64) -> f64) -> BandVorticity {
        let values = (0..q.len())
            .map(|i| {
                let (r, t) = q.polar(i);
                f(r / q.j.inner_radius(), t)
            })
            .collect();
        BandVorticity::from_node_values(q.j, values)
    }

    fn quadrupole_pair() -> Cascade {
        let qs = quads(2, 24, 96);
        let bands = vec![pattern(&qs[0], |_, t| (2.0 * t).cos()), BandVorticity::zeros(ScaleIndex(1), qs[1].len())];
        Cascade::new(bands, qs).unwrap()
    }

    #[test]
    fn single_scale_has_zero_generator() {
        let qs = quads(1, 6, 16);
        let bands = vec![pattern(&qs[0], |_, t| (2.0 * t).cos())];
        let g = rhs_generators(&CascadeState::identity(1), &bands, &qs).unwrap();
        assert_eq!(g, vec![TraceFreeMatrix::ZERO]);
    }

    #[test]
    fn prefix_sums_follow_contributions() {
        let qs = quads(3, 6, 16);
        let mut bands: Vec<_> = qs.iter().map(|q| BandVorticity::zeros(q.j, q.len())).collect();
        bands[0] = pattern(&qs[0], |r, t| r * (2.0 * t).sin());
        let cascade = Cascade::new(bands.clone(), qs.clone()).unwrap();
        let rhs = cascade.rhs(&CascadeState::identity(3).h).unwrap();
        assert_eq!(rhs.generators[0], TraceFreeMatrix::ZERO);
        assert_eq!(rhs.generators[1], rhs.contributions[0]);
        assert_eq!(rhs.generators[2], rhs.contributions[0]);

        bands[1] = pattern(&qs[1], |r, t| (t + r).cos());
        bands[2] = pattern(&qs[2], |_, t| (3.0 * t).cos());
        let cascade = Cascade::new(bands, qs).unwrap();
        let h = vec![
            Sl2Matrix::IDENTITY,
            sl2_exp(TraceFreeMatrix::new(0.3, -0.2), 1.0).unwrap(),
            Sl2Matrix::rotation(0.4),
        ];
        let rhs = cascade.rhs(&h).unwrap();
        for j in 0..2 {
            assert_eq!(rhs.generators[j] + rhs.contributions[j], rhs.generators[j + 1]);
        }
    }

    #[test]
    fn zero_bands_leave_state_unchanged() {
        let qs = quads(3, 4, 8);
        let bands: Vec<_> = qs.iter().map(|q| BandVorticity::zeros(q.j, q.len())).collect();
        let state = CascadeState {
            t: 0.25,
            h: vec![Sl2Matrix::rotation(0.1), Sl2Matrix::diag(2.0, 0.5), Sl2Matrix::IDENTITY],
        };
        let next = step_rkmk4(&state, &bands, &qs, 0.01).unwrap();
        assert_eq!(next.h, state.h);
        assert_eq!(next.t, 0.26);
    }

    #[test]
    fn constant_generator_step_is_exact() {
        let cascade = quadrupole_pair();
        let g1 = -LN_2 / 2.0;
        let dt = 0.05;
        let next = cascade.step(&CascadeState::identity(2), dt).unwrap();
        let (c, s) = ((g1 * dt).cosh(), (g1 * dt).sinh());
        let expect = Sl2Matrix::new(c, s, s, c);
        assert!(next.h[1].max_abs_diff(&expect) <= 1e-12 * c);
        assert_eq!(next.h[0], Sl2Matrix::IDENTITY);
    }

    #[test]
    fn non_positive_step_rejected() {
        let cascade = quadrupole_pair();
        assert!(cascade.step(&CascadeState::identity(2), 0.0).is_err());
        assert!(cascade.step(&CascadeState::identity(2), -1.0).is_err());
    }

    #[test]
    fn run_lands_on_horizon_with_closed_form() {
        let cascade = quadrupole_pair();
        let params = ModelParams::new(256.0, 2);
        let traj = cascade.run(&params, 1).unwrap();
        let t_end = 0.09 * 256f64.ln() / 256.0;
        let last = traj.last().unwrap();
        assert_eq!(last.state.t, t_end);
        let g1 = -LN_2 / 2.0;
        let expect = Sl2Matrix::new(
            (g1 * t_end).cosh(),
            (g1 * t_end).sinh(),
            (g1 * t_end).sinh(),
            (g1 * t_end).cosh(),
        );
        assert!(last.state.h[1].max_abs_diff(&expect) < 1e-10);
        assert_eq!(traj.renormalizations, 0);
        let times = traj.times();
        assert_eq!(times[0], 0.0);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert!(traj.samples.iter().all(|s| s.state.h[0] == Sl2Matrix::IDENTITY));
    }

    #[test]
    fn sampling_interval_keeps_endpoints() {
        let cascade = quadrupole_pair();
        let traj = cascade.integrate(1.0, 0.1, 3).unwrap();
        assert_eq!(traj.steps, 10);
        let times = traj.times();
        assert_eq!(times.len(), 5);
        assert_eq!(*times.last().unwrap(), 1.0);
    }

    #[test]
    fn params_validation() {
        let mut p = ModelParams::new(256.0, 4);
        assert!(p.validate().is_ok());
        assert_eq!(p.logn_bands, 8);
        p.n = 0.5;
        assert!(p.validate().is_err());
        let mut p = ModelParams::new(256.0, 4);
        p.tau = 10.0;
        assert!(p.validate().is_err());
        let mut p = ModelParams::new(16.0, 4);
        p.log_base_horizon = LogBase::Two;
        assert!((p.horizon() - 0.09 * 4.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatches_rejected() {
        let qs = quads(2, 4, 8);
        let bands = vec![BandVorticity::zeros(ScaleIndex(0), qs[0].len())];
        assert!(Cascade::new(bands, qs.clone()).is_err());
        let bands = vec![
            BandVorticity::zeros(ScaleIndex(1), qs[0].len()),
            BandVorticity::zeros(ScaleIndex(0), qs[1].len()),
        ];
        assert!(Cascade::new(bands, qs).is_err());
    }

    #[test]
    fn blow_up_is_reported_with_partial_trajectory() {
        let qs = quads(2, 4, 8);
        let bands = vec![
            pattern(&qs[0], |_, t| 1e200 * (2.0 * t).cos()),
            BandVorticity::zeros(ScaleIndex(1), qs[1].len()),
        ];
        let cascade = Cascade::new(bands, qs).unwrap();
        match cascade.integrate(1.0, 0.5, 1) {
            Err(Error::BlowUp { partial, .. }) => assert_eq!(partial.samples.len(), 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
