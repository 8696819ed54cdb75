//! End-to-end pipeline: vorticity → band data → cascade run → report.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::biot_savart::{build_annulus_quadrature, AnnulusQuadrature};
use crate::cascade::{Cascade, ModelParams, Trajectory};
use crate::config::{ExperimentConfig, Mode, NSpec};
use crate::diagnostics::{doubleexp_fit, growth_metrics, GrowthFit, GrowthSeries};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::littlewood_paley::{BandSpectrum, SpectralField};
use crate::par::Execution;
use crate::presets::preset_vorticity_with;
use crate::sl2::ScaleIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NSource {
    Config,
    FieldEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub n_used: f64,
    pub n_estimate: f64,
    pub n_source: NSource,
    /// `C·log(N)/N`.
    pub horizon: f64,
    pub t_final: f64,
    /// Set when `t_final` overrides the horizon with a later time.
    pub beyond_horizon: bool,
    pub dt: f64,
    pub steps: usize,
    pub renormalizations: usize,
    pub wall_time_s: f64,
    pub logn_bands: usize,
    pub max_det_drift: f64,
    pub final_sigma_max: Vec<f64>,
    /// `‖P_j ∇u‖∞` of the initial vorticity.
    pub grad_u_band_norms: Vec<f64>,
    pub grad_u_band_sup: f64,
    /// Sup norm of `ω_{0,j}` at the quadrature nodes, per scale.
    pub band_vorticity_sup: Vec<f64>,
    /// `Σ_j sup|ω_{0,j}| / (N_estimate · logN_bands)`, reported only.
    pub band_vorticity_ratio: Option<f64>,
    pub fits: Vec<GrowthFit>,
}

/// Everything needed to integrate, before any time stepping.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub omega: Grid2D,
    pub spectrum: BandSpectrum,
    pub params: ModelParams,
    pub n_source: NSource,
    pub cascade: Cascade,
}

impl Prepared {
    pub fn band_vorticity_sup(&self) -> Vec<f64> {
        self.cascade.bands().iter().map(|b| b.sup_norm).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub prepared: Prepared,
    pub trajectory: Trajectory,
    pub series: GrowthSeries,
    pub report: RunReport,
}

pub fn load_vorticity(config: &ExperimentConfig, exec: Execution) -> Result<Grid2D> {
    match config.mode {
        Mode::Field => {
            let path = config
                .field_path
                .as_ref()
                .ok_or_else(|| Error::Config("field_path missing".into()))?;
            Grid2D::read(path)
        }
        Mode::Preset => {
            let preset = config
                .preset
                .ok_or_else(|| Error::Config("preset missing".into()))?;
            preset_vorticity_with(
                preset,
                &config.preset_params.clone().unwrap_or_default(),
                config.grid_n,
                config.scales,
                config.seed,
                exec,
            )
        }
    }
}

pub fn quadratures(params: &ModelParams) -> Result<Vec<AnnulusQuadrature>> {
    (0..params.scales)
        .map(|j| build_annulus_quadrature(ScaleIndex(j), params.n_r, params.n_theta))
        .collect()
}

pub fn prepare_from_field(config: &ExperimentConfig, omega: Grid2D, exec: Execution) -> Result<Prepared> {
    config.validate()?;
    let field = SpectralField::new(&omega, exec);
    let spectrum = field.gradient_bands()?;
    let params = config.model_params(spectrum.n_estimate)?;
    let quads = quadratures(&params)?;
    let bands = field.band_vorticities(params.logn_bands, &quads)?;
    let cascade = Cascade::new(bands, quads)?.with_execution(exec);
    let n_source = match config.n {
        NSpec::Value(_) => NSource::Config,
        NSpec::Auto => NSource::FieldEstimate,
    };
    Ok(Prepared {
        omega,
        spectrum,
        params,
        n_source,
        cascade,
    })
}

pub fn prepare(config: &ExperimentConfig, exec: Execution) -> Result<Prepared> {
    let omega = load_vorticity(config, exec)?;
    prepare_from_field(config, omega, exec)
}

pub fn execute(config: &ExperimentConfig, prepared: Prepared) -> Result<RunOutcome> {
    let start = Instant::now();
    let params = &prepared.params;
    let horizon = params.horizon();
    let t_final = config.t_final.unwrap_or(horizon);
    let trajectory = prepared
        .cascade
        .integrate(t_final, params.dt(), config.sample_interval)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let series = growth_metrics(&trajectory);
    let fits = (0..params.scales).map(|j| doubleexp_fit(&series, j)).collect();
    let band_vorticity_sup = prepared.band_vorticity_sup();
    let denom = prepared.spectrum.n_estimate * params.logn_bands as f64;
    let band_vorticity_ratio = (denom > 0.0).then(|| band_vorticity_sup.iter().sum::<f64>() / denom);
    let report = RunReport {
        config: config.clone(),
        n_used: params.n,
        n_estimate: prepared.spectrum.n_estimate,
        n_source: prepared.n_source,
        horizon,
        t_final,
        beyond_horizon: t_final > horizon,
        dt: params.dt(),
        steps: trajectory.steps,
        renormalizations: trajectory.renormalizations,
        wall_time_s,
        logn_bands: params.logn_bands,
        max_det_drift: series.max_det_drift(),
        final_sigma_max: series.sigma_max.last().cloned().unwrap_or_default(),
        grad_u_band_norms: prepared.spectrum.norms.clone(),
        grad_u_band_sup: prepared.spectrum.sup(),
        band_vorticity_sup,
        band_vorticity_ratio,
        fits,
    };
    Ok(RunOutcome {
        prepared,
        trajectory,
        series,
        report,
    })
}

pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<RunOutcome> {
    let prepared = prepare(config, exec)?;
    execute(config, prepared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use crate::sl2::Sl2Matrix;

    #[test]
    fn radial_run_stays_at_identity() {
        let config = ExperimentConfig::preset(Preset::Radial, 256.0, 6);
        let out = run_experiment(&config, Execution::default()).unwrap();
        assert_eq!(out.report.renormalizations, 0);
        assert!(!out.report.beyond_horizon);
        for s in &out.trajectory.samples {
            for h in &s.state.h {
                assert!(h.max_abs_diff(&Sl2Matrix::IDENTITY) < 1e-10);
            }
        }
        assert_eq!(out.report.n_source, NSource::Config);
        assert!(out.report.band_vorticity_ratio.unwrap() > 0.0);
    }

    #[test]
    fn auto_n_uses_field_estimate() {
        let mut config = ExperimentConfig::preset(Preset::Quadrupole, 256.0, 4);
        config.n = NSpec::Auto;
        config.grid_n = 128;
        let prepared = prepare(&config, Execution::default()).unwrap();
        assert_eq!(prepared.n_source, NSource::FieldEstimate);
        assert_eq!(prepared.params.n, prepared.spectrum.n_estimate);
    }

    #[test]
    fn t_final_override_is_flagged() {
        let mut config = ExperimentConfig::preset(Preset::Quadrupole, 256.0, 3);
        config.grid_n = 128;
        config.t_final = Some(0.01);
        let out = run_experiment(&config, Execution::default()).unwrap();
        assert!(out.report.beyond_horizon);
        assert_eq!(out.trajectory.last().unwrap().state.t, 0.01);
    }
}
