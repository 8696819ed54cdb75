//! JSON experiment configuration.

use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::biot_savart::{DEFAULT_N_R, DEFAULT_N_THETA};
use crate::cascade::{default_logn_bands, LogBase, ModelParams, DEFAULT_HORIZON_C, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::presets::{Preset, PresetParams};

pub const DEFAULT_GRID_N: usize = 256;
pub const MAX_SCALES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Field,
    Preset,
}

/// `N` is either given or estimated from the field as `Σ_j ‖P_j ∇u‖∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NSpec {
    Value(f64),
    Auto,
}

impl Serialize for NSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NSpec::Value(v) => s.serialize_f64(*v),
            NSpec::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for NSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = NSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"auto\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<NSpec, E> {
                Ok(NSpec::Value(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<NSpec, E> {
                Ok(NSpec::Value(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<NSpec, E> {
                Ok(NSpec::Value(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<NSpec, E> {
                match v {
                    "auto" => Ok(NSpec::Auto),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

fn default_c() -> f64 {
    DEFAULT_HORIZON_C
}
fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_n_r() -> usize {
    DEFAULT_N_R
}
fn default_n_theta() -> usize {
    DEFAULT_N_THETA
}
fn default_grid_n() -> usize {
    DEFAULT_GRID_N
}
fn default_sample_interval() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_params: Option<PresetParams>,
    #[serde(rename = "N")]
    pub n: NSpec,
    #[serde(rename = "J")]
    pub scales: usize,
    #[serde(rename = "C", default = "default_c")]
    pub horizon_c: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Defaults to `⌈log₂ N⌉` once `N` is known.
    #[serde(rename = "logN_bands", default, skip_serializing_if = "Option::is_none")]
    pub logn_bands: Option<usize>,
    #[serde(default = "default_n_r")]
    pub n_r: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
    #[serde(default)]
    pub log_base_horizon: LogBase,
    #[serde(default)]
    pub seed: u64,
    /// Grid size for preset fields.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: usize,
    /// Integrate to this time instead of the model horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
}

fn range_error(key: &str, value: impl fmt::Display, legal: &str) -> Error {
    Error::Config(format!("{key} = {value} is out of range; legal range is {legal}"))
}

impl ExperimentConfig {
    pub fn preset(preset: Preset, n: f64, scales: usize) -> Self {
        ExperimentConfig {
            mode: Mode::Preset,
            field_path: None,
            preset: Some(preset),
            preset_params: None,
            n: NSpec::Value(n),
            scales,
            horizon_c: DEFAULT_HORIZON_C,
            tau: DEFAULT_TAU,
            logn_bands: None,
            n_r: DEFAULT_N_R,
            n_theta: DEFAULT_N_THETA,
            log_base_horizon: LogBase::Natural,
            seed: 0,
            grid_n: DEFAULT_GRID_N,
            out_dir: None,
            sample_interval: 1,
            t_final: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.mode, &self.field_path, &self.preset) {
            (Mode::Field, Some(_), None) | (Mode::Preset, None, Some(_)) => {}
            (Mode::Field, _, _) => {
                return Err(Error::Config(
                    "mode \"field\" requires field_path and no preset".into(),
                ))
            }
            (Mode::Preset, _, _) => {
                return Err(Error::Config(
                    "mode \"preset\" requires preset and no field_path".into(),
                ))
            }
        }
        if self.mode == Mode::Field && self.preset_params.is_some() {
            return Err(Error::Config("preset_params only apply in preset mode".into()));
        }
        if let NSpec::Value(n) = self.n {
            if !(n.is_finite() && n > 1.0) {
                return Err(Error::Config(format!("N must exceed 1 (got {n})")));
            }
        }
        if !(1..=MAX_SCALES).contains(&self.scales) {
            return Err(range_error("J", self.scales, &format!("1..={MAX_SCALES}")));
        }
        if !(self.horizon_c.is_finite() && self.horizon_c > 0.0 && self.horizon_c <= 10.0) {
            return Err(range_error("C", self.horizon_c, "(0, 10]"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0 && self.tau <= 1.0) {
            return Err(range_error("tau", self.tau, "(0, 1]"));
        }
        if let Some(b) = self.logn_bands {
            if b > 64 {
                return Err(range_error("logN_bands", b, "0..=64"));
            }
        }
        if !(4..=256).contains(&self.n_r) {
            return Err(range_error("n_r", self.n_r, "4..=256"));
        }
        if !(8..=4096).contains(&self.n_theta) {
            return Err(range_error("n_theta", self.n_theta, "8..=4096"));
        }
        if !(self.grid_n.is_power_of_two() && (16..=4096).contains(&self.grid_n)) {
            return Err(range_error("grid_n", self.grid_n, "powers of two in 16..=4096"));
        }
        if self.sample_interval == 0 {
            return Err(range_error("sample_interval", 0, "at least 1"));
        }
        if let Some(t) = self.t_final {
            if !(t.is_finite() && t > 0.0) {
                return Err(range_error("t_final", t, "positive"));
            }
        }
        if let Some(p) = &self.preset_params {
            if let Some(a) = p.amplitude {
                if !a.is_finite() {
                    return Err(range_error("preset_params.amplitude", a, "finite"));
                }
            }
        }
        Ok(())
    }

    /// Model parameters once `N` is resolved (`n_estimate` is used for `"auto"`).
    pub fn model_params(&self, n_estimate: f64) -> Result<ModelParams> {
        let n = match self.n {
            NSpec::Value(v) => v,
            NSpec::Auto => n_estimate,
        };
        let params = ModelParams {
            n,
            scales: self.scales,
            horizon_c: self.horizon_c,
            tau: self.tau,
            logn_bands: self.logn_bands.unwrap_or_else(|| default_logn_bands(n)),
            n_r: self.n_r,
            n_theta: self.n_theta,
            log_base_horizon: self.log_base_horizon,
            seed: self.seed,
        };
        params.validate().map_err(|e| match (self.n, e) {
            (NSpec::Auto, Error::InvalidParameter(m)) => {
                Error::InvalidParameter(format!("with N set from the field estimate: {m}"))
            }
            (_, e) => e,
        })?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse and validate a JSON config. Syntax errors carry line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_filled() {
        let c = parse_config(r#"{"mode":"preset","preset":"radial","N":256,"J":6}"#).unwrap();
        assert_eq!(c.n, NSpec::Value(256.0));
        assert_eq!(c.scales, 6);
        assert_eq!(c.horizon_c, 0.09);
        assert_eq!(c.tau, 0.01);
        assert_eq!((c.n_r, c.n_theta), (24, 96));
        assert_eq!(c.log_base_horizon, LogBase::Natural);
        assert_eq!(c, ExperimentConfig::preset(Preset::Radial, 256.0, 6));
        let p = c.model_params(0.0).unwrap();
        assert_eq!(p.logn_bands, 8);
    }

    #[test]
    fn small_n_rejected() {
        let err = parse_config(r#"{"mode":"preset","preset":"radial","N":0.5,"J":6}"#).unwrap_err();
        assert!(err.to_string().contains("N must exceed 1"), "{err}");
        assert!(err.is_config());
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_config("{\n  \"mode\": \"preset\",\n  \"N\": }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_keys_and_presets_rejected() {
        assert!(parse_config(r#"{"mode":"preset","preset":"radial","N":256,"J":6,"extra":1}"#).is_err());
        assert!(parse_config(r#"{"mode":"preset","preset":"vortex","N":256,"J":6}"#).is_err());
        assert!(parse_config(
            r#"{"mode":"preset","preset":"radial","N":256,"J":6,"preset_params":{"colour":1}}"#
        )
        .is_err());
    }

    #[test]
    fn mode_consistency_enforced() {
        assert!(parse_config(r#"{"mode":"field","preset":"radial","N":256,"J":6}"#).is_err());
        assert!(parse_config(r#"{"mode":"preset","N":256,"J":6}"#).is_err());
        assert!(parse_config(
            r#"{"mode":"preset","preset":"radial","field_path":"w.bin","N":256,"J":6}"#
        )
        .is_err());
        assert!(parse_config(r#"{"mode":"field","field_path":"w.bin","N":"auto","J":6}"#).is_ok());
    }

    #[test]
    fn ranges_name_the_key() {
        let err = parse_config(r#"{"mode":"preset","preset":"radial","N":256,"J":6,"n_theta":4}"#)
            .unwrap_err();
        assert!(err.to_string().contains("n_theta"), "{err}");
        let err = parse_config(r#"{"mode":"preset","preset":"radial","N":256,"J":0}"#).unwrap_err();
        assert!(err.to_string().contains("J = 0"), "{err}");
        assert!(parse_config(r#"{"mode":"preset","preset":"radial","N":256,"J":6,"grid_n":100}"#).is_err());
    }

    #[test]
    fn round_trip_is_stable() {
        let texts = [
            r#"{"mode":"preset","preset":"radial","N":256,"J":6}"#,
            r#"{"mode":"preset","preset":"random_bands","preset_params":{"bands":4,"amplitude":0.5},
                "N":1024,"J":8,"C":0.05,"tau":0.02,"logN_bands":3,"log_base_horizon":"2","seed":9,
                "grid_n":128,"out_dir":"out","sample_interval":5,"t_final":0.01}"#,
            r#"{"mode":"field","field_path":"w.bin","N":"auto","J":3}"#,
        ];
        for text in texts {
            let c = parse_config(text).unwrap();
            let again = parse_config(&c.to_json()).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.to_json(), c.to_json());
        }
    }
}
