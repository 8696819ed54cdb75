//! Synthetic initial vorticities on the periodic square `[-L, L)²`.
//!
//! * `radial`: a bump at the origin with a compensating ring, zero mean.
//! * `quadrupole`: `f(|x|)·cos 2θ` with `f = 1` on one annulus `A_s`.
//! * `odd_odd`: odd in both coordinates, a sum of products of sines under a
//!   unit-disk envelope.
//! * `random_bands`: one band-limited random angular profile per dyadic
//!   band, with amplitudes calibrated so every `‖P_j ∇u‖∞` lands near 1.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, DEFAULT_HALF_WIDTH};
use crate::littlewood_paley::{psi, SpectralField};
use crate::par::Execution;
use crate::sl2::ScaleIndex;

/// Per-band targets for `random_bands`.
pub const CALIBRATION_BAND: (f64, f64) = (0.5, 2.0);
const CALIBRATION_ITERATIONS: usize = 12;
const ANGULAR_MODES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Radial,
    Quadrupole,
    OddOdd,
    RandomBands,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Radial, Preset::Quadrupole, Preset::OddOdd, Preset::RandomBands];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Radial => "radial",
            Preset::Quadrupole => "quadrupole",
            Preset::OddOdd => "odd_odd",
            Preset::RandomBands => "random_bands",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Optional preset knobs; unset fields take per-preset defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Annulus index carrying the quadrupole plateau (at least 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<usize>,
    /// Number of dyadic bands populated by `odd_odd` and `random_bands`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<usize>,
}

/// Number of bands `b` with `2^b` at or below the grid Nyquist frequency.
pub fn max_bands(n: usize, half_width: f64) -> usize {
    let nyquist = n as f64 / (4.0 * half_width);
    if nyquist < 2.0 {
        0
    } else {
        nyquist.log2().floor() as usize
    }
}

fn too_coarse(what: String, n: usize) -> Error {
    Error::Unresolvable(format!("grid too coarse for requested {what} (n = {n})"))
}

/// `exp(1 − 1/(1 − s²))` on `|s| < 1`, peak 1 at `s = 0`.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// 1 on `[a, b]`, smooth tapers over `[a/2, a]` and `[b, 2b]`, zero elsewhere.
fn plateau(r: f64, a: f64, b: f64) -> f64 {
    if r < a {
        if r <= a / 2.0 {
            0.0
        } else {
            psi(1.0 + (a - r) / (a / 2.0))
        }
    } else if r <= b {
        1.0
    } else {
        psi(1.0 + (r - b) / b)
    }
}

/// Build a preset field on an `n × n` grid of half-width
/// [`DEFAULT_HALF_WIDTH`]. `scales` is the cascade depth `J`, used as the
/// default band count where one applies.
pub fn preset_vorticity(
    preset: Preset,
    params: &PresetParams,
    n: usize,
    scales: usize,
    seed: u64,
) -> Result<Grid2D> {
    preset_vorticity_with(preset, params, n, scales, seed, Execution::default())
}

pub fn preset_vorticity_with(
    preset: Preset,
    params: &PresetParams,
    n: usize,
    scales: usize,
    seed: u64,
    exec: Execution,
) -> Result<Grid2D> {
    let l = DEFAULT_HALF_WIDTH;
    Grid2D::zeros(n, l)?;
    let amplitude = params.amplitude.unwrap_or(1.0);
    if !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!("amplitude must be finite (got {amplitude})")));
    }
    let available = max_bands(n, l);
    let bands = match params.bands {
        Some(0) => return Err(Error::InvalidParameter("bands must be at least 1".into())),
        Some(b) if b > available => return Err(too_coarse(format!("{b} bands"), n)),
        Some(b) => b,
        None => scales.clamp(1, available.max(1)),
    };
    if available < 2 {
        return Err(too_coarse(format!("preset {preset}"), n));
    }
    match preset {
        Preset::Radial => radial(n, l, amplitude),
        Preset::Quadrupole => {
            let s = params.scale.unwrap_or(2);
            if s < 2 {
                return Err(Error::InvalidParameter(format!(
                    "quadrupole scale must be at least 2 (got {s})"
                )));
            }
            if s + 2 > available {
                return Err(too_coarse(format!("quadrupole scale {s}"), n));
            }
            quadrupole(n, l, amplitude, s)
        }
        Preset::OddOdd => odd_odd(n, l, amplitude, bands),
        Preset::RandomBands => random_bands(n, l, amplitude, bands, seed, exec),
    }
}

fn remove_mean(g: Grid2D) -> Result<Grid2D> {
    let mean = g.mean();
    let (n, l) = (g.n(), g.half_width());
    Grid2D::new(n, l, g.into_values().into_iter().map(|v| v - mean).collect())
}

fn radial(n: usize, l: f64, amplitude: f64) -> Result<Grid2D> {
    let core = Grid2D::from_fn(n, l, |x, y| bump(x.hypot(y) / 0.5))?;
    let ring = Grid2D::from_fn(n, l, |x, y| bump((x.hypot(y) - 0.75) / 0.2))?;
    let alpha = core.values().iter().sum::<f64>() / ring.values().iter().sum::<f64>();
    let values = core
        .values()
        .iter()
        .zip(ring.values())
        .map(|(c, r)| amplitude * (c - alpha * r))
        .collect();
    remove_mean(Grid2D::new(n, l, values)?)
}

fn quadrupole(n: usize, l: f64, amplitude: f64, s: usize) -> Result<Grid2D> {
    let a = 0.5f64.powi(s as i32);
    Grid2D::from_fn(n, l, |x, y| {
        let r2 = x * x + y * y;
        if r2 == 0.0 {
            return 0.0;
        }
        amplitude * plateau(r2.sqrt(), a, 2.0 * a) * (x * x - y * y) / r2
    })
}

fn odd_odd(n: usize, l: f64, amplitude: f64, bands: usize) -> Result<Grid2D> {
    Grid2D::from_fn(n, l, |x, y| {
        let envelope = bump(x.hypot(y));
        let sum: f64 = (0..bands)
            .map(|k| {
                let w = PI * 2f64.powi(k as i32);
                (w * x).sin() * (w * y).sin()
            })
            .sum();
        amplitude * envelope * sum
    })
}

fn random_profile(n: usize, l: f64, j: usize, rng: &mut ChaCha8Rng) -> Result<Grid2D> {
    let coeffs: Vec<(f64, f64)> = (0..ANGULAR_MODES)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let inner = 0.5f64.powi(j as i32 + 1);
    Grid2D::from_fn(n, l, |x, y| {
        let r = x.hypot(y);
        let radial = bump((r / inner - 1.5) / 0.5);
        if radial == 0.0 {
            return 0.0;
        }
        let theta = y.atan2(x);
        let angular: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(m, (a, b))| {
                let m = (m + 1) as f64;
                a * (m * theta).cos() + b * (m * theta).sin()
            })
            .sum();
        radial * angular
    })
}

fn random_bands(n: usize, l: f64, amplitude: f64, bands: usize, seed: u64, exec: Execution) -> Result<Grid2D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = Vec::with_capacity(bands);
    for j in 0..bands {
        let profile = random_profile(n, l, j, &mut rng)?;
        let band = SpectralField::new(&remove_mean(profile)?, exec).band(ScaleIndex(j))?;
        sources.push(remove_mean(band)?);
    }
    let combine = |weights: &[f64]| -> Result<Grid2D> {
        let mut values = vec![0.0; n * n];
        for (w, src) in weights.iter().zip(&sources) {
            for (v, s) in values.iter_mut().zip(src.values()) {
                *v += w * s;
            }
        }
        remove_mean(Grid2D::new(n, l, values)?)
    };
    let mut weights: Vec<f64> = sources
        .iter()
        .enumerate()
        .map(|(j, src)| {
            let norm = SpectralField::new(src, exec).gradient_band_norms(j + 1)?[j];
            Ok(if norm > 0.0 { 1.0 / norm } else { 1.0 })
        })
        .collect::<Result<_>>()?;
    for _ in 0..CALIBRATION_ITERATIONS {
        let field = combine(&weights)?;
        let norms = SpectralField::new(&field, exec).gradient_band_norms(bands)?;
        if norms.iter().all(|v| (v - 1.0).abs() < 0.05) {
            break;
        }
        for (w, v) in weights.iter_mut().zip(&norms) {
            if *v > 0.0 {
                *w /= v;
            }
        }
    }
    let field = combine(&weights)?;
    let norms = SpectralField::new(&field, exec).gradient_band_norms(bands)?;
    if let Some((j, v)) = norms
        .iter()
        .enumerate()
        .find(|(_, &v)| !(CALIBRATION_BAND.0..=CALIBRATION_BAND.1).contains(&v))
    {
        return Err(Error::InvalidParameter(format!(
            "random_bands calibration left band {j} at {v}, outside [{}, {}]",
            CALIBRATION_BAND.0, CALIBRATION_BAND.1
        )));
    }
    Ok(field.scaled(amplitude))
}
