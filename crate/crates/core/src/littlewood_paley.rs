//! Smooth dyadic frequency decomposition of periodic grid fields.
//!
//! The bump `ψ` equals 1 for `|ξ| ≤ 1` and 0 for `|ξ| ≥ 2`. Band `j ≥ 1` has
//! symbol `ψ(2^{-j}ξ) − ψ(2^{1-j}ξ)`, band 0 has symbol `ψ`, and the averaging
//! operator `E_j = Σ_{k<j} P_k` has the telescoped symbol `ψ(2^{1-j}ξ)`
//! (zero for `j ≤ 0`).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::biot_savart::AnnulusQuadrature;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::par::Execution;
use crate::sl2::ScaleIndex;
use crate::spectral::{multiply_and_invert, oversample, Fft2};

/// Refinement factor of the spectrally oversampled grid used for node sampling.
pub const OVERSAMPLE: usize = 4;
/// Points per axis in the Lagrange interpolation stencil.
const STENCIL: usize = 6;
const MEAN_TOLERANCE: f64 = 1e-12;

fn smooth_step(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Bump without the sign check; `r` is a frequency magnitude.
pub(crate) fn psi(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let up = smooth_step(2.0 - r);
        up / (up + smooth_step(r - 1.0))
    }
}

/// Smooth radial cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`.
pub fn bump_psi(r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(Error::NegativeRadius(r));
    }
    Ok(psi(r))
}

fn dyadic(k: i64) -> f64 {
    (k as f64).exp2()
}

/// Multiplier of `P_j` at frequency `xi`.
pub fn band_symbol(j: ScaleIndex, xi: [f64; 2]) -> f64 {
    band_symbol_radial(j.0, xi[0].hypot(xi[1]))
}

fn band_symbol_radial(j: usize, r: f64) -> f64 {
    if j == 0 {
        psi(r)
    } else {
        let s = dyadic(-(j as i64));
        psi(s * r) - psi(2.0 * s * r)
    }
}

/// Multiplier of `E_k = Σ_{i<k} P_i`.
pub fn average_symbol(k: i64, xi: [f64; 2]) -> f64 {
    average_symbol_radial(k, xi[0].hypot(xi[1]))
}

fn average_symbol_radial(k: i64, r: f64) -> f64 {
    if k <= 0 {
        0.0
    } else {
        psi(dyadic(1 - k) * r)
    }
}

/// Per-band sup norms of `∇u` and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpectrum {
    /// `‖P_j ∇u‖∞` for `j = 0, 1, …`, the matrix norm being the largest entry.
    pub norms: Vec<f64>,
    pub n_estimate: f64,
}

impl BandSpectrum {
    pub fn sup(&self) -> f64 {
        self.norms.iter().fold(0.0_f64, |m, &v| m.max(v))
    }
}

/// `ω_{0,j}` sampled at the nodes of the annulus quadrature for scale `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandVorticity {
    pub j: ScaleIndex,
    pub node_values: Vec<f64>,
    pub sup_norm: f64,
}

impl BandVorticity {
    pub fn from_node_values(j: ScaleIndex, node_values: Vec<f64>) -> Self {
        let sup_norm = node_values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        BandVorticity {
            j,
            node_values,
            sup_norm,
        }
    }

    /// Evaluate `f(r, θ)` at the polar coordinates of each node of `quad`.
    pub fn from_polar(quad: &AnnulusQuadrature, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..quad.len())
            .map(|i| {
                let (r, theta) = quad.polar(i);
                f(r, theta)
            })
            .collect();
        BandVorticity::from_node_values(quad.j, values)
    }

    pub fn zeros(j: ScaleIndex, len: usize) -> Self {
        BandVorticity::from_node_values(j, vec![0.0; len])
    }

    pub fn scaled(&self, s: f64) -> Self {
        BandVorticity {
            j: self.j,
            node_values: self.node_values.iter().map(|v| v * s).collect(),
            sup_norm: self.sup_norm * s.abs(),
        }
    }
}

/// A grid field together with its spectrum, so several multipliers can be
/// applied with a single forward transform.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid2D,
    spectrum: Vec<Complex64>,
    fft: Fft2,
}

impl SpectralField {
    pub fn new(grid: &Grid2D, exec: Execution) -> Self {
        let fft = Fft2::new(grid.n(), exec);
        let spectrum = fft.forward_real(grid.values());
        SpectralField {
            grid: grid.clone(),
            spectrum,
            fft,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    fn exec(&self) -> Execution {
        self.fft.exec()
    }

    fn check_resolved(&self, top: f64, what: &str) -> Result<()> {
        let nyq = self.grid.nyquist();
        if top > nyq {
            return Err(Error::Unresolvable(format!(
                "{what} reaches frequency {top} beyond Nyquist {nyq}"
            )));
        }
        Ok(())
    }

    fn filtered(&self, symbol: impl Fn(f64) -> f64 + Sync) -> Grid2D {
        let values = multiply_and_invert(&self.fft, &self.spectrum, self.grid.half_width(), |a, b| {
            symbol(a.hypot(b))
        });
        self.grid.with_values(values)
    }

    /// `P_j f`.
    pub fn band(&self, j: ScaleIndex) -> Result<Grid2D> {
        self.check_resolved(dyadic(j.0 as i64 + 1), &format!("band {}", j.0))?;
        Ok(self.filtered(|r| band_symbol_radial(j.0, r)))
    }

    /// `E_j f`.
    pub fn average(&self, j: ScaleIndex) -> Result<Grid2D> {
        self.check_resolved(dyadic(j.0 as i64), &format!("average {}", j.0))?;
        Ok(self.filtered(|r| average_symbol_radial(j.0 as i64, r)))
    }

    /// Highest band index whose support meets the grid's frequencies.
    pub fn top_band(&self) -> usize {
        let max_freq = std::f64::consts::SQRT_2 * self.grid.nyquist();
        let mut j = 0;
        while dyadic(j as i64) < max_freq {
            j += 1;
        }
        j
    }

    pub fn gradient_bands(&self) -> Result<BandSpectrum> {
        let norms = self.gradient_band_norms(self.top_band() + 1)?;
        let n_estimate = norms.iter().sum();
        Ok(BandSpectrum { norms, n_estimate })
    }

    /// `‖P_j ∇u‖∞` for `j < bands` only.
    pub fn gradient_band_norms(&self, bands: usize) -> Result<Vec<f64>> {
        let mean = self.grid.mean();
        if mean.abs() > MEAN_TOLERANCE {
            return Err(Error::NonZeroMean(mean));
        }
        let n = self.grid.n();
        let period = 2.0 * self.grid.half_width();
        let norms = self.exec().map(bands, |j| {
            let fft = Fft2::new(n, Execution::Sequential);
            // entries: [[-A, -B], [C, A]] with A = ξ1ξ2/|ξ|², B = ξ2²/|ξ|², C = ξ1²/|ξ|²
            let mut ab = self.spectrum.clone();
            let mut c = self.spectrum.clone();
            for p in 0..n {
                let k1 = crate::spectral::signed_index(p, n);
                let xi1 = k1 as f64 / period;
                for q in 0..n {
                    let k2 = crate::spectral::signed_index(q, n);
                    let xi2 = k2 as f64 / period;
                    let r2 = xi1 * xi1 + xi2 * xi2;
                    let idx = p * n + q;
                    if r2 == 0.0 {
                        ab[idx] = Complex64::default();
                        c[idx] = Complex64::default();
                        continue;
                    }
                    let w = band_symbol_radial(j, r2.sqrt()) / r2;
                    let nyquist_edge = 2 * k1.unsigned_abs() as usize == n || 2 * k2.unsigned_abs() as usize == n;
                    let a = if nyquist_edge { 0.0 } else { xi1 * xi2 * w };
                    ab[idx] *= Complex64::new(a, xi2 * xi2 * w);
                    c[idx] *= xi1 * xi1 * w;
                }
            }
            fft.inverse(&mut ab);
            fft.inverse(&mut c);
            ab.iter().zip(&c).fold(0.0_f64, |m, (ab, c)| {
                m.max(ab.re.abs()).max(ab.im.abs()).max(c.re.abs())
            })
        });
        Ok(norms)
    }

    /// Band window `(E_{j+w} − E_{j−w})` restricted to the grid. An upper
    /// operator whose cutoff lies above every grid frequency acts as the
    /// identity and is reported as `None`.
    fn window_key(&self, j: usize, half_width_bands: usize) -> WindowKey {
        let upper = j as i64 + half_width_bands as i64;
        let lower = j as i64 - half_width_bands as i64;
        let max_freq = std::f64::consts::SQRT_2 * self.grid.nyquist();
        let upper = if upper >= 1 && dyadic(upper - 1) >= max_freq {
            None
        } else {
            Some(upper)
        };
        WindowKey {
            upper,
            lower: (lower >= 1).then_some(lower),
        }
    }

    fn oversampled_window(&self, key: WindowKey) -> OversampledField {
        let mut data = self.spectrum.clone();
        let symbol = move |a: f64, b: f64| key.symbol(a.hypot(b));
        crate::spectral::scale_spectrum(&self.fft, &mut data, self.grid.half_width(), &symbol);
        let n = self.grid.n();
        let values = oversample(&data, n, OVERSAMPLE, self.exec());
        OversampledField {
            m: n * OVERSAMPLE,
            half_width: self.grid.half_width(),
            values,
        }
    }

    /// `ω_{0,j}` at the nodes of `quad`.
    pub fn band_vorticity(
        &self,
        j: ScaleIndex,
        half_width_bands: usize,
        quad: &AnnulusQuadrature,
    ) -> Result<BandVorticity> {
        self.check_annulus(j, quad)?;
        let fine = self.oversampled_window(self.window_key(j.0, half_width_bands));
        Ok(fine.sample(j, quad))
    }

    /// `ω_{0,j}` for every scale of `quads`. Scales sharing the same effective
    /// window on this grid share one oversampled field.
    pub fn band_vorticities(
        &self,
        half_width_bands: usize,
        quads: &[AnnulusQuadrature],
    ) -> Result<Vec<BandVorticity>> {
        let mut groups: BTreeMap<WindowKey, Vec<usize>> = BTreeMap::new();
        for (i, quad) in quads.iter().enumerate() {
            self.check_annulus(quad.j, quad)?;
            groups
                .entry(self.window_key(quad.j.0, half_width_bands))
                .or_default()
                .push(i);
        }
        let mut out: Vec<Option<BandVorticity>> = vec![None; quads.len()];
        for (key, members) in groups {
            let fine = self.oversampled_window(key);
            let sampled = self.exec().map(members.len(), |k| {
                let quad = &quads[members[k]];
                fine.sample(quad.j, quad)
            });
            for (i, band) in members.into_iter().zip(sampled) {
                out[i] = Some(band);
            }
        }
        Ok(out.into_iter().map(|b| b.expect("every scale grouped")).collect())
    }

    fn check_annulus(&self, j: ScaleIndex, quad: &AnnulusQuadrature) -> Result<()> {
        if quad.j != j {
            return Err(Error::ShapeMismatch(format!(
                "quadrature is for scale {}, requested {}",
                quad.j.0, j.0
            )));
        }
        let outer = 2.0 * j.inner_radius();
        if outer > self.grid.half_width() {
            return Err(Error::Unresolvable(format!(
                "annulus {} (outer radius {outer}) exceeds the domain half-width {}",
                j.0,
                self.grid.half_width()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct WindowKey {
    upper: Option<i64>,
    lower: Option<i64>,
}

impl WindowKey {
    fn symbol(&self, r: f64) -> f64 {
        let hi = self.upper.map_or(1.0, |k| average_symbol_radial(k, r));
        let lo = self.lower.map_or(0.0, |k| average_symbol_radial(k, r));
        hi - lo
    }
}

struct OversampledField {
    m: usize,
    half_width: f64,
    values: Vec<f64>,
}

impl OversampledField {
    fn sample(&self, j: ScaleIndex, quad: &AnnulusQuadrature) -> BandVorticity {
        BandVorticity::from_node_values(j, quad.nodes.iter().map(|&x| self.interpolate(x)).collect())
    }

    /// Tensor-product Lagrange interpolation on a 6×6 periodic stencil.
    fn interpolate(&self, x: [f64; 2]) -> f64 {
        let h = 2.0 * self.half_width / self.m as f64;
        let (i0, wx) = stencil_weights((x[0] + self.half_width) / h);
        let (k0, wy) = stencil_weights((x[1] + self.half_width) / h);
        let m = self.m as i64;
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            let p = (i0 + a as i64).rem_euclid(m) as usize;
            let row = &self.values[p * self.m..(p + 1) * self.m];
            let mut inner = 0.0;
            for (b, wb) in wy.iter().enumerate() {
                inner += wb * row[(k0 + b as i64).rem_euclid(m) as usize];
            }
            acc += wa * inner;
        }
        acc
    }
}

fn stencil_weights(s: f64) -> (i64, [f64; STENCIL]) {
    let base = s.floor();
    let t = s - base;
    let first = base as i64 - (STENCIL as i64 / 2 - 1);
    let mut w = [0.0; STENCIL];
    for (k, wk) in w.iter_mut().enumerate() {
        let xk = k as f64 - (STENCIL as f64 / 2.0 - 1.0);
        let mut v = 1.0;
        for m in 0..STENCIL {
            if m != k {
                let xm = m as f64 - (STENCIL as f64 / 2.0 - 1.0);
                v *= (t - xm) / (xk - xm);
            }
        }
        *wk = v;
    }
    (first, w)
}

pub fn apply_band(f: &Grid2D, j: ScaleIndex) -> Result<Grid2D> {
    SpectralField::new(f, Execution::default()).band(j)
}

pub fn apply_average(f: &Grid2D, j: ScaleIndex) -> Result<Grid2D> {
    SpectralField::new(f, Execution::default()).average(j)
}

pub fn gradient_bands_from_vorticity(omega: &Grid2D) -> Result<BandSpectrum> {
    SpectralField::new(omega, Execution::default()).gradient_bands()
}

pub fn build_band_vorticity(
    omega: &Grid2D,
    j: ScaleIndex,
    logn_bands: usize,
    quad: &AnnulusQuadrature,
) -> Result<BandVorticity> {
    SpectralField::new(omega, Execution::default()).band_vorticity(j, logn_bands, quad)
}
