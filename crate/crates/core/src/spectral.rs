//! Two-dimensional FFTs on square periodic grids and the associated
//! frequency bookkeeping.
//!
//! Frequencies are in cycles per unit length: grid index `k` on a domain of
//! period `2L` corresponds to `ξ = k / (2L)`, matching the `e^{2πi x·ξ}`
//! convention of the band symbols.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::par::Execution;

/// Signed integer frequency for FFT index `i` on `n` points. The Nyquist
/// index maps to `-n/2`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Forward/inverse plans for `n × n` transforms.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    exec: Execution,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).field("exec", &self.exec).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize, exec: Execution) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            exec,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn exec(&self) -> Execution {
        self.exec
    }

    /// Unnormalized forward transform of a real field.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform including the `1/n²` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        let rows = |_: usize, row: &mut [Complex64]| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(row, &mut scratch);
        };
        self.exec.for_each_chunk(data, n, rows);
        transpose(data, n);
        self.exec.for_each_chunk(data, n, rows);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Multiply the spectrum of `field` by `symbol(ξ1, ξ2)` and return the real
/// part of the inverse transform.
pub fn apply_multiplier(
    fft: &Fft2,
    field: &Grid2D,
    symbol: impl Fn(f64, f64) -> f64 + Sync,
) -> Vec<f64> {
    let spectrum = fft.forward_real(field.values());
    multiply_and_invert(fft, &spectrum, field.half_width(), symbol)
}

pub(crate) fn multiply_and_invert(
    fft: &Fft2,
    spectrum: &[Complex64],
    half_width: f64,
    symbol: impl Fn(f64, f64) -> f64 + Sync,
) -> Vec<f64> {
    let mut data = spectrum.to_vec();
    scale_spectrum(fft, &mut data, half_width, &symbol);
    fft.inverse(&mut data);
    data.into_iter().map(|c| c.re).collect()
}

pub(crate) fn scale_spectrum(
    fft: &Fft2,
    data: &mut [Complex64],
    half_width: f64,
    symbol: &(impl Fn(f64, f64) -> f64 + Sync),
) {
    let n = fft.n();
    let period = 2.0 * half_width;
    fft.exec.for_each_chunk(data, n, |p, row| {
        let xi1 = signed_index(p, n) as f64 / period;
        for (q, v) in row.iter_mut().enumerate() {
            let xi2 = signed_index(q, n) as f64 / period;
            *v *= symbol(xi1, xi2);
        }
    });
}

/// Zero-pad a spectrum of size `n` to `m = factor·n` and invert, producing the
/// trigonometric interpolant sampled on the refined grid. Nyquist bins are
/// split evenly between the positive and negative frequencies.
pub(crate) fn oversample(spectrum: &[Complex64], n: usize, factor: usize, exec: Execution) -> Vec<f64> {
    let m = n * factor;
    let targets = |k: usize| -> ([(usize, f64); 2], usize) {
        if k == n / 2 {
            ([(n / 2, 0.5), (m - n / 2, 0.5)], 2)
        } else if k < n / 2 {
            ([(k, 1.0), (0, 0.0)], 1)
        } else {
            ([(m - (n - k), 1.0), (0, 0.0)], 1)
        }
    };
    let mut padded = vec![Complex64::default(); m * m];
    for p in 0..n {
        let (tp, np) = targets(p);
        for q in 0..n {
            let (tq, nq) = targets(q);
            let v = spectrum[p * n + q];
            for &(pp, wp) in &tp[..np] {
                for &(qq, wq) in &tq[..nq] {
                    padded[pp * m + qq] += v * (wp * wq);
                }
            }
        }
    }
    let big = Fft2::new(m, exec);
    big.transform(&mut padded, &big.inverse);
    let s = 1.0 / (n * n) as f64;
    padded.into_iter().map(|c| c.re * s).collect()
}

/// Trigonometric interpolation of `field` onto an `m × m` grid, `m` a
/// multiple of the current size.
pub fn upsample(field: &Grid2D, m: usize, exec: Execution) -> Result<Grid2D> {
    let n = field.n();
    if m < n || !m.is_multiple_of(n) {
        return Err(Error::InvalidGrid(format!(
            "can only refine by an integer factor ({n} -> {m})"
        )));
    }
    if m == n {
        return Ok(field.clone());
    }
    let fft = Fft2::new(n, exec);
    let values = oversample(&fft.forward_real(field.values()), n, m / n, exec);
    Grid2D::new(m, field.half_width(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_recovers_field() {
        let g = Grid2D::from_fn(16, 2.0, |x, y| (x * 1.3).sin() + y * y).unwrap();
        let fft = Fft2::new(16, Execution::Sequential);
        let mut spec = fft.forward_real(g.values());
        fft.inverse(&mut spec);
        for (a, b) in spec.iter().zip(g.values()) {
            assert!((a.re - b).abs() < 1e-13 && a.im.abs() < 1e-13);
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let g = Grid2D::from_fn(32, 2.0, |x, y| (x * 3.1).cos() * (y * 0.7).sin()).unwrap();
        let a = Fft2::new(32, Execution::Sequential).forward_real(g.values());
        let b = Fft2::new(32, Execution::Parallel).forward_real(g.values());
        assert_eq!(a, b);
    }

    #[test]
    fn oversampling_interpolates_a_pure_mode() {
        let n = 16;
        let l = 2.0;
        let k = 3.0 / (2.0 * l);
        let mode = |x: f64, y: f64| (2.0 * std::f64::consts::PI * k * (x + 2.0 * y)).cos();
        let g = Grid2D::from_fn(n, l, mode).unwrap();
        let fft = Fft2::new(n, Execution::Sequential);
        let fine = oversample(&fft.forward_real(g.values()), n, 4, Execution::Sequential);
        let m = 4 * n;
        let h = 2.0 * l / m as f64;
        for p in (0..m).step_by(5) {
            for q in (0..m).step_by(7) {
                let expect = mode(-l + h * p as f64, -l + h * q as f64);
                assert!((fine[p * m + q] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn upsampling_keeps_coarse_samples() {
        let g = Grid2D::from_fn(16, 2.0, |x, y| (x * 0.5).sin() * (y * 1.5).cos()).unwrap();
        let fine = upsample(&g, 64, Execution::Sequential).unwrap();
        for p in 0..16 {
            for q in 0..16 {
                assert!((fine.values()[4 * p * 64 + 4 * q] - g.values()[p * 16 + q]).abs() < 1e-12);
            }
        }
        assert!(upsample(&g, 24, Execution::Sequential).is_err());
        assert!(upsample(&g, 8, Execution::Sequential).is_err());
    }
}
