//! Periodic sampled fields on the square `[-L, L)²`.
//!
//! File format: a single text header line `grid2d n=<n> L=<L> dtype=f64\n`
//! followed by `n²` little-endian `f64` values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_HALF_WIDTH: f64 = 2.0;

/// Samples of a `2L`-periodic field. Sample `(p, q)` sits at
/// `x = (-L + 2L·p/n, -L + 2L·q/n)` and is stored at `values[p * n + q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    n: usize,
    half_width: f64,
    values: Vec<f64>,
}

impl Grid2D {
    pub fn new(n: usize, half_width: f64, values: Vec<f64>) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n={n} is not a power of two ≥ 2")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        if values.len() != n * n {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                n * n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample at index {i}")));
        }
        Ok(Grid2D {
            n,
            half_width,
            values,
        })
    }

    pub fn zeros(n: usize, half_width: f64) -> Result<Self> {
        Grid2D::new(n, half_width, vec![0.0; n * n])
    }

    /// Sample `f(x1, x2)` at every grid point.
    pub fn from_fn(n: usize, half_width: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let dx = 2.0 * half_width / n as f64;
        let mut values = Vec::with_capacity(n * n);
        for p in 0..n {
            let x1 = -half_width + dx * p as f64;
            for q in 0..n {
                values.push(f(x1, -half_width + dx * q as f64));
            }
        }
        Grid2D::new(n, half_width, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Largest frequency (cycles per unit length) resolved along an axis.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / (4.0 * self.half_width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coord(&self, index: usize) -> f64 {
        -self.half_width + self.spacing() * index as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Translate by whole cells: output `(p, q)` takes input `(p - dp, q - dq)`.
    pub fn shifted(&self, dp: usize, dq: usize) -> Grid2D {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                out[((p + dp) % n) * n + (q + dq) % n] = self.values[p * n + q];
            }
        }
        Grid2D {
            n,
            half_width: self.half_width,
            values: out,
        }
    }

    pub fn scaled(&self, s: f64) -> Grid2D {
        Grid2D {
            n: self.n,
            half_width: self.half_width,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Grid2D {
        debug_assert_eq!(values.len(), self.n * self.n);
        Grid2D {
            n: self.n,
            half_width: self.half_width,
            values,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format!("grid2d n={} L={} dtype=f64\n", self.n, self.half_width);
        let mut out = Vec::with_capacity(header.len() + 8 * self.values.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::GridFormat("missing header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::GridFormat("header is not UTF-8".into()))?;
        let mut tokens = header.split_ascii_whitespace();
        if tokens.next() != Some("grid2d") {
            return Err(Error::GridFormat("header must start with 'grid2d'".into()));
        }
        let (mut n, mut half_width, mut dtype) = (None, None, None);
        for tok in tokens {
            match tok.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("L", v)) => half_width = v.parse::<f64>().ok(),
                Some(("dtype", v)) => dtype = Some(v.to_string()),
                _ => return Err(Error::GridFormat(format!("unexpected header token '{tok}'"))),
            }
        }
        let n = n.ok_or_else(|| Error::GridFormat("missing or invalid n".into()))?;
        let half_width = half_width.ok_or_else(|| Error::GridFormat("missing or invalid L".into()))?;
        if dtype.as_deref() != Some("f64") {
            return Err(Error::GridFormat("dtype must be f64".into()));
        }
        let body = &bytes[nl + 1..];
        if body.len() != 8 * n * n {
            return Err(Error::GridFormat(format!(
                "expected {} payload bytes, found {}",
                8 * n * n,
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Grid2D::new(n, half_width, values)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Grid2D::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_bit_exact() {
        let g = Grid2D::new(2, 2.0, vec![1.0, -0.5, 0.25, 3.0]).unwrap();
        let bytes = g.to_bytes();
        let header = b"grid2d n=2 L=2 dtype=f64\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..header.len() + 8], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), header.len() + 32);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid2D::new(3, 2.0, vec![0.0; 9]).is_err());
        assert!(Grid2D::new(4, 2.0, vec![0.0; 15]).is_err());
        assert!(Grid2D::new(2, 2.0, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Grid2D::from_bytes(b"grid2d n=2 L=2 dtype=f32\n").is_err());
        assert!(Grid2D::from_bytes(b"grid2d n=2 L=2 dtype=f64\n\0\0").is_err());
        assert!(Grid2D::from_bytes(b"no newline").is_err());
    }

    #[test]
    fn coordinates_follow_layout() {
        let g = Grid2D::from_fn(8, 2.0, |x1, x2| 10.0 * x1 + x2).unwrap();
        assert_eq!(g.values()[0], 10.0 * -2.0 + -2.0);
        assert_eq!(g.values()[8 + 2], 10.0 * -1.5 + -1.0);
        assert_eq!(g.nyquist(), 1.0);
    }

    proptest! {
        #[test]
        fn bytes_round_trip(values in proptest::collection::vec(-1e6..1e6f64, 16), l in 0.5..4.0f64) {
            let g = Grid2D::new(4, l, values).unwrap();
            prop_assert_eq!(Grid2D::from_bytes(&g.to_bytes()).unwrap(), g);
        }
    }
}
