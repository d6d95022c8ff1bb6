//! Periodic square lattice, its wavenumber tables and 2D FFTs.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{MhdError, Result};
use crate::par;

/// Square periodic grid `[0, length)²` with `n` samples per direction.
///
/// Spectral data is stored row-major with the x index fastest: entry
/// `iy * n + ix` holds mode `(k_x, k_y) = (kx[ix], ky[iy])`.
pub struct Grid {
    n: usize,
    length: f64,
    /// Integer frequencies in DFT order: `0, 1, .., n/2-1, -n/2, .., -1`.
    freqs: Vec<i64>,
    /// Physical wavenumbers `freqs * 2π / length`.
    wavenumbers: Vec<f64>,
    /// Wavenumbers used by first derivatives; the Nyquist entry is zeroed so
    /// that odd derivatives of real fields stay real.
    deriv_wavenumbers: Vec<f64>,
    /// Per-direction retention: `3|k| < n`.
    keep_1d: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    /// Build a grid. `n` must be even and at least 8, `length` positive.
    pub fn new(n: usize, length: f64) -> Result<Arc<Grid>> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(MhdError::InvalidGrid(format!(
                "n must be even and >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(MhdError::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        let scale = 2.0 * PI / length;
        let freqs: Vec<i64> = (0..n)
            .map(|j| if j < n / 2 { j as i64 } else { j as i64 - n as i64 })
            .collect();
        let wavenumbers: Vec<f64> = freqs.iter().map(|&k| k as f64 * scale).collect();
        let deriv_wavenumbers = freqs
            .iter()
            .map(|&k| if k == -(n as i64) / 2 { 0.0 } else { k as f64 * scale })
            .collect();
        let keep_1d = freqs.iter().map(|&k| 3 * k.unsigned_abs() < n as u64).collect();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Arc::new(Grid {
            n,
            length,
            freqs,
            wavenumbers,
            deriv_wavenumbers,
            keep_1d,
            forward,
            inverse,
        }))
    }

    /// The default `[0, 2π)²` domain.
    pub fn periodic_2pi(n: usize) -> Result<Arc<Grid>> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of grid points (and of Fourier modes).
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `length / n`.
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    pub fn frequencies(&self) -> &[i64] {
        &self.freqs
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub(crate) fn deriv_wavenumbers(&self) -> &[f64] {
        &self.deriv_wavenumbers
    }

    /// Two-thirds rule: mode `(ix, iy)` is kept iff `3|k_x| < n` and `3|k_y| < n`.
    #[inline]
    pub fn is_retained(&self, ix: usize, iy: usize) -> bool {
        self.keep_1d[ix] && self.keep_1d[iy]
    }

    /// Dealias mask over all modes in storage order.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let n = self.n;
        (0..n * n).map(|i| self.is_retained(i % n, i / n)).collect()
    }

    /// Physical coordinates of sample `(ix, iy)`.
    #[inline]
    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        let h = self.spacing();
        (ix as f64 * h, iy as f64 * h)
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(MhdError::GridMismatch {
                left_n: self.n,
                left_len: self.length,
                right_n: other.n,
                right_len: other.length,
            })
        }
    }

    /// Samples to normalized Fourier coefficients,
    /// `c(k) = n⁻² Σ f(x) e^{-ik·x}`.
    pub(crate) fn forward(&self, samples: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_2d(&mut data, &self.forward);
        let norm = 1.0 / (n * n) as f64;
        par::for_each_row(&mut data, n, |_, row| row.iter_mut().for_each(|c| *c *= norm));
        data
    }

    /// Coefficients back to real samples (imaginary parts discarded).
    pub(crate) fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.fft_2d(&mut data, &self.inverse);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Inverse transform keeping the imaginary part, for realness checks.
    pub fn inverse_complex(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut data = coeffs.to_vec();
        self.fft_2d(&mut data, &self.inverse);
        data
    }

    fn fft_2d(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let scratch_len = plan.get_inplace_scratch_len();
        let init = || vec![Complex64::default(); scratch_len];
        par::for_each_row_with(data, n, init, |scratch, row| {
            plan.process_with_scratch(row, scratch)
        });
        transpose(data, n);
        par::for_each_row_with(data, n, init, |scratch, row| {
            plan.process_with_scratch(row, scratch)
        });
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_follow_dft_order() {
        let g = Grid::periodic_2pi(8).unwrap();
        assert_eq!(g.frequencies(), &[0, 1, 2, 3, -4, -3, -2, -1]);
        for (k, w) in g.frequencies().iter().zip(g.wavenumbers()) {
            assert!((*k as f64 - w).abs() < 1e-15);
        }
    }

    #[test]
    fn wavenumbers_scale_with_length() {
        let g = Grid::new(8, 1.0).unwrap();
        assert!((g.wavenumbers()[1] - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn two_thirds_mask_for_n8() {
        let g = Grid::periodic_2pi(8).unwrap();
        let f = g.frequencies();
        for iy in 0..8 {
            for ix in 0..8 {
                let expect = f[ix].abs() <= 2 && f[iy].abs() <= 2;
                assert_eq!(g.is_retained(ix, iy), expect, "mode ({}, {})", f[ix], f[iy]);
            }
        }
    }

    #[test]
    fn mask_is_symmetric_under_negation() {
        for n in [8, 10, 12, 32, 64] {
            let g = Grid::periodic_2pi(n).unwrap();
            let neg = |i: usize| (n - i) % n;
            for iy in 0..n {
                for ix in 0..n {
                    if g.frequencies()[ix] == -(n as i64) / 2 || g.frequencies()[iy] == -(n as i64) / 2 {
                        // the Nyquist mode has no distinct partner
                        assert!(!g.is_retained(ix, iy));
                        continue;
                    }
                    assert_eq!(g.is_retained(ix, iy), g.is_retained(neg(ix), neg(iy)));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(matches!(Grid::periodic_2pi(7), Err(MhdError::InvalidGrid(_))));
        assert!(matches!(Grid::periodic_2pi(6), Err(MhdError::InvalidGrid(_))));
        assert!(matches!(Grid::new(8, 0.0), Err(MhdError::InvalidGrid(_))));
        assert!(Grid::periodic_2pi(10).is_ok());
    }

    #[test]
    fn transform_round_trip() {
        let g = Grid::periodic_2pi(16).unwrap();
        let samples: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let back = g.inverse(&g.forward(&samples));
        let num: f64 = samples.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = samples.iter().map(|a| a * a).sum();
        assert!((num / den).sqrt() < 1e-12);
    }
}
