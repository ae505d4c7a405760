//! Fourier differentiation on the periodic unit cube `[0,1)^d`.
//!
//! Points are indexed with axis 0 varying fastest. Derivative symbols are
//! truncated on every axis: by default only the Nyquist mode is dropped,
//! optionally everything above `N/3` (the 2/3 rule).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct SpectralGrid {
    pub axes: usize,
    pub n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<i64>,
    cutoff: i64,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("axes", &self.axes)
            .field("n", &self.n)
            .finish()
    }
}

impl Clone for SpectralGrid {
    fn clone(&self) -> Self {
        let mut out = Self::new(self.axes, self.n);
        out.cutoff = self.cutoff;
        out
    }
}

impl SpectralGrid {
    pub fn new(axes: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let wavenumbers = (0..n as i64)
            .map(|j| {
                if j <= (n as i64 - 1) / 2 {
                    j
                } else {
                    j - n as i64
                }
            })
            .collect();
        Self {
            axes,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers,
            cutoff: (n as i64 - 1) / 2,
        }
    }

    /// Same grid with derivatives truncated to `|k| ≤ N/3`.
    pub fn with_two_thirds_rule(mut self) -> Self {
        self.cutoff = self.n as i64 / 3;
        self
    }

    pub fn npts(&self) -> usize {
        self.n.pow(self.axes as u32)
    }

    /// Coordinates of point `p` in `[0,1)^d`.
    pub fn coords(&self, p: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.axes);
        let mut rest = p;
        for _ in 0..self.axes {
            out.push((rest % self.n) as f64 / self.n as f64);
            rest /= self.n;
        }
        out
    }

    /// Integer wavevector of Fourier index `p`.
    pub fn wavevector(&self, p: usize) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.axes);
        let mut rest = p;
        for _ in 0..self.axes {
            out.push(self.wavenumbers[rest % self.n]);
            rest /= self.n;
        }
        out
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let stride = n.pow(axis as u32);
        let total = data.len();
        let lines = total / n;
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        // Gather every line along `axis` into a contiguous buffer.
        let mut line = 0;
        for outer in (0..total).step_by(stride * n) {
            for inner in 0..stride {
                for k in 0..n {
                    buf[line * n + k] = data[outer + inner + k * stride];
                }
                line += 1;
            }
        }
        debug_assert_eq!(line, lines);
        fft.process(&mut buf);
        let mut line = 0;
        for outer in (0..total).step_by(stride * n) {
            for inner in 0..stride {
                for k in 0..n {
                    data[outer + inner + k * stride] = buf[line * n + k];
                }
                line += 1;
            }
        }
    }

    pub fn forward(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut data = f.to_vec();
        for axis in 0..self.axes {
            self.transform_axis(&mut data, axis, &self.forward);
        }
        data
    }

    pub fn inverse(&self, f_hat: &[Complex64]) -> Vec<Complex64> {
        let mut data = f_hat.to_vec();
        for axis in 0..self.axes {
            self.transform_axis(&mut data, axis, &self.inverse);
        }
        let scale = 1.0 / self.npts() as f64;
        for x in &mut data {
            *x *= scale;
        }
        data
    }

    /// Multiplies the spectrum by `symbol(k)`; modes beyond the cutoff are
    /// dropped when `dealias` is set.
    pub fn apply_symbol(
        &self,
        f: &[Complex64],
        dealias: bool,
        symbol: impl Fn(&[i64]) -> Complex64,
    ) -> Vec<Complex64> {
        let mut hat = self.forward(f);
        let cut = self.cutoff();
        for (p, h) in hat.iter_mut().enumerate() {
            let k = self.wavevector(p);
            if dealias && k.iter().any(|&kk| kk.abs() > cut) {
                *h = Complex64::new(0.0, 0.0);
            } else {
                *h *= symbol(&k);
            }
        }
        self.inverse(&hat)
    }

    /// `∂/∂x_axis`.
    pub fn d_real(&self, f: &[Complex64], axis: usize) -> Vec<Complex64> {
        self.apply_symbol(f, true, |k| Complex64::new(0.0, 2.0 * PI * k[axis] as f64))
    }

    /// `∂_a = ½(∂_{x_a} − i ∂_{y_a})`, or `∂_ā` when `bar`, with
    /// `x_a, y_a` the real axes `2a, 2a+1`.
    pub fn d_complex(&self, f: &[Complex64], a: usize, bar: bool) -> Vec<Complex64> {
        let s = if bar { -1.0 } else { 1.0 };
        self.apply_symbol(f, true, |k| {
            // ½(2πi kx ∓ i·2πi ky) = πi kx ± π ky
            Complex64::new(s * PI * k[2 * a + 1] as f64, PI * k[2 * a] as f64)
        })
    }

    /// `∂_a ∂_b̄ f` in one transform.
    pub fn d_mixed(&self, f: &[Complex64], a: usize, b: usize) -> Vec<Complex64> {
        self.apply_symbol(f, true, |k| {
            Complex64::new(PI * k[2 * a + 1] as f64, PI * k[2 * a] as f64)
                * Complex64::new(-PI * k[2 * b + 1] as f64, PI * k[2 * b] as f64)
        })
    }

    /// Mean value (trapezoid rule, exact for trigonometric polynomials).
    pub fn mean(&self, f: &[Complex64]) -> Complex64 {
        f.iter().sum::<Complex64>() / f.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &SpectralGrid, f: impl Fn(&[f64]) -> f64) -> Vec<Complex64> {
        (0..grid.npts())
            .map(|p| Complex64::new(f(&grid.coords(p)), 0.0))
            .collect()
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn roundtrip() {
        let grid = SpectralGrid::new(2, 8);
        let f = sample(&grid, |x| (2.0 * PI * x[0]).sin() + x[1] * x[1]);
        let back = grid.inverse(&grid.forward(&f));
        assert!(max_err(&f, &back) < 1e-13);
    }

    #[test]
    fn derivative_of_trig_polynomial() {
        let grid = SpectralGrid::new(2, 16);
        let f = sample(&grid, |x| (2.0 * PI * (x[0] + 2.0 * x[1])).cos());
        let fy = sample(&grid, |x| {
            -4.0 * PI * (2.0 * PI * (x[0] + 2.0 * x[1])).sin()
        });
        assert!(max_err(&grid.d_real(&f, 1), &fy) < 1e-11);
    }

    #[test]
    fn complex_derivatives_of_z() {
        // f = e^{2πi x}: ∂_z f = πi f, ∂_z̄ f = πi f.
        let grid = SpectralGrid::new(2, 8);
        let f: Vec<_> = (0..grid.npts())
            .map(|p| Complex64::from_polar(1.0, 2.0 * PI * grid.coords(p)[0]))
            .collect();
        let expected: Vec<_> = f.iter().map(|v| v * Complex64::new(0.0, PI)).collect();
        assert!(max_err(&grid.d_complex(&f, 0, false), &expected) < 1e-12);
        assert!(max_err(&grid.d_complex(&f, 0, true), &expected) < 1e-12);
        // ∂∂̄ = ¼ Δ_flat.
        let mixed = grid.d_mixed(&f, 0, 0);
        let lap: Vec<_> = f.iter().map(|v| v * (-PI * PI)).collect();
        assert!(max_err(&mixed, &lap) < 1e-12);
    }

    #[test]
    fn dealiasing_removes_high_modes() {
        let grid = SpectralGrid::new(1, 12);
        let f = sample(&grid, |x| (2.0 * PI * 6.0 * x[0]).cos());
        assert!(grid.d_real(&f, 0).iter().all(|v| v.norm() < 1e-12));
        let grid = grid.with_two_thirds_rule();
        let f = sample(&grid, |x| (2.0 * PI * 5.0 * x[0]).cos());
        assert!(grid.d_real(&f, 0).iter().all(|v| v.norm() < 1e-12));
    }
}
