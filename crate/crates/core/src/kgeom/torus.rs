//! Flat complex tori `T^{2n}` (n = 1, 2) with Kähler potentials sampled on a
//! uniform periodic grid. Real coordinates are `(x_1, y_1, …, x_n, y_n)` on
//! the unit cube and `z_a = x_a + i y_a`; the reference form is
//! `ω₀ = Σ_a A_a dx_a ∧ dy_a`, so `g₀ = diag(A_a / 2)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::Rng;

use super::backend::{no_action, top_monomial_factor, GeometryBackend, HamiltonianAction};
use super::forms::{EndoShape, TensorField};
use super::spectral::SpectralGrid;
use crate::charge::{ModelTopology, Rational};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `cos_amp · cos(2π k·x) + sin_amp · sin(2π k·x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierMode {
    pub k: Vec<i64>,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

pub fn sample_modes(grid: &SpectralGrid, modes: &[FourierMode]) -> Vec<f64> {
    (0..grid.npts())
        .map(|p| {
            let x = grid.coords(p);
            modes
                .iter()
                .map(|m| {
                    let phase =
                        2.0 * PI * m.k.iter().zip(&x).map(|(k, x)| *k as f64 * x).sum::<f64>();
                    m.cos_amp * phase.cos() + m.sin_amp * phase.sin()
                })
                .sum()
        })
        .collect()
}

/// Random low-mode trigonometric polynomial on `2n` real axes: every
/// wavevector with entries in {−1, 0, 1} up to sign, uniform amplitudes.
pub fn random_modes<R: Rng>(axes: usize, rng: &mut R) -> Vec<FourierMode> {
    let mut modes = Vec::new();
    let total = 3usize.pow(axes as u32);
    for code in 0..total {
        let mut k = Vec::with_capacity(axes);
        let mut rest = code;
        for _ in 0..axes {
            k.push((rest % 3) as i64 - 1);
            rest /= 3;
        }
        // Keep one representative of each ±k pair.
        let first = k.iter().find(|&&v| v != 0);
        if first != Some(&1) {
            continue;
        }
        modes.push(FourierMode {
            k,
            cos_amp: rng.gen_range(-1.0..1.0),
            sin_amp: rng.gen_range(-1.0..1.0),
        });
    }
    modes
}

fn invert_small(m: &[Complex64], n: usize) -> Option<(Vec<Complex64>, Complex64)> {
    match n {
        1 => {
            if m[0] == ZERO {
                None
            } else {
                Some((vec![1.0 / m[0]], m[0]))
            }
        }
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            if det == ZERO {
                return None;
            }
            Some((vec![m[3] / det, -m[1] / det, -m[2] / det, m[0] / det], det))
        }
        _ => None,
    }
}

#[derive(Debug)]
pub struct TorusGeometry {
    pub n: usize,
    pub grid: SpectralGrid,
    pub areas: Vec<Rational>,
    pub potential: Vec<f64>,
    /// `g_{ab̄}` grids, index `a * n + b`.
    pub metric: Vec<Vec<Complex64>>,
    /// `g^{ab̄}` grids with `Σ_b g^{ab̄} g_{cb̄} = δ_ac`, index `a * n + b`.
    pub inverse: Vec<Vec<Complex64>>,
    /// `det g_{ab̄}` (real and positive).
    pub det: Vec<f64>,
    curvature: OnceLock<TensorField>,
}

impl Clone for TorusGeometry {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            grid: self.grid.clone(),
            areas: self.areas.clone(),
            potential: self.potential.clone(),
            metric: self.metric.clone(),
            inverse: self.inverse.clone(),
            det: self.det.clone(),
            curvature: OnceLock::new(),
        }
    }
}

impl TorusGeometry {
    pub fn flat(n: usize, grid_size: usize) -> Result<Self> {
        let grid = SpectralGrid::new(2 * n, grid_size);
        let npts = grid.npts();
        Self::new(
            n,
            grid_size,
            vec![Ratio::from_integer(1); n],
            vec![0.0; npts],
        )
    }

    pub fn new(
        n: usize,
        grid_size: usize,
        areas: Vec<Rational>,
        potential: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::Invalid(format!(
                "torus backend supports complex dimension 1 or 2, got {n}"
            )));
        }
        if areas.len() != n || areas.iter().any(|a| *a <= Ratio::from_integer(0)) {
            return Err(Error::Invalid(
                "torus areas must be n positive rationals".into(),
            ));
        }
        if grid_size < 4 {
            return Err(Error::Invalid(
                "torus grid needs at least 4 points per axis".into(),
            ));
        }
        let grid = SpectralGrid::new(2 * n, grid_size);
        let npts = grid.npts();
        if potential.len() != npts {
            return Err(Error::Shape(format!(
                "potential has {} samples, grid has {npts}",
                potential.len()
            )));
        }
        let phi: Vec<Complex64> = potential.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut metric = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                let mut g = grid.d_mixed(&phi, a, b);
                if a == b {
                    let g0 = areas[a].to_f64().unwrap_or(f64::NAN) / 2.0;
                    for v in &mut g {
                        *v += g0;
                    }
                }
                metric.push(g);
            }
        }
        // Enforce exact Hermitian symmetry of the stored samples.
        for a in 0..n {
            metric[a * n + a].iter_mut().for_each(|v| v.im = 0.0);
            for b in a + 1..n {
                let upper = metric[a * n + b].clone();
                metric[b * n + a] = upper.iter().map(|v| v.conj()).collect();
            }
        }

        let mut inverse = vec![vec![ZERO; npts]; n * n];
        let mut det = vec![0.0; npts];
        let mut offenders = Vec::new();
        for p in 0..npts {
            let m: Vec<Complex64> = (0..n * n).map(|i| metric[i][p]).collect();
            let positive = m[0].re > 0.0 && (n == 1 || (m[0] * m[3] - m[1] * m[2]).re > 0.0);
            match invert_small(&m, n) {
                Some((inv, d)) if positive => {
                    det[p] = d.re;
                    for a in 0..n {
                        for b in 0..n {
                            // g^{ab̄} = (G^{-1})_{ba}.
                            inverse[a * n + b][p] = inv[b * n + a];
                        }
                    }
                }
                _ => offenders.push(p),
            }
        }
        if !offenders.is_empty() {
            return Err(Error::NotPositive {
                count: offenders.len(),
                first: offenders.into_iter().take(8).collect(),
            });
        }
        Ok(Self {
            n,
            grid,
            areas,
            potential,
            metric,
            inverse,
            det,
            curvature: OnceLock::new(),
        })
    }

    pub fn from_modes(
        n: usize,
        grid_size: usize,
        areas: Vec<Rational>,
        modes: &[FourierMode],
    ) -> Result<Self> {
        let grid = SpectralGrid::new(2 * n, grid_size);
        let potential = sample_modes(&grid, modes);
        Self::new(n, grid_size, areas, potential)
    }

    /// Random admissible potential whose `∂∂̄φ` is at most `fraction` of the
    /// smallest reference eigenvalue in sup-norm.
    pub fn random<R: Rng>(
        n: usize,
        grid_size: usize,
        areas: Vec<Rational>,
        fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let grid = SpectralGrid::new(2 * n, grid_size);
        let modes = random_modes(2 * n, rng);
        let raw = sample_modes(&grid, &modes);
        let phi: Vec<Complex64> = raw.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut sup: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                sup = grid
                    .d_mixed(&phi, a, b)
                    .iter()
                    .fold(sup, |m, v| m.max(v.norm()));
            }
        }
        let g0_min = areas
            .iter()
            .map(|a| a.to_f64().unwrap_or(f64::NAN) / 2.0)
            .fold(f64::INFINITY, f64::min);
        let scale = if sup > 0.0 {
            fraction * g0_min / sup
        } else {
            0.0
        };
        let potential = raw.iter().map(|v| v * scale).collect();
        Self::new(n, grid_size, areas, potential)
    }

    pub fn grid_size(&self) -> usize {
        self.grid.n
    }

    pub fn metric_at(&self, a: usize, b: usize) -> &[Complex64] {
        &self.metric[a * self.n + b]
    }

    pub fn inverse_at(&self, a: usize, b: usize) -> &[Complex64] {
        &self.inverse[a * self.n + b]
    }

    /// The metric as the scalar (1,1)-tensor `g_{ab̄} dz^a ⊗ dz̄^b`.
    pub fn metric_tensor(&self) -> TensorField {
        let mut t = TensorField::zero(self.n, self.npts(), EndoShape::Scalar);
        for a in 0..self.n {
            for b in 0..self.n {
                t.add_component(
                    (1 << a, 1 << b),
                    self.metric_at(a, b),
                    Complex64::new(1.0, 0.0),
                );
            }
        }
        t
    }

    pub fn derivative(&self, f: &[Complex64], a: usize, bar: bool) -> Vec<Complex64> {
        self.grid.d_complex(f, a, bar)
    }

    fn compute_curvature(&self) -> TensorField {
        let n = self.n;
        let npts = self.npts();
        // Γ^α_{εγ} = g^{αβ̄} ∂_ε g_{γβ̄}
        let mut dg = vec![Vec::new(); n * n * n];
        for e in 0..n {
            for g in 0..n {
                for b in 0..n {
                    dg[(e * n + g) * n + b] = self.grid.d_complex(self.metric_at(g, b), e, false);
                }
            }
        }
        let mut out = TensorField::zero(n, npts, EndoShape::Tangent);
        for e in 0..n {
            for d in 0..n {
                let mut values = Vec::with_capacity(n * n * npts);
                for alpha in 0..n {
                    for gamma in 0..n {
                        let mut christoffel = vec![ZERO; npts];
                        for b in 0..n {
                            let inv = self.inverse_at(alpha, b);
                            let dgb = &dg[(e * n + gamma) * n + b];
                            for p in 0..npts {
                                christoffel[p] += inv[p] * dgb[p];
                            }
                        }
                        let r = self.grid.d_complex(&christoffel, d, true);
                        values.extend(r.into_iter().map(|v| -v));
                    }
                }
                out.add_component((1 << e, 1 << d), &values, Complex64::new(1.0, 0.0));
            }
        }
        out
    }
}

impl GeometryBackend for TorusGeometry {
    fn dimension(&self) -> usize {
        self.n
    }

    fn npts(&self) -> usize {
        self.grid.npts()
    }

    fn topology(&self) -> ModelTopology {
        ModelTopology::torus(self.areas.clone())
    }

    fn kahler_form(&self) -> TensorField {
        self.metric_tensor().scale(Complex64::new(0.0, 1.0))
    }

    fn curvature(&self) -> &TensorField {
        self.curvature.get_or_init(|| self.compute_curvature())
    }

    fn laplacian(&self, f: &[Complex64]) -> Vec<Complex64> {
        let npts = self.npts();
        let mut out = vec![ZERO; npts];
        for a in 0..self.n {
            for b in 0..self.n {
                let d = self.grid.d_mixed(f, a, b);
                let inv = self.inverse_at(a, b);
                for p in 0..npts {
                    out[p] += inv[p] * d[p];
                }
            }
        }
        out
    }

    fn flat_map(&self, a: &TensorField) -> Result<TensorField> {
        if a.shape != EndoShape::Tangent || a.dim != self.n || a.npts != self.npts() {
            return Err(Error::Shape(
                "flat_map expects an End(TX)-valued function".into(),
            ));
        }
        let n = self.n;
        let npts = self.npts();
        let mut t = TensorField::zero(n, npts, EndoShape::Scalar);
        for beta in 0..n {
            for eps in 0..n {
                // T_{βε̄} = g_{αε̄} A^α_β
                let mut v = vec![ZERO; npts];
                for alpha in 0..n {
                    let entry = a.entry((0, 0), alpha, beta);
                    let g = self.metric_at(alpha, eps);
                    for p in 0..npts {
                        v[p] += g[p] * entry[p];
                    }
                }
                t.add_component((1 << beta, 1 << eps), &v, Complex64::new(1.0, 0.0));
            }
        }
        Ok(t)
    }

    fn d_star_dbar_star(&self, t: &TensorField) -> Result<Vec<Complex64>> {
        if t.dim != self.n || t.npts != self.npts() || t.shape != EndoShape::Scalar {
            return Err(Error::Shape("d*∂̄* expects a scalar (1,1) tensor".into()));
        }
        let n = self.n;
        let npts = self.npts();
        let mut acc = vec![ZERO; npts];
        for alpha in 0..n {
            for gamma in 0..n {
                // W^{αγ̄} = g^{αε̄} T_{βε̄} g^{βγ̄} det g
                let mut w = vec![ZERO; npts];
                for beta in 0..n {
                    for eps in 0..n {
                        let tv = t.entry((1 << beta, 1 << eps), 0, 0);
                        let g1 = self.inverse_at(alpha, eps);
                        let g2 = self.inverse_at(beta, gamma);
                        for p in 0..npts {
                            w[p] += g1[p] * tv[p] * g2[p] * self.det[p];
                        }
                    }
                }
                let d = self.grid.d_mixed(&w, alpha, gamma);
                for p in 0..npts {
                    acc[p] += d[p];
                }
            }
        }
        Ok(acc.iter().zip(&self.det).map(|(v, d)| v / d).collect())
    }

    fn integrate(&self, f: &[Complex64]) -> Complex64 {
        let n = self.n;
        let factor = (1..=n).product::<usize>() as f64 * 2f64.powi(n as i32);
        let sum: Complex64 = f.iter().zip(&self.det).map(|(v, d)| v * d).sum();
        sum * factor / self.npts() as f64
    }

    /// Trapezoid rule on the top coefficient, independent of `ωⁿ`.
    fn integrate_top(&self, t: &TensorField) -> Complex64 {
        let top = t.trace().top_coefficient();
        self.grid.mean(&top) * top_monomial_factor(self.n)
    }

    fn hamiltonian_for_rotation(&self) -> Result<HamiltonianAction> {
        Err(no_action("torus"))
    }

    fn coordinates(&self) -> Vec<Vec<f64>> {
        (0..self.npts()).map(|p| self.grid.coords(p)).collect()
    }

    fn pair_tensors(&self, t: &TensorField, s: &TensorField) -> Result<Complex64> {
        let n = self.n;
        let npts = self.npts();
        let mut f = vec![ZERO; npts];
        for alpha in 0..n {
            for beta in 0..n {
                for eps in 0..n {
                    for gamma in 0..n {
                        let tv = t.entry((1 << beta, 1 << eps), 0, 0);
                        let sv = s.entry((1 << alpha, 1 << gamma), 0, 0);
                        let g1 = self.inverse_at(alpha, eps);
                        let g2 = self.inverse_at(beta, gamma);
                        for p in 0..npts {
                            f[p] += g1[p] * g2[p] * tv[p] * sv[p];
                        }
                    }
                }
            }
        }
        Ok(self.integrate(&f))
    }
}
