//! Circle-invariant Kähler metrics on CP¹ in action-angle coordinates
//! `(x, θ) ∈ [−1, 1] × [0, 2π)`, with `ω = dx ∧ dθ` fixed and the complex
//! structure encoded by a symplectic potential `u = u₀ + c`, where
//! `u₀ = ½((1+x)log(1+x) + (1−x)log(1−x))` is the round reference.
//!
//! The metric is `u'' dx² + ψ dθ²` with `ψ = 1/u'' = (1−x²) q` and
//! `q = 1/(1 + (1−x²) c'')`. Forms are expressed in the unitary coframe
//! `ε = √u'' dx + i √ψ dθ`, for which `ω = (i/2) ε ∧ ε̄`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use super::backend::{GeometryBackend, HamiltonianAction};
use super::forms::{EndoShape, TensorField};
use super::lobatto::ChebyshevGrid;
use crate::charge::{ModelTopology, Rational};
use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 64;

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

#[derive(Debug)]
pub struct Cp1Geometry {
    pub grid: ChebyshevGrid,
    /// Correction `c(x)` to the round symplectic potential.
    pub correction: Vec<f64>,
    pub q: Vec<f64>,
    pub psi: Vec<f64>,
    curvature: OnceLock<TensorField>,
}

impl Clone for Cp1Geometry {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            correction: self.correction.clone(),
            q: self.q.clone(),
            psi: self.psi.clone(),
            curvature: OnceLock::new(),
        }
    }
}

/// `Σ_m a_m T_m(x)`, a smooth correction given by Chebyshev coefficients.
pub fn chebyshev_series(coeffs: &[f64], x: f64) -> f64 {
    let t = x.clamp(-1.0, 1.0).acos();
    coeffs
        .iter()
        .enumerate()
        .map(|(m, a)| a * (m as f64 * t).cos())
        .sum()
}

impl Cp1Geometry {
    pub fn round(nodes: usize) -> Self {
        Self::from_correction_samples(ChebyshevGrid::new(nodes), vec![0.0; nodes])
            .expect("round metric is positive")
    }

    /// Metric with potential `u₀ + c`, `c` sampled at the Lobatto nodes.
    pub fn from_correction_samples(grid: ChebyshevGrid, correction: Vec<f64>) -> Result<Self> {
        if correction.len() != grid.len() {
            return Err(Error::Shape(format!(
                "correction has {} samples, grid has {} nodes",
                correction.len(),
                grid.len()
            )));
        }
        let c2 = grid.derivative(&grid.derivative(&correction));
        let mut q = Vec::with_capacity(grid.len());
        let mut offenders = Vec::new();
        for (j, (&x, &d2)) in grid.nodes.iter().zip(&c2).enumerate() {
            let s = 1.0 - x * x;
            let denom = 1.0 + s * d2;
            if denom <= 0.0 {
                offenders.push(j);
            }
            q.push(1.0 / denom);
        }
        if !offenders.is_empty() {
            return Err(Error::NotPositive {
                count: offenders.len(),
                first: offenders.into_iter().take(8).collect(),
            });
        }
        let psi = grid
            .nodes
            .iter()
            .zip(&q)
            .map(|(x, q)| (1.0 - x * x) * q)
            .collect();
        Ok(Self {
            grid,
            correction,
            q,
            psi,
            curvature: OnceLock::new(),
        })
    }

    /// Metric given directly by `q = ψ / (1 − x²)` at the nodes. The
    /// correction is left empty, so the Abreu path falls back to `ψ`.
    pub fn from_profile(grid: ChebyshevGrid, q: Vec<f64>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::Shape(format!(
                "profile has {} samples, grid has {} nodes",
                q.len(),
                grid.len()
            )));
        }
        let offenders: Vec<usize> = q
            .iter()
            .enumerate()
            .filter(|(_, v)| **v <= 0.0)
            .map(|(j, _)| j)
            .collect();
        if !offenders.is_empty() {
            return Err(Error::NotPositive {
                count: offenders.len(),
                first: offenders.into_iter().take(8).collect(),
            });
        }
        let psi = grid
            .nodes
            .iter()
            .zip(&q)
            .map(|(x, q)| (1.0 - x * x) * q)
            .collect();
        Ok(Self {
            grid,
            correction: Vec::new(),
            q,
            psi,
            curvature: OnceLock::new(),
        })
    }

    pub fn from_chebyshev(nodes: usize, coeffs: &[f64]) -> Result<Self> {
        let grid = ChebyshevGrid::new(nodes);
        let correction = grid
            .nodes
            .iter()
            .map(|&x| chebyshev_series(coeffs, x))
            .collect();
        Self::from_correction_samples(grid, correction)
    }

    /// Random smooth correction `Σ_{m=2}^{5} a_m T_m` with `|(1−x²)c''|`
    /// at most `fraction` on the grid.
    pub fn random<R: Rng>(nodes: usize, fraction: f64, rng: &mut R) -> Result<Self> {
        let grid = ChebyshevGrid::new(nodes);
        let mut coeffs = vec![0.0; 6];
        for a in coeffs.iter_mut().skip(2) {
            *a = rng.gen_range(-1.0..1.0);
        }
        let raw: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&x| chebyshev_series(&coeffs, x))
            .collect();
        let c2 = grid.derivative(&grid.derivative(&raw));
        let sup = grid
            .nodes
            .iter()
            .zip(&c2)
            .map(|(x, d)| ((1.0 - x * x) * d).abs())
            .fold(0.0, f64::max);
        let scale = if sup > 0.0 { fraction / sup } else { 0.0 };
        Self::from_correction_samples(grid, raw.iter().map(|v| v * scale).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes
    }

    /// `u''` at the interior nodes (infinite at the poles).
    pub fn u_second(&self) -> Vec<f64> {
        self.psi.iter().map(|p| 1.0 / p).collect()
    }

    /// `ψ''` assembled from `q`: `ψ' = −2x q + (1−x²) q'`.
    pub fn psi_second(&self) -> Vec<f64> {
        let dq = self.grid.derivative(&self.q);
        let dpsi: Vec<f64> = self
            .grid
            .nodes
            .iter()
            .zip(self.q.iter().zip(&dq))
            .map(|(x, (q, dq))| -2.0 * x * q + (1.0 - x * x) * dq)
            .collect();
        self.grid.derivative(&dpsi)
    }

    /// Abreu's formula `S = −(1/4π) (1/u'')''`, differentiating `1/u''`
    /// rebuilt from the potential rather than from `q`.
    pub fn scalar_curvature_abreu(&self) -> Vec<f64> {
        if self.correction.is_empty() {
            return self
                .grid
                .derivative(&self.grid.derivative(&self.psi))
                .iter()
                .map(|v| -v / (4.0 * PI))
                .collect();
        }
        let c2 = self
            .grid
            .derivative(&self.grid.derivative(&self.correction));
        let inv_u2: Vec<f64> = self
            .grid
            .nodes
            .iter()
            .zip(&c2)
            .map(|(&x, &d2)| {
                let s = 1.0 - x * x;
                if s == 0.0 {
                    0.0
                } else {
                    1.0 / (1.0 / s + d2)
                }
            })
            .collect();
        self.grid
            .derivative(&self.grid.derivative(&inv_u2))
            .iter()
            .map(|v| -v / (4.0 * PI))
            .collect()
    }

    /// `Δf = ½ (ψ f')'` for invariant functions.
    pub fn laplacian_real(&self, f: &[f64]) -> Vec<f64> {
        let df = self.grid.derivative(f);
        let flux: Vec<f64> = self.psi.iter().zip(&df).map(|(p, d)| p * d).collect();
        self.grid
            .derivative(&flux)
            .iter()
            .map(|v| 0.5 * v)
            .collect()
    }

    /// `∫ f ω = 2π ∫ f dx`.
    pub fn integrate_real(&self, f: &[f64]) -> f64 {
        2.0 * PI * self.grid.integrate(f)
    }

    /// Real part of the derivative in `x` of an invariant complex field.
    pub fn dx(&self, f: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = f.iter().map(|v| v.re).collect();
        let im: Vec<f64> = f.iter().map(|v| v.im).collect();
        self.grid
            .derivative(&re)
            .into_iter()
            .zip(self.grid.derivative(&im))
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    /// Coefficient `R_c` of `R = R_c ε ∧ ε̄`.
    pub fn curvature_coefficient(&self) -> Vec<Complex64> {
        self.curvature().entry((1, 1), 0, 0)
    }

    /// `dx`-coefficient of `ι_{∂θ} R`: with `ε ∧ ε̄ = −2i dx ∧ dθ` and
    /// `ι_{∂θ}(dx ∧ dθ) = −dx` this is `2i R_c`.
    pub fn contracted_curvature(&self) -> Vec<Complex64> {
        self.curvature_coefficient()
            .iter()
            .map(|r| Complex64::new(0.0, 2.0) * r)
            .collect()
    }
}

impl GeometryBackend for Cp1Geometry {
    fn dimension(&self) -> usize {
        1
    }

    fn npts(&self) -> usize {
        self.grid.len()
    }

    fn topology(&self) -> ModelTopology {
        ModelTopology::symplectic_cp1()
    }

    fn kahler_form(&self) -> TensorField {
        TensorField::monomial(1, (1, 1), vec![Complex64::new(0.0, 0.5); self.npts()])
    }

    fn curvature(&self) -> &TensorField {
        self.curvature.get_or_init(|| {
            let psi2 = self.psi_second();
            let mut r = TensorField::zero(1, self.npts(), EndoShape::Tangent);
            let values: Vec<Complex64> = psi2.iter().map(|v| c(-v / 4.0)).collect();
            r.add_component((1, 1), &values, c(1.0));
            r
        })
    }

    fn laplacian(&self, f: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = f.iter().map(|v| v.re).collect();
        let im: Vec<f64> = f.iter().map(|v| v.im).collect();
        self.laplacian_real(&re)
            .into_iter()
            .zip(self.laplacian_real(&im))
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    fn flat_map(&self, a: &TensorField) -> Result<TensorField> {
        if a.shape != EndoShape::Tangent || a.dim != 1 || a.npts != self.npts() {
            return Err(Error::Shape(
                "flat_map expects an End(TX)-valued function".into(),
            ));
        }
        Ok(TensorField::monomial(
            1,
            (1, 1),
            a.entry((0, 0), 0, 0).iter().map(|v| v * 0.5).collect(),
        ))
    }

    fn d_star_dbar_star(&self, t: &TensorField) -> Result<Vec<Complex64>> {
        if t.shape != EndoShape::Scalar || t.dim != 1 || t.npts != self.npts() {
            return Err(Error::Shape("d*∂̄* expects a scalar (1,1) tensor".into()));
        }
        // In one dimension `g⁻¹ T g⁻¹ V = T / g` and the operator reduces to
        // the Laplacian of `T / g` with `g = ½` in the unitary frame.
        let f: Vec<Complex64> = t.entry((1, 1), 0, 0).iter().map(|v| v * 2.0).collect();
        Ok(self.laplacian(&f))
    }

    fn integrate(&self, f: &[Complex64]) -> Complex64 {
        let re: Vec<f64> = f.iter().map(|v| v.re).collect();
        let im: Vec<f64> = f.iter().map(|v| v.im).collect();
        Complex64::new(self.integrate_real(&re), self.integrate_real(&im))
    }

    fn hamiltonian_for_rotation(&self) -> Result<HamiltonianAction> {
        // ω = dx ∧ dθ, v = ∂θ: ι_v ω = −dx, so h = x; ∫ x dx = 0.
        let h = self.grid.nodes.clone();
        let dh = self.grid.derivative(&h);
        let self_check = dh.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
        let mean = self.integrate_real(&h) / (4.0 * PI);
        Ok(HamiltonianAction {
            generator: "rotation".into(),
            vector_field: vec![vec![0.0; self.npts()], vec![1.0; self.npts()]],
            hamiltonian: h.iter().map(|v| v - mean).collect(),
            self_check,
        })
    }

    fn coordinates(&self) -> Vec<Vec<f64>> {
        self.grid.nodes.iter().map(|&x| vec![x]).collect()
    }

    fn pair_tensors(&self, t: &TensorField, s: &TensorField) -> Result<Complex64> {
        let tv = t.entry((1, 1), 0, 0);
        let sv = s.entry((1, 1), 0, 0);
        let f: Vec<Complex64> = tv.iter().zip(&sv).map(|(a, b)| a * b * 4.0).collect();
        Ok(self.integrate(&f))
    }
}

/// CP¹ with `∫α = 4π` as an exact topology (area 1 times the scale `4π`).
pub fn cp1_topology() -> ModelTopology {
    ModelTopology::projective_line(Rational::from_integer(1), 4.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::average_scalar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_metric() {
        let g = Cp1Geometry::round(DEFAULT_NODES);
        for (x, u2) in g
            .nodes()
            .iter()
            .zip(g.u_second())
            .skip(1)
            .take(DEFAULT_NODES - 2)
        {
            assert!((u2 - 1.0 / (1.0 - x * x)).abs() < 1e-9 * u2);
        }
        let s_hat = average_scalar(&g.topology()).unwrap();
        for s in g.scalar_curvature() {
            assert!((s - s_hat).abs() < 1e-10);
        }
        for s in g.scalar_curvature_abreu() {
            assert!((s - s_hat).abs() < 1e-10);
        }
    }

    #[test]
    fn gauss_bonnet_and_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Cp1Geometry::random(DEFAULT_NODES, 0.3, &mut rng).unwrap();
        let ric = g.ricci_form();
        assert!((g.integrate_top(&ric).re - 2.0).abs() < 1e-10);
        assert!((g.integrate_top(&g.kahler_form()).re - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn two_scalar_curvature_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Cp1Geometry::random(DEFAULT_NODES, 0.4, &mut rng).unwrap();
        let a = g.scalar_curvature();
        let b = g.scalar_curvature_abreu();
        let err = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn laplacian_of_moment_coordinate() {
        let g = Cp1Geometry::round(32);
        let lap = g.laplacian_real(g.nodes());
        for (l, x) in lap.iter().zip(g.nodes()) {
            assert!((l + x).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_non_convex_potential() {
        // c = −x²: (1−x²)c'' = −2(1−x²) reaches −2 at the equator.
        let err = Cp1Geometry::from_chebyshev(16, &[-0.5, 0.0, -0.5]).unwrap_err();
        assert!(matches!(err, Error::NotPositive { .. }));
    }
}
