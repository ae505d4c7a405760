//! Product families `Δ × CP¹ → Δ` with a diagonal circle action.
//!
//! The relatively Kähler form is `ω = ω_round + i∂∂̄Φ` with
//! `Φ = ε β(s) p(x₀)`, `s = |b|²`, `β(s) = e^{−κ s}` and `x₀` the round
//! moment coordinate on the fibre. Writing `w = t + iθ` for the fibre
//! coordinate (`∂_t = ψ₀ ∂_{x₀}`, `ψ₀ = 1 − x₀²`), the metric at a real base
//! point `b = r` is
//!
//! ```text
//! g_bb̄ = ε p (β' + s β''),  g_bw̄ = ½ r ε β' ψ₀ p',  g_ww̄ = ψ₀ G,
//! G = ½ + ¼ ε β (ψ₀ p')'.
//! ```
//!
//! The lifted Hamiltonian is `h = x₀ + ½ Φ_t + s Φ_s`. On the base,
//! `ι_v(i Ω_bb̄ db ∧ db̄) = −Ω_bb̄ ds` for the rotation `v`, so the moment map
//! identity reads `dσ/ds = Ω_bb̄`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{extrapolated_derivative, order_text, FdEstimate, VerificationReport};
use crate::charge::{average_scalar, CentralChargeSpec, ModelTopology};
use crate::error::{Error, Result};
use crate::kgeom::{ChebyshevGrid, Cp1Geometry};
use crate::zkahler::{csck_normalization, z_tilde_manifold};

#[derive(Clone, Debug)]
pub struct ProductFamily {
    pub grid: ChebyshevGrid,
    pub epsilon: f64,
    pub decay: f64,
    /// Monomial coefficients of `p(x₀)`.
    pub profile: Vec<f64>,
}

/// Fibre data at one base point, sampled at the `x₀` nodes.
#[derive(Clone, Debug)]
pub struct FamilySample {
    pub s: f64,
    pub g: Vec<f64>,
    pub g_bb: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    /// `∫_{X/B} ω²` as a multiple of `i db ∧ db̄`.
    pub area: f64,
    /// `∫_{X/B} ρ ∧ ω` as a multiple of `i db ∧ db̄`.
    pub ricci: f64,
    pub fibre_scalar: Vec<f64>,
}

fn poly(coeffs: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
    for c in coeffs.iter().rev() {
        ddp = ddp * x + 2.0 * dp;
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp, ddp)
}

impl ProductFamily {
    pub fn new(nodes: usize, epsilon: f64, decay: f64, profile: Vec<f64>) -> Result<Self> {
        if decay < 0.0 {
            return Err(Error::Invalid("decay must be non-negative".into()));
        }
        let family = Self {
            grid: ChebyshevGrid::new(nodes),
            epsilon,
            decay,
            profile,
        };
        // G is affine in β ∈ (0, 1], so positivity at β = 1 suffices.
        let bad: Vec<usize> = family
            .grid
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, &x)| family.g_at(x, 1.0) <= 0.0)
            .map(|(j, _)| j)
            .collect();
        if !bad.is_empty() {
            return Err(Error::NotPositive {
                count: bad.len(),
                first: bad.into_iter().take(8).collect(),
            });
        }
        Ok(family)
    }

    /// `Φ = 0`: the round metric on every fibre.
    pub fn isotrivial(nodes: usize) -> Self {
        Self::new(nodes, 0.0, 1.0, vec![0.0]).expect("round family is positive")
    }

    fn beta(&self, s: f64) -> (f64, f64, f64) {
        let b = (-self.decay * s).exp();
        (b, -self.decay * b, self.decay * self.decay * b)
    }

    /// `(ψ₀ p')' = −2x p' + ψ₀ p''`.
    fn p2_at(&self, x: f64) -> f64 {
        let (_, dp, ddp) = poly(&self.profile, x);
        -2.0 * x * dp + (1.0 - x * x) * ddp
    }

    fn g_at(&self, x: f64, beta: f64) -> f64 {
        0.5 + 0.25 * self.epsilon * beta * self.p2_at(x)
    }

    /// Fibre moment coordinate `x_b = x₀ + ½ εβ ψ₀ p'`.
    fn moment_coordinate(&self, x: f64, beta: f64) -> f64 {
        let (_, dp, _) = poly(&self.profile, x);
        x + 0.5 * self.epsilon * beta * (1.0 - x * x) * dp
    }

    fn hamiltonian_at(&self, x: f64, s: f64, with_base_term: bool) -> f64 {
        let (b, b1, _) = self.beta(s);
        let (p, _, _) = poly(&self.profile, x);
        let base = if with_base_term {
            s * self.epsilon * b1 * p
        } else {
            0.0
        };
        self.moment_coordinate(x, b) + base
    }

    pub fn sample(&self, s: f64) -> FamilySample {
        self.sample_with(s, true)
    }

    fn sample_with(&self, s: f64, with_base_term: bool) -> FamilySample {
        let eps = self.epsilon;
        let (b, b1, b2) = self.beta(s);
        let nodes = &self.grid.nodes;
        let d = |f: &[f64]| self.grid.derivative(f);
        let mut p = Vec::new();
        let mut dp = Vec::new();
        let mut p2 = Vec::new();
        for &x in nodes {
            let (v, dv, _) = poly(&self.profile, x);
            p.push(v);
            dp.push(dv);
            p2.push(self.p2_at(x));
        }
        let psi0: Vec<f64> = nodes.iter().map(|x| 1.0 - x * x).collect();
        let g: Vec<f64> = p2.iter().map(|q| 0.5 + 0.25 * eps * b * q).collect();
        let gs: Vec<f64> = p2.iter().map(|q| 0.25 * eps * b1 * q).collect();
        let gss: Vec<f64> = p2.iter().map(|q| 0.25 * eps * b2 * q).collect();
        let g_bb: Vec<f64> = p.iter().map(|v| eps * v * (b1 + s * b2)).collect();
        let m1: Vec<f64> = dp.iter().map(|v| 0.5 * eps * b1 * v).collect();

        let gx = d(&g);
        let flux: Vec<f64> = (0..nodes.len()).map(|j| psi0[j] * gx[j] / g[j]).collect();
        let flux_x = d(&flux);
        let ratio_s: Vec<f64> = (0..nodes.len()).map(|j| gs[j] / g[j]).collect();
        let ratio_sx = d(&ratio_s);

        let mut area = Vec::with_capacity(nodes.len());
        let mut ricci = Vec::with_capacity(nodes.len());
        let mut fibre_scalar = Vec::with_capacity(nodes.len());
        let mut hamiltonian = Vec::with_capacity(nodes.len());
        for j in 0..nodes.len() {
            area.push(2.0 * (g_bb[j] * g[j] - s * psi0[j] * m1[j] * m1[j]));
            let hess_bb = gs[j] / g[j] + s * (gss[j] / g[j] - (gs[j] / g[j]).powi(2));
            let m_bb = -hess_bb / (2.0 * PI);
            let m_ww_over_psi = -0.25 * (-2.0 + flux_x[j]) / (2.0 * PI);
            let n1 = -0.5 * ratio_sx[j] / (2.0 * PI);
            ricci.push(m_bb * g[j] + m_ww_over_psi * g_bb[j] - 2.0 * s * psi0[j] * m1[j] * n1);
            fibre_scalar.push(-(-2.0 + flux_x[j]) / (8.0 * PI * g[j]));
            hamiltonian.push(self.hamiltonian_at(nodes[j], s, with_base_term));
        }
        FamilySample {
            s,
            area: 4.0 * PI * self.grid.integrate(&area),
            ricci: 4.0 * PI * self.grid.integrate(&ricci),
            g,
            g_bb,
            hamiltonian,
            fibre_scalar,
        }
    }

    /// `σ(s) = ∫ h (Ŝ − S_b) ω_b` computed on the `x₀` nodes.
    pub fn sigma_csck(&self, s: f64) -> f64 {
        self.sigma_csck_with(s, true)
    }

    fn sigma_csck_with(&self, s: f64, with_base_term: bool) -> f64 {
        let sample = self.sample_with(s, with_base_term);
        let s_hat = average_scalar(&ModelTopology::symplectic_cp1()).expect("CP¹ topology");
        let f: Vec<f64> = (0..sample.g.len())
            .map(|j| sample.hamiltonian[j] * (s_hat - sample.fibre_scalar[j]) * sample.g[j])
            .collect();
        4.0 * PI * self.grid.integrate(&f)
    }

    /// Weil–Petersson coefficient `Ω_bb̄ = (Ŝ/2) ∫ω² − ∫ρ∧ω`.
    pub fn omega_csck(&self, s: f64) -> f64 {
        let sample = self.sample(s);
        let s_hat = average_scalar(&ModelTopology::symplectic_cp1()).expect("CP¹ topology");
        0.5 * s_hat * sample.area - sample.ricci
    }

    /// Fibre over `b` as a CP¹ profile on its own moment coordinate, with
    /// `x₀(x_b)` found by Newton iteration.
    pub fn fibre(&self, s: f64) -> Result<(Cp1Geometry, Vec<f64>)> {
        let (b, _, _) = self.beta(s);
        let grid = ChebyshevGrid::new(self.grid.len());
        let mut q = Vec::with_capacity(grid.len());
        let mut x0s = Vec::with_capacity(grid.len());
        for &xb in &grid.nodes {
            let mut x = xb;
            for _ in 0..60 {
                let f = self.moment_coordinate(x, b) - xb;
                let step = f / (2.0 * self.g_at(x, b));
                x = (x - step).clamp(-1.0, 1.0);
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let denom = 1.0 - xb * xb;
            let psi_b = 2.0 * (1.0 - x * x) * self.g_at(x, b);
            q.push(if denom < 1e-14 { 1.0 } else { psi_b / denom });
            x0s.push(x);
        }
        Ok((Cp1Geometry::from_profile(grid, q)?, x0s))
    }

    /// `σ_Z(s) = ∫ h Im(e^{−iφ} Z̃) ω_b` through the general Kähler pipeline.
    pub fn sigma_z(&self, s: f64, spec: &CentralChargeSpec) -> Result<f64> {
        self.sigma_z_with(s, spec, true)
    }

    fn sigma_z_with(&self, s: f64, spec: &CentralChargeSpec, with_base_term: bool) -> Result<f64> {
        let (fibre, x0s) = self.fibre(s)?;
        let eval = z_tilde_manifold(&fibre, spec)?;
        let f: Vec<f64> = x0s
            .iter()
            .zip(&eval.residual)
            .map(|(x, r)| self.hamiltonian_at(*x, s, with_base_term) * r)
            .collect();
        Ok(fibre.integrate_real(&f))
    }

    /// `Ω_Z = Im(e^{−iφ} η_Z)` with `η` the fibre integral of
    /// `ω^{j+1}/(j+1) ∧ Π ch̃_k` for each term.
    pub fn omega_z(&self, s: f64, spec: &CentralChargeSpec) -> Result<f64> {
        if spec.dimension != 1 {
            return Err(Error::DegreeMismatch(
                "product families have 1-dimensional fibres".into(),
            ));
        }
        let sample = self.sample(s);
        let (fibre, _) = self.fibre(s)?;
        let phi = z_tilde_manifold(&fibre, spec)?.phase_used;
        let mut eta = Complex64::new(0.0, 0.0);
        for term in spec.manifold_terms()? {
            let value = match (term.alpha_power, term.chern_multi_index.as_slice()) {
                (1, []) => 0.5 * sample.area,
                (0, [1]) => sample.ricci,
                _ => {
                    return Err(Error::DegreeMismatch(
                        "unsupported term on a CP¹ fibre".into(),
                    ))
                }
            };
            eta += term.coefficient.value() * value;
        }
        Ok((Complex64::from_polar(1.0, -phi) * eta).im)
    }

    /// Largest violation of `∂_A h = g_{AB̄} (b̄, 1)^B` over the nodes at `s`,
    /// with `∂_s` by central differences.
    pub fn hamiltonian_self_check(&self, s: f64) -> f64 {
        let eps = self.epsilon;
        let (_, b1, _) = self.beta(s);
        let h = 1e-4;
        let sample = self.sample(s);
        let up = self.sample(s + h);
        let dn = self.sample(s - h);
        let hx = self.grid.derivative(&sample.hamiltonian);
        let mut worst = 0.0f64;
        for (j, &x) in self.grid.nodes.iter().enumerate() {
            let (_, dp, _) = poly(&self.profile, x);
            let psi0 = 1.0 - x * x;
            let hs = (up.hamiltonian[j] - dn.hamiltonian[j]) / (2.0 * h);
            let e1 = hs - (sample.g_bb[j] + 0.5 * eps * b1 * psi0 * dp);
            let e2 = 0.5 * psi0 * hx[j] - (0.5 * s * eps * b1 * psi0 * dp + psi0 * sample.g[j]);
            worst = worst.max(e1.abs()).max(e2.abs());
        }
        worst
    }
}

fn relative_mismatch(derivs: &[FdEstimate], omegas: &[f64]) -> (f64, f64) {
    let scale = omegas.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diffs: Vec<f64> = derivs
        .iter()
        .zip(omegas)
        .map(|(d, o)| (d.value - o).abs())
        .collect();
    let sup = diffs.iter().cloned().fold(0.0, f64::max);
    let l2 = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len().max(1) as f64).sqrt();
    if scale == 0.0 {
        (sup, l2)
    } else {
        (sup / scale, l2 / scale)
    }
}

/// `d⟨σ_Z, v⟩ + ι_v Ω_Z = 0` at the base points `samples` (values of `s`).
/// With `corrupt` the base-rotation term `s Φ_s` is dropped from `h`.
pub fn check_family_moment_map(
    family: &ProductFamily,
    spec: &CentralChargeSpec,
    samples: &[f64],
    step: f64,
    corrupt: bool,
    tolerance: f64,
) -> Result<VerificationReport> {
    let mut derivs = Vec::with_capacity(samples.len());
    let mut omegas = Vec::with_capacity(samples.len());
    let mut self_check = 0.0f64;
    for &s in samples {
        if s - step <= 0.0 {
            return Err(Error::Invalid(format!(
                "base sample {s} too close to the origin"
            )));
        }
        derivs.push(extrapolated_derivative(
            |t| family.sigma_z_with(t, spec, !corrupt),
            s,
            step,
        )?);
        omegas.push(family.omega_z(s, spec)?);
        self_check = self_check.max(family.hamiltonian_self_check(s));
    }
    let (sup, l2) = relative_mismatch(&derivs, &omegas);
    let scale = omegas.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let report = VerificationReport::new(
        format!("family moment map ({}, disc x CP1)", spec.name),
        "d<sigma_Z,v> + iota_v Omega_Z = 0",
        sup,
        l2,
        tolerance,
    )
    .with("base_samples", samples.len())
    .with("fd_step", step)
    .with("observed_order", order_text(&derivs))
    .with("omega_scale", scale)
    .with("epsilon", family.epsilon)
    .with("fibre_nodes", family.grid.len())
    .with("hamiltonian_self_check", self_check);
    Ok(if corrupt { report.as_control() } else { report })
}

/// The cscK charge through the general pipeline against the direct
/// Weil–Petersson formulas: `σ_Z = c σ` and `Ω_Z = c Ω` with `c` the cscK
/// normalization of the fibre.
pub fn check_family_csck_paths(
    family: &ProductFamily,
    samples: &[f64],
    tolerance: f64,
) -> Result<VerificationReport> {
    let spec = crate::charge::builtin_charge("csck", 1)?;
    let mut worst = 0.0f64;
    let mut sq = 0.0;
    for &s in samples {
        let (fibre, _) = family.fibre(s)?;
        let c = csck_normalization(&fibre)?;
        let pairs = [
            (family.sigma_z(s, &spec)?, c * family.sigma_csck(s)),
            (family.omega_z(s, &spec)?, c * family.omega_csck(s)),
        ];
        for (a, b) in pairs {
            let err = (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
            worst = worst.max(err);
            sq += err * err;
        }
    }
    let l2 = (sq / (2 * samples.len()).max(1) as f64).sqrt();
    Ok(VerificationReport::new(
        "family cscK: general pipeline vs Weil-Petersson",
        "sigma_Z = c sigma, Omega_Z = c Omega",
        worst,
        l2,
        tolerance,
    )
    .with("base_samples", samples.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::builtin_charge;

    fn family() -> ProductFamily {
        ProductFamily::new(64, 0.3, 1.5, vec![0.0, 0.2, 1.0, 0.3]).unwrap()
    }

    #[test]
    fn polynomial_derivatives() {
        let (p, dp, ddp) = poly(&[1.0, 2.0, 3.0, 4.0], 0.5);
        assert!((p - (1.0 + 1.0 + 0.75 + 0.5)).abs() < 1e-15);
        assert!((dp - (2.0 + 3.0 + 3.0)).abs() < 1e-15);
        assert!((ddp - (6.0 + 12.0)).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_is_a_moment_map_on_the_total_space() {
        let f = family();
        for s in [0.2, 0.7] {
            assert!(f.hamiltonian_self_check(s) < 1e-7);
        }
    }

    #[test]
    fn isotrivial_family_is_trivially_balanced() {
        let f = ProductFamily::isotrivial(32);
        assert!(f.omega_csck(0.4).abs() < 1e-14);
        assert!(f.sigma_csck(0.4).abs() < 1e-12);
        let spec = builtin_charge("csck", 1).unwrap();
        let r = check_family_moment_map(&f, &spec, &[0.3, 0.6], 0.05, false, 1e-5).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn csck_identity_and_control() {
        let f = family();
        let spec = builtin_charge("csck", 1).unwrap();
        let samples = [0.2, 0.5, 0.8];
        let r = check_family_moment_map(&f, &spec, &samples, 0.02, false, 1e-5).unwrap();
        assert!(r.pass, "{r:?}");
        let c = check_family_moment_map(&f, &spec, &samples, 0.02, true, 1e-5).unwrap();
        assert!(c.succeeded() && c.sup > 1e-2, "{c:?}");
        let paths = check_family_csck_paths(&f, &samples, 1e-6).unwrap();
        assert!(paths.pass, "{paths:?}");
    }
}
