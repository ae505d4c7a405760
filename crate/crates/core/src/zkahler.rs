//! The Z-critical Kähler operator: for each charge term a Chern–Weil
//! function plus an adjoint correction, summed into `Z̃(X, ω)` and rotated
//! by the topological phase.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::charge::{
    average_scalar, evaluate_charge, phase, CentralChargeSpec, ChargeValue, ManifoldChargeTerm,
};
use crate::error::{Error, Result};
use crate::kgeom::{EndoShape, GeometryBackend, TensorField};

/// Forms shared by every term: powers of `ω`, the Chern–Weil forms and the
/// normalized curvature powers `(iR/2π)^k / k!`.
pub struct ChernWeilCache {
    pub dim: usize,
    pub omega_powers: Vec<TensorField>,
    pub ch: Vec<TensorField>,
    pub curvature_powers: Vec<TensorField>,
}

impl ChernWeilCache {
    pub fn new<G: GeometryBackend + ?Sized>(geom: &G) -> Self {
        let n = geom.dimension();
        let omega = geom.kahler_form();
        let omega_powers = (0..=n + 1)
            .map(|j| omega.power(j).expect("scalar forms"))
            .collect();
        let ir = geom
            .curvature()
            .scale(Complex64::new(0.0, 1.0 / (2.0 * PI)));
        let mut curvature_powers = vec![TensorField::identity(n, geom.npts(), EndoShape::Tangent)];
        for k in 1..=n {
            let next = curvature_powers[k - 1]
                .wedge(&ir)
                .expect("curvature powers")
                .scale(Complex64::new(1.0 / k as f64, 0.0));
            curvature_powers.push(next);
        }
        let ch = curvature_powers.iter().map(|p| p.trace()).collect();
        Self {
            dim: n,
            omega_powers,
            ch,
            curvature_powers,
        }
    }

    fn volume(&self) -> &TensorField {
        &self.omega_powers[self.dim]
    }

    /// `ω^j ∧ ch̃_{k_1} ∧ ⋯ ∧ ch̃_{k_r} / ωⁿ`.
    pub fn chern_weil_term(&self, term: &ManifoldChargeTerm) -> Result<Vec<Complex64>> {
        let mut form = self.omega_powers[term.alpha_power].clone();
        for &k in &term.chern_multi_index {
            form = form.wedge(&self.ch[k])?;
        }
        Ok(form.ratio_to(self.volume())?.values())
    }

    /// `ℓ̃_m`: the `m`-th Chern–Weil factor replaced by `(iR/2π)^{k_m−1}/(k_m−1)!`
    /// and one extra `ω`, divided by `(j+1) ωⁿ`.
    pub fn ell_endomorphism(&self, term: &ManifoldChargeTerm, m: usize) -> Result<TensorField> {
        let ks = &term.chern_multi_index;
        if m >= ks.len() {
            return Err(Error::Invalid(format!(
                "term has {} Chern factors, no factor {m}",
                ks.len()
            )));
        }
        let mut form = self.omega_powers[term.alpha_power + 1].clone();
        for (i, &k) in ks.iter().enumerate() {
            let factor = if i == m {
                &self.curvature_powers[k - 1]
            } else {
                &self.ch[k]
            };
            form = form.wedge(factor)?;
        }
        if form.shape == EndoShape::Scalar {
            // Only possible when the replaced factor is scalar, never here.
            return Err(Error::Shape("ℓ̃ must be End(TX)-valued".into()));
        }
        let scale = Complex64::new(1.0 / (term.alpha_power + 1) as f64, 0.0);
        Ok(form.ratio_to(self.volume())?.scale(scale))
    }
}

/// First function of a term.
pub fn chern_weil_term<G: GeometryBackend + ?Sized>(
    geom: &G,
    term: &ManifoldChargeTerm,
) -> Result<Vec<Complex64>> {
    check_term(geom, term)?;
    ChernWeilCache::new(geom).chern_weil_term(term)
}

/// `ℓ̃_m` as an `End(TX)`-valued function (`m` counts from zero).
pub fn ell_endomorphism<G: GeometryBackend + ?Sized>(
    geom: &G,
    term: &ManifoldChargeTerm,
    m: usize,
) -> Result<TensorField> {
    check_term(geom, term)?;
    ChernWeilCache::new(geom).ell_endomorphism(term, m)
}

fn correction_with_cache<G: GeometryBackend + ?Sized>(
    geom: &G,
    cache: &ChernWeilCache,
    term: &ManifoldChargeTerm,
) -> Result<Vec<Complex64>> {
    let mut acc = vec![Complex64::new(0.0, 0.0); geom.npts()];
    for m in 0..term.chern_multi_index.len() {
        let ell = cache.ell_endomorphism(term, m)?;
        let adj = geom.d_star_dbar_star(&geom.flat_map(&ell)?)?;
        for (a, v) in acc.iter_mut().zip(adj) {
            *a -= v / (2.0 * PI);
        }
    }
    Ok(acc)
}

/// Second function of a term, `−(1/2π) Σ_m d*∂̄*(ℓ̃_m^♭)`.
pub fn correction_term<G: GeometryBackend + ?Sized>(
    geom: &G,
    term: &ManifoldChargeTerm,
) -> Result<Vec<Complex64>> {
    check_term(geom, term)?;
    correction_with_cache(geom, &ChernWeilCache::new(geom), term)
}

/// Independent evaluation of the correction for `α^j c₁^{n−j}` through the
/// Laplacian: `−(1/2π) (n−j)/(j+1) Δ(ω^{j+1} ∧ Ric^{n−j−1} / ωⁿ)`.
pub fn correction_c1_laplacian<G: GeometryBackend + ?Sized>(
    geom: &G,
    alpha_power: usize,
) -> Result<Vec<Complex64>> {
    let n = geom.dimension();
    if alpha_power >= n {
        return Ok(vec![Complex64::new(0.0, 0.0); geom.npts()]);
    }
    let omega = geom.kahler_form();
    let ric = geom.ricci_form();
    let form = omega
        .power(alpha_power + 1)?
        .wedge(&ric.power(n - alpha_power - 1)?)?;
    let f = form.ratio_to(&geom.volume_form())?.values();
    let factor = (n - alpha_power) as f64 / ((alpha_power + 1) as f64 * 2.0 * PI);
    Ok(geom.laplacian(&f).iter().map(|v| -v * factor).collect())
}

fn check_term<G: GeometryBackend + ?Sized>(geom: &G, term: &ManifoldChargeTerm) -> Result<()> {
    let degree = term.alpha_power + term.chern_multi_index.iter().sum::<usize>();
    if degree != geom.dimension() {
        return Err(Error::DegreeMismatch(format!(
            "term of degree {degree} on a {}-dimensional geometry",
            geom.dimension()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TermBreakdown {
    pub term: ManifoldChargeTerm,
    pub chern_weil: Vec<Complex64>,
    pub correction: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct ZKahlerEvaluation {
    pub z_tilde: Vec<Complex64>,
    pub charge: ChargeValue,
    pub phase_used: f64,
    /// `Im(e^{−iφ} Z̃)` at every grid point.
    pub residual: Vec<f64>,
    pub per_term: Vec<TermBreakdown>,
}

/// `Z̃(X, ω)` for a manifold charge and its residual against the
/// topological phase.
pub fn z_tilde_manifold<G: GeometryBackend + ?Sized>(
    geom: &G,
    spec: &CentralChargeSpec,
) -> Result<ZKahlerEvaluation> {
    let terms = spec.manifold_terms()?;
    let charge = evaluate_charge(spec, &geom.topology())?;
    let phase_used = phase(charge.value)?;
    let cache = ChernWeilCache::new(geom);
    let npts = geom.npts();
    let mut z_tilde = vec![Complex64::new(0.0, 0.0); npts];
    let mut per_term = Vec::with_capacity(terms.len());
    for term in terms {
        check_term(geom, term)?;
        let chern_weil = cache.chern_weil_term(term)?;
        let correction = correction_with_cache(geom, &cache, term)?;
        let a = term.coefficient.value();
        for p in 0..npts {
            z_tilde[p] += a * (chern_weil[p] + correction[p]);
        }
        per_term.push(TermBreakdown {
            term: term.clone(),
            chern_weil,
            correction,
        });
    }
    let rotation = Complex64::from_polar(1.0, -phase_used);
    let residual = z_tilde.iter().map(|z| (rotation * z).im).collect();
    Ok(ZKahlerEvaluation {
        z_tilde,
        charge,
        phase_used,
        residual,
        per_term,
    })
}

/// `Ŝ − S(ω)`. On the cscK charge `i∫αⁿ − ∫c₁·α^{n−1}` the Z-critical
/// residual equals `−(V / (n |Z|)) (Ŝ − S)` with `V = ∫αⁿ`.
pub fn csck_residual<G: GeometryBackend + ?Sized>(geom: &G) -> Result<Vec<f64>> {
    let s_hat = average_scalar(&geom.topology())?;
    Ok(geom.scalar_curvature().iter().map(|s| s_hat - s).collect())
}

/// Factor `c` with `z_tilde_manifold(cscK).residual = c · csck_residual`.
pub fn csck_normalization<G: GeometryBackend + ?Sized>(geom: &G) -> Result<f64> {
    let topo = geom.topology();
    let n = topo.dimension as f64;
    let volume = topo.volume_f64();
    let s_hat = average_scalar(&topo)?;
    let z = Complex64::new(-s_hat * volume / n, volume);
    Ok(-volume / (n * z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::{builtin_charge, Coefficient};
    use crate::kgeom::{Cp1Geometry, TorusGeometry};
    use num_rational::Ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sup(v: &[Complex64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.norm()))
    }

    #[test]
    fn pure_alpha_term_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = TorusGeometry::random(1, 16, vec![Ratio::from_integer(1)], 0.1, &mut rng).unwrap();
        let term = ManifoldChargeTerm::new(Coefficient::int(1, 0), 1, vec![], 1).unwrap();
        let f = chern_weil_term(&t, &term).unwrap();
        assert!(f.iter().all(|v| (v - 1.0).norm() < 1e-14));
    }

    #[test]
    fn flat_torus_kills_curvature_terms() {
        let t = TorusGeometry::flat(2, 8).unwrap();
        let term = ManifoldChargeTerm::new(Coefficient::int(1, 0), 0, vec![2], 2).unwrap();
        assert!(sup(&chern_weil_term(&t, &term).unwrap()) < 1e-12);
        assert!(ell_endomorphism(&t, &term, 0).unwrap().sup_norm() < 1e-12);
        assert!(sup(&correction_term(&t, &term).unwrap()) < 1e-12);
    }

    #[test]
    fn ell_for_first_chern_factor_is_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ones = vec![Ratio::from_integer(1); 2];
        let t = TorusGeometry::random(2, 8, ones, 0.05, &mut rng).unwrap();
        // α · c₁ on a surface: ℓ̃ = ½ ω²/ω² Id.
        let term = ManifoldChargeTerm::new(Coefficient::int(1, 0), 1, vec![1], 2).unwrap();
        let ell = ell_endomorphism(&t, &term, 0).unwrap();
        let id =
            TensorField::identity(2, t.npts(), EndoShape::Tangent).scale(Complex64::new(0.5, 0.0));
        assert!(ell.sub(&id).unwrap().sup_norm() < 1e-13);
        // Trace of the replaced factor for k = 2 reproduces ch̃_1.
        let cache = ChernWeilCache::new(&t);
        let tr = cache.curvature_powers[1].trace();
        assert!(tr.sub(&cache.ch[1]).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn round_cp1_is_csck() {
        let g = Cp1Geometry::round(64);
        let spec = builtin_charge("csck", 1).unwrap();
        let eval = z_tilde_manifold(&g, &spec).unwrap();
        assert!(eval.residual.iter().all(|r| r.abs() < 1e-10));
        let direct = csck_residual(&g).unwrap();
        assert!(direct.iter().all(|r| r.abs() < 1e-10));
        // c₁ term on CP¹ equals the scalar curvature.
        let term = ManifoldChargeTerm::new(Coefficient::int(1, 0), 0, vec![1], 1).unwrap();
        let f = chern_weil_term(&g, &term).unwrap();
        for (a, s) in f.iter().zip(g.scalar_curvature()) {
            assert!((a.re - s).abs() < 1e-12);
        }
    }

    #[test]
    fn csck_normalization_matches_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Cp1Geometry::random(64, 0.3, &mut rng).unwrap();
        let spec = builtin_charge("csck", 1).unwrap();
        let eval = z_tilde_manifold(&g, &spec).unwrap();
        let c = csck_normalization(&g).unwrap();
        let direct = csck_residual(&g).unwrap();
        for (r, d) in eval.residual.iter().zip(&direct) {
            assert!((r - c * d).abs() < 1e-12);
        }
        assert!(eval.per_term.iter().all(|t| sup(&t.correction) < 1e-9));
        let mean: f64 = g.integrate_real(&direct);
        assert!(mean.abs() < 1e-10);
    }
}
