//! Gauge-theoretic moment maps on spaces of unitary connections.
//!
//! Sign convention: `⟨ν(A), e⟩ = (i/2π) ∫ tr(e · Im(e^{−iφ} Z̃(E, A))) ωⁿ`
//! and `ι_{v_e} Ω_Z(a) = 2 Ω_Z(v_e, a)` with `Ω_Z(a, b)` the pairing of
//! [`omega_z_pairing`]. The identity checked is `dν(a) = −ι_{v_e} Ω_Z(a)`.

use num_complex::Complex64;

use super::{extrapolated_derivative, norms, order_text, VerificationReport};
use crate::bundle::{
    bundle_phase, gauge_act, hym_pairing_direct, infinitesimal_gauge, moment_pairing,
    omega_z_pairing, ConnectionState, GaugeElement,
};
use crate::charge::CentralChargeSpec;
use crate::error::Result;
use crate::kgeom::TensorField;

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Finite-difference check of the moment-map identity along `A + t a`.
/// With `corrupt` the sign of `ν` is flipped.
pub fn check_bundle_moment_map(
    conn: &ConnectionState,
    e: &TensorField,
    a: &TensorField,
    spec: &CentralChargeSpec,
    corrupt: bool,
    tolerance: f64,
) -> Result<VerificationReport> {
    let sign = if corrupt { -1.0 } else { 1.0 };
    let step = 1e-2;
    let est = extrapolated_derivative(
        |t| Ok(sign * moment_pairing(&conn.shifted(t, a)?, e, spec)?),
        0.0,
        step,
    )?;
    let v = infinitesimal_gauge(e, conn);
    let predicted = -2.0 * omega_z_pairing(conn, &v, a, spec)?;
    let mismatch = relative(est.value, predicted);
    let report = VerificationReport::new(
        format!(
            "bundle moment map ({}, rank {}, n = {})",
            spec.name,
            conn.model.rank,
            conn.model.dim()
        ),
        "d<nu,e>(a) = -iota_{v_e} Omega_Z(a)",
        mismatch,
        mismatch,
        tolerance,
    )
    .with("derivative", est.value)
    .with("pairing", predicted)
    .with("fd_step", step)
    .with("observed_order", order_text(std::slice::from_ref(&est)))
    .with("grid", conn.model.base.grid_size());
    Ok(if corrupt { report.as_control() } else { report })
}

/// `⟨ν, e₁ + e₂⟩ = ⟨ν, e₁⟩ + ⟨ν, e₂⟩`.
pub fn check_moment_linearity(
    conn: &ConnectionState,
    e1: &TensorField,
    e2: &TensorField,
    spec: &CentralChargeSpec,
    tolerance: f64,
) -> Result<VerificationReport> {
    let sum = e1.add(e2)?;
    let lhs = moment_pairing(conn, &sum, spec)?;
    let rhs = moment_pairing(conn, e1, spec)? + moment_pairing(conn, e2, spec)?;
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    let err = (lhs - rhs).abs() / scale;
    Ok(VerificationReport::new(
        format!("moment pairing linearity ({})", spec.name),
        "nu linear in e",
        err,
        err,
        tolerance,
    ))
}

/// HYM pairing through the general `Ω_Z` assembly against the direct
/// `−(1/8π²) ∫ tr(a ∧ b) ∧ ω^{n−1}`. The HYM charge has a real `η`, so the
/// two agree up to the factor `sin φ(E)`, which is 1 in degree zero.
pub fn check_pairing_paths(
    conn: &ConnectionState,
    a: &TensorField,
    b: &TensorField,
    tolerance: f64,
) -> Result<VerificationReport> {
    let n = conn.model.dim();
    let spec = crate::charge::builtin_charge("hym", n)?;
    let general = omega_z_pairing(conn, a, b, &spec)?;
    let factor = bundle_phase(&conn.model, &spec)?.sin();
    let direct = factor * hym_pairing_direct(conn, a, b)?;
    let err = (general - direct).abs();
    Ok(VerificationReport::new(
        format!("Omega pairing paths (rank {}, n = {n})", conn.model.rank),
        "Omega_Z(hym) = -(sin phi/8pi^2) int tr(a^b) w^(n-1)",
        err,
        err,
        tolerance,
    )
    .with("general", general)
    .with("direct", direct)
    .with("phase_factor", factor))
}

/// `ι_{v_e} F_univ = −D_A⟨μ, e⟩` with `⟨μ, e⟩ = −e`: the tangent of the gauge
/// orbit `t ↦ exp(te)·A`, obtained by finite differences, against `D_A e`.
pub fn check_equivariant_chern_weil_bundle(
    conn: &ConnectionState,
    e: &TensorField,
    tolerance: f64,
) -> Result<VerificationReport> {
    let orbit = |t: f64| -> Result<TensorField> {
        Ok(gauge_act(&GaugeElement::exp(e, t)?, conn)?.perturbation)
    };
    let h = 1e-2;
    let mut diffs = Vec::with_capacity(3);
    for k in 0..3 {
        let step = h / f64::from(1u32 << k);
        let d = orbit(step)?
            .sub(&orbit(-step)?)?
            .scale(Complex64::new(1.0 / (2.0 * step), 0.0));
        diffs.push(d);
    }
    // Richardson on the two finest steps.
    let tangent = diffs[2].axpy(Complex64::new(1.0 / 3.0, 0.0), &diffs[2].sub(&diffs[1])?)?;
    let mu = e.scale(Complex64::new(-1.0, 0.0));
    let rhs = conn
        .covariant_derivative(&mu)
        .scale(Complex64::new(-1.0, 0.0));
    let diff = tangent.sub(&rhs)?;
    let (sup, l2) = norms(diff.comps.values().flat_map(|v| v.iter().map(|z| z.norm())));
    let vector_field = infinitesimal_gauge(e, conn);
    let fd_order = {
        let d1 = diffs[0].sub(&diffs[1])?.sup_norm();
        let d2 = diffs[1].sub(&diffs[2])?.sup_norm();
        if d2 == 0.0 || d1 < 1e-12 {
            "exact".to_string()
        } else {
            format!("{:.3}", (d1 / d2).log2())
        }
    };
    Ok(VerificationReport::new(
        format!(
            "equivariant curvature on gauge slices (rank {})",
            conn.model.rank
        ),
        "iota_{v_e} F = -D<mu,e>, <mu,e> = -e",
        sup,
        l2,
        tolerance,
    )
    .with("fd_step", h)
    .with("observed_order", fd_order)
    .with("vector_field_sup", vector_field.sup_norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{random_algebra_element, random_tangent, BundleModel};
    use crate::charge::builtin_charge;
    use crate::kgeom::{EndoShape, TorusGeometry};
    use num_rational::Ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn model(n: usize, grid: usize, rank: usize) -> Arc<BundleModel> {
        let base = Arc::new(TorusGeometry::flat(n, grid).unwrap());
        Arc::new(BundleModel::new(base, rank, vec![Ratio::from_integer(1); n]).unwrap())
    }

    #[test]
    fn hym_moment_map_rank_two() {
        let m = model(1, 16, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conn = ConnectionState::new(m.clone(), random_tangent(&m, 0.3, &mut rng)).unwrap();
        let a = random_tangent(&m, 1.0, &mut rng);
        let e = random_algebra_element(&m, 1.0, &mut rng);
        let spec = builtin_charge("hym", 1).unwrap();
        assert!(
            check_bundle_moment_map(&conn, &e, &a, &spec, false, 1e-6)
                .unwrap()
                .pass
        );
        let control = check_bundle_moment_map(&conn, &e, &a, &spec, true, 1e-6).unwrap();
        assert!(control.succeeded() && control.sup > 1.0);
    }

    #[test]
    fn linearity_in_generator() {
        let m = model(1, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conn = ConnectionState::new(m.clone(), random_tangent(&m, 0.3, &mut rng)).unwrap();
        let e1 = random_algebra_element(&m, 1.0, &mut rng);
        let e2 = random_algebra_element(&m, 1.0, &mut rng);
        let spec = builtin_charge("dhym", 1).unwrap();
        assert!(
            check_moment_linearity(&conn, &e1, &e2, &spec, 1e-13)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn abelian_slice_example() {
        // e = i sin(2πy): both sides are 2πi cos(2πy) dy.
        let m = model(1, 16, 1);
        let conn = ConnectionState::reference(m.clone());
        let e = TensorField::from_entries(1, m.npts(), EndoShape::Bundle(1), (0, 0), |_, _| {
            (0..m.npts())
                .map(|p| Complex64::new(0.0, (2.0 * PI * m.base.grid.coords(p)[1]).sin()))
                .collect()
        });
        let report = check_equivariant_chern_weil_bundle(&conn, &e, 1e-8).unwrap();
        assert!(report.pass, "{report:?}");
        let v = infinitesimal_gauge(&e, &conn);
        // dy = (i/2)(dz̄ − dz) in the dz̄ slot: coefficient (i/2)·2πi cos = −π cos.
        let dzbar = v.entry((0, 1), 0, 0);
        for (p, val) in dzbar.iter().enumerate() {
            let y = m.base.grid.coords(p)[1];
            let expected = Complex64::new(-PI * (2.0 * PI * y).cos(), 0.0);
            assert!((val - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_generator_has_zero_vector_field() {
        let m = model(1, 8, 1);
        let conn = ConnectionState::reference(m.clone());
        let e = TensorField::identity(1, m.npts(), EndoShape::Bundle(1))
            .scale(Complex64::new(0.0, 0.7));
        let report = check_equivariant_chern_weil_bundle(&conn, &e, 1e-12).unwrap();
        assert!(report.pass);
        assert!(infinitesimal_gauge(&e, &conn).sup_norm() < 1e-14);
    }

    #[test]
    fn rank_two_slices() {
        let m = model(1, 32, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let conn = ConnectionState::new(m.clone(), random_tangent(&m, 0.3, &mut rng)).unwrap();
        let e = random_algebra_element(&m, 0.5, &mut rng);
        let report = check_equivariant_chern_weil_bundle(&conn, &e, 1e-8).unwrap();
        assert!(report.pass, "{report:?}");
    }
}
