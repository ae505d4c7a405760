//! Parabolic flow for the dHYM equation on line bundles over tori.
//!
//! The potential `s` (with `a = ∂̄s − ∂s`) evolves by `∂_t s = σ·r(s)`, where
//! `r` is the dHYM residual and `σ` the sign making the flow dissipative.
//! Steps are IMEX: the flat Laplacian part of the linearization is implicit.

use std::sync::Arc;

use num_complex::Complex64;

use super::{dhym_residual, scalar_values, z_tilde_bundle, BundleModel, ConnectionState};
use crate::charge::{builtin_charge, evaluate_charge};
use crate::error::{Error, Result};
use crate::kgeom::GeometryBackend;

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRecord {
    pub iteration: usize,
    pub sup: f64,
    pub l2: f64,
    /// `|∫ tr Z̃(E, A_t) − Z(E)|` for the dHYM charge.
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowControls {
    pub step: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            step: 10.0,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub connection: ConnectionState,
    pub potential: Vec<f64>,
    pub trace: Vec<FlowRecord>,
    /// Linear coefficient `c` with `r(s) ≈ r(0) + c Δ_flat s`.
    pub linear_coefficient: f64,
}

impl FlowOutcome {
    pub fn final_record(&self) -> &FlowRecord {
        self.trace
            .last()
            .expect("flow records at least the initial state")
    }

    pub fn max_drift(&self) -> f64 {
        self.trace.iter().map(|r| r.drift).fold(0.0, f64::max)
    }
}

/// Flat Laplacian symbol `Σ_a g0_a^{-1} ∂_a∂_ā` on the reference torus.
fn flat_symbol(model: &BundleModel, k: &[i64]) -> f64 {
    let pi2 = std::f64::consts::PI.powi(2);
    model
        .base
        .areas
        .iter()
        .enumerate()
        .map(|(a, area)| {
            let g0 = num_traits::ToPrimitive::to_f64(area).unwrap_or(f64::NAN) / 2.0;
            let kx = k[2 * a] as f64;
            let ky = k[2 * a + 1] as f64;
            -pi2 * (kx * kx + ky * ky) / g0
        })
        .sum()
}

fn residual_of(model: &Arc<BundleModel>, s: &[f64]) -> Result<(ConnectionState, Vec<f64>)> {
    let conn = ConnectionState::from_line_potential(model.clone(), s)?;
    let r = scalar_values(&dhym_residual(&conn)?);
    Ok((conn, r))
}

fn record(
    model: &BundleModel,
    conn: &ConnectionState,
    r: &[f64],
    iteration: usize,
    target: Complex64,
) -> Result<FlowRecord> {
    let n = model.dim();
    let spec = builtin_charge("dhym", n)?;
    let total = model
        .base
        .integrate_top(&z_tilde_bundle(conn, &spec)?.trace());
    let rc: Vec<Complex64> = r.iter().map(|v| Complex64::new(v * v, 0.0)).collect();
    let l2 = (model.base.integrate(&rc).re / model.topology().volume_f64()).sqrt();
    Ok(FlowRecord {
        iteration,
        sup: r.iter().fold(0.0, |m, v| m.max(v.abs())),
        l2,
        drift: (total - target).norm(),
    })
}

/// Estimates `c` in `r(s) − r(0) ≈ c Δ_flat s` with a small single-mode probe.
fn probe_coefficient(model: &Arc<BundleModel>, base: &[f64], r0: &[f64]) -> Result<f64> {
    let grid = &model.base.grid;
    let eps = 1e-6;
    let bump: Vec<f64> = (0..model.npts())
        .map(|p| (2.0 * std::f64::consts::PI * grid.coords(p)[0]).cos())
        .collect();
    let probe: Vec<f64> = base.iter().zip(&bump).map(|(s, b)| s + eps * b).collect();
    let (_, r1) = residual_of(model, &probe)?;
    let mut k = vec![0i64; grid.axes];
    k[0] = 1;
    let lap = flat_symbol(model, &k);
    let num: f64 = r1
        .iter()
        .zip(r0)
        .zip(&bump)
        .map(|((a, b), c)| (a - b) * c)
        .sum();
    let den: f64 = bump.iter().map(|c| c * c * lap * eps).sum();
    Ok(num / den)
}

/// Runs the IMEX flow from the potential `initial` until the sup-norm of the
/// dHYM residual drops below `controls.tolerance`.
pub fn solve_dhym_line_bundle(
    model: Arc<BundleModel>,
    initial: &[f64],
    controls: &FlowControls,
) -> Result<FlowOutcome> {
    if model.rank != 1 {
        return Err(Error::Invalid(
            "the dHYM flow is implemented for line bundles".into(),
        ));
    }
    if initial.len() != model.npts() {
        return Err(Error::Shape(
            "initial potential has the wrong length".into(),
        ));
    }
    let n = model.dim();
    let target = evaluate_charge(&builtin_charge("dhym", n)?, &model.topology())?.value;
    let grid = &model.base.grid;

    let mut s = initial.to_vec();
    let (mut conn, mut r) = residual_of(&model, &s)?;
    let c = probe_coefficient(&model, &s, &r)?;
    if !c.is_finite() || c == 0.0 {
        return Err(Error::Invalid(
            "degenerate linearization of the dHYM operator".into(),
        ));
    }
    let sigma = c.signum();
    let mut trace = vec![record(&model, &conn, &r, 0, target)?];

    for it in 1..=controls.max_iterations {
        if trace
            .last()
            .map(|t| t.sup < controls.tolerance)
            .unwrap_or(false)
        {
            break;
        }
        // (1/dt − |c|Δ) δ = σ r.
        let rhs: Vec<Complex64> = r.iter().map(|v| Complex64::new(sigma * v, 0.0)).collect();
        let delta = grid.apply_symbol(&rhs, false, |k| {
            Complex64::new(
                1.0 / (1.0 / controls.step - c.abs() * flat_symbol(&model, k)),
                0.0,
            )
        });
        for (si, d) in s.iter_mut().zip(&delta) {
            *si += d.re;
        }
        let next = residual_of(&model, &s)?;
        conn = next.0;
        r = next.1;
        let rec = record(&model, &conn, &r, it, target)?;
        if !rec.sup.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: rec.sup,
                trace,
            });
        }
        trace.push(rec);
    }

    let last = trace.last().expect("non-empty").clone();
    if last.sup >= controls.tolerance {
        return Err(Error::NonConvergence {
            iterations: last.iteration,
            residual: last.sup,
            trace,
        });
    }
    Ok(FlowOutcome {
        connection: conn,
        potential: s,
        trace,
        linear_coefficient: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::Rational;
    use crate::kgeom::torus::{random_modes, sample_modes};
    use crate::kgeom::TorusGeometry;
    use num_rational::Ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize, grid: usize, chern: Vec<i64>) -> Arc<BundleModel> {
        let base = Arc::new(TorusGeometry::flat(n, grid).unwrap());
        let chern: Vec<Rational> = chern.into_iter().map(Ratio::from_integer).collect();
        Arc::new(BundleModel::new(base, 1, chern).unwrap())
    }

    #[test]
    fn t2_flow_converges_and_conserves_charge() {
        let m = line(1, 16, vec![1]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s0: Vec<f64> = sample_modes(&m.base.grid, &random_modes(2, &mut rng))
            .iter()
            .map(|v| 0.02 * v)
            .collect();
        let out = solve_dhym_line_bundle(m, &s0, &FlowControls::default()).unwrap();
        assert!(out.final_record().sup < 1e-10);
        assert!(out.max_drift() < 1e-10);
        assert!(out.trace.len() > 1);
    }

    #[test]
    fn exhausted_budget_reports_trace() {
        let m = line(1, 8, vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s0: Vec<f64> = sample_modes(&m.base.grid, &random_modes(2, &mut rng))
            .iter()
            .map(|v| 0.05 * v)
            .collect();
        let controls = FlowControls {
            step: 1e-4,
            max_iterations: 3,
            tolerance: 1e-12,
        };
        match solve_dhym_line_bundle(m, &s0, &controls) {
            Err(Error::NonConvergence {
                iterations, trace, ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(trace.len(), 4);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
