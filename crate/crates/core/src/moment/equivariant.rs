//! Circle-equivariant forms on CP¹ and the curvature moment map.
//!
//! Invariant forms are stored by their coefficients in `dx`, `dθ` and
//! `dx ∧ dθ`; the generator is `v = ∂θ` and `d_eq = d + ι_v`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{norms, VerificationReport};
use crate::charge::average_scalar;
use crate::error::{Error, Result};
use crate::kgeom::{Cp1Geometry, GeometryBackend, HamiltonianAction};

fn real(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|x| Complex64::new(*x, 0.0)).collect()
}

#[derive(Clone, Debug)]
pub struct EquivariantFormSample {
    pub label: String,
    pub generator: String,
    pub zero: Vec<Complex64>,
    pub one_x: Vec<Complex64>,
    pub one_theta: Vec<Complex64>,
    /// Coefficient of `dx ∧ dθ`.
    pub two: Vec<Complex64>,
}

impl EquivariantFormSample {
    fn empty(label: &str, generator: &str, npts: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); npts];
        Self {
            label: label.into(),
            generator: generator.into(),
            zero: z.clone(),
            one_x: z.clone(),
            one_theta: z.clone(),
            two: z,
        }
    }

    pub fn constant(geom: &Cp1Geometry, value: Complex64) -> Self {
        let mut s = Self::empty("constant", "rotation", geom.npts());
        s.zero = vec![value; geom.npts()];
        s
    }

    /// `ω + h` with `ω = dx ∧ dθ`.
    pub fn kahler(geom: &Cp1Geometry, action: &HamiltonianAction) -> Self {
        let mut s = Self::empty("omega+h", &action.generator, geom.npts());
        s.zero = real(&action.hamiltonian);
        s.two = vec![Complex64::new(1.0, 0.0); geom.npts()];
        s
    }

    /// `(i/2π)(R + iΔh)`: the equivariant first Chern form of `TX`.
    pub fn first_chern(geom: &Cp1Geometry, action: &HamiltonianAction) -> Self {
        let mut s = Self::empty("c1_eq", &action.generator, geom.npts());
        let lap = geom.laplacian_real(&action.hamiltonian);
        s.zero = lap
            .iter()
            .map(|v| Complex64::new(-v / (2.0 * PI), 0.0))
            .collect();
        // R = R_c ε∧ε̄ = −2i R_c dx∧dθ, so (i/2π)R = (R_c/π) dx∧dθ.
        s.two = geom
            .curvature_coefficient()
            .iter()
            .map(|r| r / PI)
            .collect();
        s
    }

    /// Degree-0 part multiplied by `k` (a broken sample when `k ≠ 1`).
    pub fn with_scaled_hamiltonian(mut self, k: f64) -> Self {
        for v in &mut self.zero {
            *v *= k;
        }
        self.label = format!("{} (h×{k})", self.label);
        self
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.zero.len() != other.zero.len() {
            return Err(Error::Shape("samples live on different grids".into()));
        }
        let n = self.zero.len();
        let mut out = Self::empty(
            &format!("{}∧{}", self.label, other.label),
            &self.generator,
            n,
        );
        for p in 0..n {
            out.zero[p] = self.zero[p] * other.zero[p];
            out.one_x[p] = self.zero[p] * other.one_x[p] + other.zero[p] * self.one_x[p];
            out.one_theta[p] =
                self.zero[p] * other.one_theta[p] + other.zero[p] * self.one_theta[p];
            out.two[p] = self.zero[p] * other.two[p]
                + other.zero[p] * self.two[p]
                + self.one_x[p] * other.one_theta[p]
                - self.one_theta[p] * other.one_x[p];
        }
        Ok(out)
    }

    /// Components of `d_eq` by degree: `(ι_v a, f₀' − w, a_θ')`, the
    /// coefficients of `1`, `dx` and `dx ∧ dθ`.
    pub fn d_eq(&self, geom: &Cp1Geometry) -> [Vec<Complex64>; 3] {
        let df = geom.dx(&self.zero);
        let da = geom.dx(&self.one_theta);
        [
            self.one_theta.clone(),
            df.iter().zip(&self.two).map(|(d, w)| d - w).collect(),
            da,
        ]
    }
}

pub fn check_equivariant_closed(
    sample: &EquivariantFormSample,
    geom: &Cp1Geometry,
    tolerance: f64,
) -> VerificationReport {
    let parts = sample.d_eq(geom);
    let (sup, l2) = norms(parts.iter().flat_map(|p| p.iter().map(|v| v.norm())));
    VerificationReport::new(
        format!("equivariant closedness of {}", sample.label),
        "d_eq-closed",
        sup,
        l2,
        tolerance,
    )
    .with("nodes", geom.npts())
    .with("generator", sample.generator.as_str())
}

/// Compares `ι_v R` with `−d(iΔh)`, where `iΔh` is `g⁻¹ i∂̄∂h` in the
/// unitary frame. With `corrupt` the sign of `h` is flipped.
pub fn check_curvature_moment_map(
    geom: &Cp1Geometry,
    action: &HamiltonianAction,
    corrupt: bool,
    tolerance: f64,
) -> VerificationReport {
    let sign = if corrupt { -1.0 } else { 1.0 };
    let h: Vec<f64> = action.hamiltonian.iter().map(|v| sign * v).collect();
    let lap = geom.laplacian_real(&h);
    let dlap = geom.grid.derivative(&lap);
    let contracted = geom.contracted_curvature();
    let mismatch = contracted
        .iter()
        .zip(&dlap)
        .map(|(r, d)| (r + Complex64::new(0.0, *d)).norm());
    let (sup, l2) = norms(mismatch);
    let report = VerificationReport::new(
        "curvature moment map on CP1",
        "iota_v R = -D(g^-1 i ddbar h)",
        sup,
        l2,
        tolerance,
    )
    .with("nodes", geom.npts())
    .with("hamiltonian_self_check", action.self_check);
    if corrupt {
        report.as_control()
    } else {
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FutakiWeight {
    Hamiltonian,
    /// `h²` in place of `h`; not a Hamiltonian, used as a control.
    SquaredHamiltonian,
}

/// `∫ w(h)(Ŝ − S) ω` for each member.
pub fn futaki_values(family: &[Cp1Geometry], weight: FutakiWeight) -> Result<Vec<f64>> {
    family
        .iter()
        .map(|geom| {
            let action = geom.hamiltonian_for_rotation()?;
            let s_hat = average_scalar(&geom.topology())?;
            let s = geom.scalar_curvature();
            let f: Vec<f64> = action
                .hamiltonian
                .iter()
                .zip(&s)
                .map(|(h, s)| {
                    let w = match weight {
                        FutakiWeight::Hamiltonian => *h,
                        FutakiWeight::SquaredHamiltonian => h * h,
                    };
                    w * (s_hat - s)
                })
                .collect();
            Ok(geom.integrate_real(&f))
        })
        .collect()
}

/// All members must give the same value, and on CP¹ that value is zero.
pub fn check_futaki_constancy(
    family: &[Cp1Geometry],
    weight: FutakiWeight,
    tolerance: f64,
) -> Result<VerificationReport> {
    if family.is_empty() {
        return Err(Error::Invalid("empty family".into()));
    }
    let values = futaki_values(family, weight)?;
    let mut spread = 0.0f64;
    for a in &values {
        for b in &values {
            spread = spread.max((a - b).abs());
        }
    }
    let (sup_abs, l2) = norms(values.iter().cloned());
    let mut report = VerificationReport::new(
        "Futaki constancy on a CP1 family",
        "sigma_v constant in b",
        sup_abs.max(spread),
        l2,
        tolerance,
    )
    .with("members", family.len())
    .with("spread", spread);
    for (i, v) in values.iter().enumerate() {
        report = report.with(&format!("value_{i}"), *v);
    }
    Ok(if weight == FutakiWeight::SquaredHamiltonian {
        report.as_control()
    } else {
        report
    })
}
