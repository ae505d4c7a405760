use std::f64::consts::PI;

use num_complex::Complex64;

use super::forms::{EndoShape, TensorField};
use crate::charge::ModelTopology;
use crate::error::{Error, Result};

/// Integration factor of the top monomial `dz^{1..n} ∧ dz̄^{1..n}` against
/// `Π (i dz_a ∧ dz̄_a)/2 = Π dx_a ∧ dy_a`, i.e. `(−1)^{n(n−1)/2} (−2i)^n`.
pub fn top_monomial_factor(n: usize) -> Complex64 {
    let sign = if (n * (n.saturating_sub(1)) / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    Complex64::new(0.0, -2.0).powi(n as i32) * sign
}

/// A circle action with its Hamiltonian, `dh = −ι_v ω`.
#[derive(Clone, Debug)]
pub struct HamiltonianAction {
    pub generator: String,
    /// Components of `v` in the backend's real coordinates.
    pub vector_field: Vec<Vec<f64>>,
    pub hamiltonian: Vec<f64>,
    /// Sup-norm of `dh + ι_v ω` measured at construction.
    pub self_check: f64,
}

/// A discretized Kähler model.
pub trait GeometryBackend {
    fn dimension(&self) -> usize;
    fn npts(&self) -> usize;
    fn topology(&self) -> ModelTopology;

    /// `ω` as a scalar (1,1)-form.
    fn kahler_form(&self) -> TensorField;

    /// Chern curvature of `TX^{1,0}`, an `End(TX)`-valued (1,1)-form.
    fn curvature(&self) -> &TensorField;

    /// `g^{ab̄} ∂_a ∂_b̄ f`.
    fn laplacian(&self, f: &[Complex64]) -> Vec<Complex64>;

    /// Lowers the upper index of an `End(TX)`-valued function with `g`; the
    /// result is stored as a scalar (1,1)-form with coefficients `T_{βε̄}`.
    fn flat_map(&self, a: &TensorField) -> Result<TensorField>;

    /// Adjoint of `h ↦ ∂∂̄h` against the pairing induced by `g` and `ωⁿ`.
    fn d_star_dbar_star(&self, t: &TensorField) -> Result<Vec<Complex64>>;

    /// `∫ f ωⁿ`.
    fn integrate(&self, f: &[Complex64]) -> Complex64;

    fn hamiltonian_for_rotation(&self) -> Result<HamiltonianAction>;

    /// Grid coordinates of every point, for plotting.
    fn coordinates(&self) -> Vec<Vec<f64>>;

    fn volume_form(&self) -> TensorField {
        self.kahler_form()
            .power(self.dimension())
            .expect("scalar forms always multiply")
    }

    /// `∫ T` for a scalar top-degree form.
    fn integrate_top(&self, t: &TensorField) -> Complex64 {
        let omega_n = self.volume_form();
        let ratio = t
            .trace()
            .ratio_to(&omega_n)
            .expect("fields share the grid")
            .values();
        self.integrate(&ratio)
    }

    /// `tr((iR/2π)^k)/k!`; `k = 0` is the constant `n`.
    fn chern_weil_form(&self, k: usize) -> TensorField {
        let n = self.dimension();
        let npts = self.npts();
        if k == 0 {
            return TensorField::constant(n, npts, Complex64::new(n as f64, 0.0));
        }
        if k > n {
            return TensorField::zero(n, npts, EndoShape::Scalar);
        }
        let ir = self
            .curvature()
            .scale(Complex64::new(0.0, 1.0 / (2.0 * PI)));
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        ir.power(k)
            .expect("curvature powers are well-formed")
            .trace()
            .scale(Complex64::new(1.0 / fact, 0.0))
    }

    fn ricci_form(&self) -> TensorField {
        self.chern_weil_form(1)
    }

    /// `S = n Ric ∧ ω^{n−1} / ωⁿ`.
    fn scalar_curvature(&self) -> Vec<f64> {
        let n = self.dimension();
        let omega = self.kahler_form();
        let num = self
            .ricci_form()
            .wedge(&omega.power(n - 1).expect("scalar"))
            .expect("scalar");
        num.ratio_to(&self.volume_form())
            .expect("same grid")
            .values()
            .iter()
            .map(|v| n as f64 * v.re)
            .collect()
    }

    /// Average of `f` against `ωⁿ`.
    fn mean(&self, f: &[Complex64]) -> Complex64 {
        let one = vec![Complex64::new(1.0, 0.0); self.npts()];
        self.integrate(f) / self.integrate(&one)
    }

    /// `∫ ⟨T, S⟩_g ωⁿ` for scalar (1,1) tensors `T_{βε̄}`, `S_{αγ̄}`, pairing
    /// `g^{αε̄} g^{βγ̄} T_{βε̄} S_{αγ̄}`.
    fn pair_tensors(&self, t: &TensorField, s: &TensorField) -> Result<Complex64>;
}

pub fn no_action(backend: &str) -> Error {
    Error::NoHamiltonianAction(format!(
        "the rotation generator on the {backend} model has no Hamiltonian: ι_v ω is not exact"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_factor_small_dimensions() {
        assert_eq!(top_monomial_factor(1), Complex64::new(0.0, -2.0));
        // (−1)·(−2i)² = 4.
        assert_eq!(top_monomial_factor(2), Complex64::new(4.0, 0.0));
    }
}
