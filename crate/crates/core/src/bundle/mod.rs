//! Unitary connections on model Hermitian bundles over flat tori.
//!
//! The bundle is `L ⊗ C^r` where `L` carries a connection of constant
//! central curvature `F_ref = −2πi Σ_a c_a dx_a ∧ dy_a · Id`. Since the
//! reference is central, `End E` is trivial and a connection is stored as
//! the skew-Hermitian perturbation `a`, with `F_A = F_ref + da + a ∧ a`.

mod flow;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::Rng;

use crate::charge::{
    evaluate_charge, hym_slope, phase, CentralChargeSpec, ModelTopology, Rational,
};
use crate::error::{Error, Result};
use crate::kgeom::torus::{random_modes, sample_modes};
use crate::kgeom::{EndoShape, GeometryBackend, TensorField, TorusGeometry};

pub use flow::{solve_dhym_line_bundle, FlowControls, FlowOutcome, FlowRecord};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug)]
pub struct BundleModel {
    pub base: Arc<TorusGeometry>,
    pub rank: usize,
    /// `c_a` with `c₁(L) = Σ_a c_a [dx_a ∧ dy_a]`.
    pub chern: Vec<Rational>,
    pub reference: TensorField,
}

impl BundleModel {
    pub fn new(base: Arc<TorusGeometry>, rank: usize, chern: Vec<Rational>) -> Result<Self> {
        if !(1..=2).contains(&rank) {
            return Err(Error::Invalid(format!(
                "bundle rank must be 1 or 2, got {rank}"
            )));
        }
        let n = base.n;
        if chern.len() != n {
            return Err(Error::DegreeMismatch(format!(
                "expected {n} Chern entries, got {}",
                chern.len()
            )));
        }
        let npts = base.npts();
        // dx ∧ dy = (i/2) dz ∧ dz̄, so F_ref = π c_a dz_a ∧ dz̄_a.
        let mut reference = TensorField::zero(n, npts, EndoShape::Bundle(rank));
        for (a, c) in chern.iter().enumerate() {
            let c = c.to_f64().unwrap_or(f64::NAN);
            let id = TensorField::identity(n, npts, EndoShape::Bundle(rank));
            let values = id.component((0, 0)).expect("identity").to_vec();
            reference.add_component((1 << a, 1 << a), &values, Complex64::new(PI * c, 0.0));
        }
        Ok(Self {
            base,
            rank,
            chern,
            reference,
        })
    }

    pub fn topology(&self) -> ModelTopology {
        self.base
            .topology()
            .with_bundle(self.rank, self.chern.clone())
            .expect("dimensions checked at construction")
    }

    pub fn dim(&self) -> usize {
        self.base.n
    }

    pub fn npts(&self) -> usize {
        self.base.npts()
    }

    /// `(i/2π) ∫ tr F_ref ∧ ω^{n−1}` by quadrature.
    pub fn reference_degree(&self) -> f64 {
        let n = self.dim();
        let form = self
            .reference
            .trace()
            .scale(Complex64::new(0.0, 1.0 / (2.0 * PI)))
            .wedge(&self.base.kahler_form().power(n - 1).expect("scalar"))
            .expect("scalar");
        self.base.integrate_top(&form).re
    }

    pub fn d(&self, form: &TensorField) -> TensorField {
        let grid = &self.base.grid;
        form.exterior_derivative(&|f, a, bar| grid.d_complex(f, a, bar))
    }

    pub fn zero_form(&self) -> TensorField {
        TensorField::zero(self.dim(), self.npts(), EndoShape::Bundle(self.rank))
    }
}

/// Builds the skew-Hermitian 1-form `Σ_a a_{x_a} dx_a + a_{y_a} dy_a` from
/// matrix grids of its real components (each skew-Hermitian), given as
/// closures `component(axis, i, j)` over real axes `0..2n`.
pub fn one_form_from_real(
    model: &BundleModel,
    component: impl Fn(usize, usize, usize) -> Vec<Complex64>,
) -> TensorField {
    let n = model.dim();
    let r = model.rank;
    let npts = model.npts();
    let mut out = model.zero_form();
    for a in 0..n {
        let mut holo = Vec::with_capacity(r * r * npts);
        let mut anti = Vec::with_capacity(r * r * npts);
        for i in 0..r {
            for j in 0..r {
                let ax = component(2 * a, i, j);
                let ay = component(2 * a + 1, i, j);
                holo.extend(ax.iter().zip(&ay).map(|(x, y)| (x - I * y) * 0.5));
                anti.extend(ax.iter().zip(&ay).map(|(x, y)| (x + I * y) * 0.5));
            }
        }
        out.add_component((1 << a, 0), &holo, ONE);
        out.add_component((0, 1 << a), &anti, ONE);
    }
    out
}

/// Sup-norm of `T + T^*` for a form with matrix coefficients.
pub fn skew_defect(t: &TensorField) -> f64 {
    t.add(&t.adjoint())
        .map(|s| s.sup_norm())
        .unwrap_or(f64::INFINITY)
}

/// Sup-norm of `T − T^*`.
pub fn hermitian_defect(t: &TensorField) -> f64 {
    t.sub(&t.adjoint())
        .map(|s| s.sup_norm())
        .unwrap_or(f64::INFINITY)
}

/// Random skew-Hermitian 1-form built from low Fourier modes, scaled to
/// sup-norm `amplitude` per component.
pub fn random_tangent<R: Rng>(model: &BundleModel, amplitude: f64, rng: &mut R) -> TensorField {
    let axes = 2 * model.dim();
    let r = model.rank;
    let mut fields = vec![vec![vec![ZERO; model.npts()]; r * r]; axes];
    for field in fields.iter_mut() {
        for i in 0..r {
            for j in i..r {
                let re = sample_modes(&model.base.grid, &random_modes(axes, rng));
                let im = if i == j {
                    vec![0.0; re.len()]
                } else {
                    sample_modes(&model.base.grid, &random_modes(axes, rng))
                };
                // i·H with H Hermitian: entry (i, j) = i(re + i im).
                let hij: Vec<Complex64> = re
                    .iter()
                    .zip(&im)
                    .map(|(a, b)| I * Complex64::new(*a, *b))
                    .collect();
                let hji: Vec<Complex64> = re
                    .iter()
                    .zip(&im)
                    .map(|(a, b)| I * Complex64::new(*a, -*b))
                    .collect();
                field[i * r + j] = hij;
                if i != j {
                    field[j * r + i] = hji;
                }
            }
        }
    }
    let sup = fields
        .iter()
        .flat_map(|f| f.iter().flat_map(|v| v.iter()))
        .fold(0.0f64, |m, v| m.max(v.norm()));
    let scale = if sup > 0.0 { amplitude / sup } else { 0.0 };
    one_form_from_real(model, |axis, i, j| {
        fields[axis][i * r + j].iter().map(|v| v * scale).collect()
    })
}

/// Random skew-Hermitian function (gauge algebra element).
pub fn random_algebra_element<R: Rng>(
    model: &BundleModel,
    amplitude: f64,
    rng: &mut R,
) -> TensorField {
    let axes = 2 * model.dim();
    let r = model.rank;
    let mut entries = vec![vec![ZERO; model.npts()]; r * r];
    for i in 0..r {
        for j in i..r {
            let re = sample_modes(&model.base.grid, &random_modes(axes, rng));
            let im = if i == j {
                vec![0.0; re.len()]
            } else {
                sample_modes(&model.base.grid, &random_modes(axes, rng))
            };
            entries[i * r + j] = re
                .iter()
                .zip(&im)
                .map(|(a, b)| I * Complex64::new(*a, *b))
                .collect();
            if i != j {
                entries[j * r + i] = re
                    .iter()
                    .zip(&im)
                    .map(|(a, b)| I * Complex64::new(*a, -*b))
                    .collect();
            }
        }
    }
    let sup = entries
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |m, v| m.max(v.norm()));
    let scale = if sup > 0.0 { amplitude / sup } else { 0.0 };
    TensorField::from_entries(
        model.dim(),
        model.npts(),
        EndoShape::Bundle(r),
        (0, 0),
        |i, j| entries[i * r + j].iter().map(|v| v * scale).collect(),
    )
}

#[derive(Clone, Debug)]
pub struct ConnectionState {
    pub model: Arc<BundleModel>,
    /// Skew-Hermitian `End E`-valued 1-form.
    pub perturbation: TensorField,
}

impl ConnectionState {
    pub fn reference(model: Arc<BundleModel>) -> Self {
        let perturbation = model.zero_form();
        Self {
            model,
            perturbation,
        }
    }

    pub fn new(model: Arc<BundleModel>, perturbation: TensorField) -> Result<Self> {
        if perturbation.shape != EndoShape::Bundle(model.rank)
            || perturbation.npts != model.npts()
            || perturbation.dim != model.dim()
        {
            return Err(Error::Shape(
                "perturbation does not match the bundle model".into(),
            ));
        }
        if perturbation
            .comps
            .keys()
            .any(|(i, j)| i.count_ones() + j.count_ones() != 1)
        {
            return Err(Error::Shape("perturbation must be a 1-form".into()));
        }
        let scale = perturbation.sup_norm().max(1.0);
        let defect = skew_defect(&perturbation);
        if defect > 1e-12 * scale {
            return Err(Error::Invalid(format!(
                "perturbation is not skew-Hermitian (defect {defect:e})"
            )));
        }
        Ok(Self {
            model,
            perturbation,
        })
    }

    /// Line-bundle connection `a = ∂̄s − ∂s` for a real potential `s`, so that
    /// `F = F_ref + 2∂∂̄s`.
    pub fn from_line_potential(model: Arc<BundleModel>, s: &[f64]) -> Result<Self> {
        if model.rank != 1 {
            return Err(Error::Invalid(
                "potential parametrization needs rank 1".into(),
            ));
        }
        let sc: Vec<Complex64> = s.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let mut a = model.zero_form();
        for k in 0..model.dim() {
            let d = model.base.grid.d_complex(&sc, k, false);
            let db = model.base.grid.d_complex(&sc, k, true);
            a.add_component((1 << k, 0), &d, -ONE);
            a.add_component((0, 1 << k), &db, ONE);
        }
        Self::new(model, a)
    }

    /// `A + t·b`.
    pub fn shifted(&self, t: f64, direction: &TensorField) -> Result<Self> {
        let perturbation = self.perturbation.axpy(Complex64::new(t, 0.0), direction)?;
        Ok(Self {
            model: self.model.clone(),
            perturbation,
        })
    }

    /// Full curvature `F_ref + da + a ∧ a`, including (2,0) and (0,2) parts.
    pub fn curvature(&self) -> TensorField {
        let a = &self.perturbation;
        let da = self.model.d(a);
        let aa = a.wedge(a).expect("same shape");
        self.model
            .reference
            .add(&da)
            .and_then(|f| f.add(&aa))
            .expect("same shape")
    }

    /// `D_A e = de + [a, e]` for an `End E`-valued function `e`.
    pub fn covariant_derivative(&self, e: &TensorField) -> TensorField {
        let de = self.model.d(e);
        let bracket = self
            .perturbation
            .graded_commutator(e, 1, 0)
            .expect("same shape");
        de.add(&bracket).expect("same shape")
    }
}

/// Unitary gauge transformation, optionally remembering its generator.
#[derive(Clone, Debug)]
pub struct GaugeElement {
    pub unitary: TensorField,
    pub algebra: Option<TensorField>,
}

fn matrix_exp_skew(entries: &[Complex64], r: usize) -> Vec<Complex64> {
    match r {
        1 => vec![entries[0].exp()],
        2 => {
            // e = iH, H = h0 + h·σ; exp(iH) = e^{ih0}(cos|h| + i sin|h| ĥ·σ).
            let h = [
                entries[0] * (-I),
                entries[1] * (-I),
                entries[2] * (-I),
                entries[3] * (-I),
            ];
            let h0 = 0.5 * (h[0].re + h[3].re);
            let hz = 0.5 * (h[0].re - h[3].re);
            let hx = h[1].re;
            let hy = -h[1].im;
            let norm = (hx * hx + hy * hy + hz * hz).sqrt();
            let (c, s) = (norm.cos(), if norm > 0.0 { norm.sin() / norm } else { 1.0 });
            let phase = Complex64::from_polar(1.0, h0);
            // ĥ·σ scaled by |h|: [[hz, hx − i hy], [hx + i hy, −hz]].
            let m = [
                Complex64::new(c, 0.0) + I * s * hz,
                I * s * Complex64::new(hx, -hy),
                I * s * Complex64::new(hx, hy),
                Complex64::new(c, 0.0) - I * s * hz,
            ];
            m.iter().map(|v| phase * v).collect()
        }
        _ => unreachable!("rank limited to 2"),
    }
}

impl GaugeElement {
    pub fn identity(model: &BundleModel) -> Self {
        Self {
            unitary: TensorField::identity(
                model.dim(),
                model.npts(),
                EndoShape::Bundle(model.rank),
            ),
            algebra: None,
        }
    }

    /// Constant central element `e^{iθ} Id`.
    pub fn central(model: &BundleModel, angle: f64) -> Self {
        Self {
            unitary: TensorField::identity(
                model.dim(),
                model.npts(),
                EndoShape::Bundle(model.rank),
            )
            .scale(Complex64::from_polar(1.0, angle)),
            algebra: None,
        }
    }

    /// `exp(t e)` pointwise for a skew-Hermitian `e`.
    pub fn exp(e: &TensorField, t: f64) -> Result<Self> {
        let r = e.rank();
        if !(1..=2).contains(&r) {
            return Err(Error::Shape("gauge algebra rank must be 1 or 2".into()));
        }
        let np = e.npts;
        let vals = e
            .component((0, 0))
            .map(|v| v.to_vec())
            .unwrap_or_else(|| vec![ZERO; r * r * np]);
        let mut out = vec![ZERO; r * r * np];
        for p in 0..np {
            let local: Vec<Complex64> = (0..r * r).map(|k| vals[k * np + p] * t).collect();
            for (k, v) in matrix_exp_skew(&local, r).into_iter().enumerate() {
                out[k * np + p] = v;
            }
        }
        let mut unitary = TensorField::zero(e.dim, np, e.shape);
        unitary.add_component((0, 0), &out, ONE);
        Ok(Self {
            unitary,
            algebra: Some(e.clone()),
        })
    }

    /// Sup-norm of `f^* f − Id`.
    pub fn unitary_defect(&self) -> f64 {
        let id = TensorField::identity(self.unitary.dim, self.unitary.npts, self.unitary.shape);
        self.unitary
            .adjoint()
            .wedge(&self.unitary)
            .and_then(|p| p.sub(&id))
            .map(|d| d.sup_norm())
            .unwrap_or(f64::INFINITY)
    }

    pub fn inverse(&self) -> TensorField {
        self.unitary.adjoint()
    }
}

/// `f · A = f⁻¹ ∘ D_A ∘ f`, i.e. `a ↦ f⁻¹ a f + f⁻¹ df`.
pub fn gauge_act(f: &GaugeElement, conn: &ConnectionState) -> Result<ConnectionState> {
    let inv = f.inverse();
    let conj = inv.wedge(&conn.perturbation)?.wedge(&f.unitary)?;
    let df = conn.model.d(&f.unitary);
    let a = conj.add(&inv.wedge(&df)?)?;
    Ok(ConnectionState {
        model: conn.model.clone(),
        perturbation: a,
    })
}

/// Fundamental vector field `v_e = D_A e` at `conn`.
pub fn infinitesimal_gauge(e: &TensorField, conn: &ConnectionState) -> TensorField {
    conn.covariant_derivative(e)
}

/// `Σ ρ_j t_l ω^{j+l} ∧ (iF/2π)^k / k!`, an `End E`-valued top form.
pub fn z_tilde_bundle(conn: &ConnectionState, spec: &CentralChargeSpec) -> Result<TensorField> {
    let model = &conn.model;
    let n = model.dim();
    if spec.dimension != n {
        return Err(Error::DegreeMismatch(format!(
            "charge for dimension {} on a {n}-dimensional base",
            spec.dimension
        )));
    }
    let terms = spec.bundle_terms()?;
    let omega = model.base.kahler_form();
    let f = conn
        .curvature()
        .scale(Complex64::new(0.0, 1.0 / (2.0 * PI)));
    let mut f_powers = vec![TensorField::identity(
        n,
        model.npts(),
        EndoShape::Bundle(model.rank),
    )];
    for k in 1..=n {
        let next = f_powers[k - 1]
            .wedge(&f)?
            .scale(Complex64::new(1.0 / k as f64, 0.0));
        f_powers.push(next);
    }
    let mut total = model.zero_form();
    for term in terms {
        let coefficient =
            term.coefficient.value() * spec.theta_component(term.theta_degree).value();
        if coefficient == ZERO {
            continue;
        }
        let piece = omega
            .power(term.alpha_power + term.theta_degree)?
            .wedge(&f_powers[term.chern_degree])?;
        total = total.axpy(coefficient, &piece.degree_part(2 * n))?;
    }
    Ok(total)
}

/// Phase of `Z(E)` for the model topology.
pub fn bundle_phase(model: &BundleModel, spec: &CentralChargeSpec) -> Result<f64> {
    let z = evaluate_charge(spec, &model.topology())?;
    phase(z.value)
}

/// `Im(B) = (B − B^*)/(2i)` for an `End E`-valued function.
pub fn imaginary_part(b: &TensorField) -> Result<TensorField> {
    Ok(b.sub(&b.adjoint())?.scale(Complex64::new(0.0, -0.5)))
}

/// `Im(e^{−iφ(E)} Z̃(E, A))` as a Hermitian `End E`-valued function.
pub fn z_critical_residual(
    conn: &ConnectionState,
    spec: &CentralChargeSpec,
) -> Result<TensorField> {
    let model = &conn.model;
    let phi = bundle_phase(model, spec)?;
    let volume = model.base.volume_form();
    let b = z_tilde_bundle(conn, spec)?
        .ratio_to(&volume)?
        .scale(Complex64::from_polar(1.0, -phi));
    imaginary_part(&b)
}

/// `(i/2π) Λ_ω F_A − λ Id`.
pub fn hym_residual(conn: &ConnectionState) -> Result<TensorField> {
    let model = &conn.model;
    let n = model.dim();
    let lambda = hym_slope(&model.topology())?;
    let omega = model.base.kahler_form();
    let lf = conn
        .curvature()
        .wedge(&omega.power(n - 1)?)?
        .ratio_to(&model.base.volume_form())?
        .scale(Complex64::new(0.0, n as f64 / (2.0 * PI)));
    let id = TensorField::identity(n, model.npts(), EndoShape::Bundle(model.rank));
    lf.axpy(Complex64::new(-lambda, 0.0), &id)
}

/// `Im(e^{−iφ_W} (ω Id − F/2π)ⁿ) / ωⁿ` with `φ_W = arg ∫ tr (ω − F/2π)ⁿ`.
/// Equals `n!` times the Z-critical residual of the dHYM charge.
pub fn dhym_residual(conn: &ConnectionState) -> Result<TensorField> {
    let model = &conn.model;
    let n = model.dim();
    let id = TensorField::identity(n, model.npts(), EndoShape::Bundle(model.rank));
    let base = id
        .wedge(&model.base.kahler_form())?
        .axpy(Complex64::new(-1.0 / (2.0 * PI), 0.0), &conn.curvature())?;
    let top = base.power(n)?.degree_part(2 * n);
    let w = model.base.integrate_top(&top.trace());
    let phi = phase(w)?;
    let b = top
        .ratio_to(&model.base.volume_form())?
        .scale(Complex64::from_polar(1.0, -phi));
    imaginary_part(&b)
}

/// Products of `K` factors, `a` at slot `p`, `b` at slot `q`, `F` elsewhere.
fn slot_product(
    f: &TensorField,
    a: &TensorField,
    b: &TensorField,
    k: usize,
    p: usize,
    q: usize,
) -> Result<TensorField> {
    let mut out = TensorField::identity(f.dim, f.npts, f.shape);
    for slot in 0..k {
        let factor = if slot == p {
            a
        } else if slot == q {
            b
        } else {
            f
        };
        out = out.wedge(factor)?;
    }
    Ok(out)
}

/// `η` evaluated on `(a, b)` for a single term `ω^j ∧ ch_k ∧ θ`: the
/// two-horizontal-slot part of `tr((iF/2π)^{k+1}/(k+1)!)` where the mixed
/// curvature sends tangent vectors to themselves.
fn pairing_term(
    conn: &ConnectionState,
    f: &TensorField,
    a: &TensorField,
    b: &TensorField,
    big_k: usize,
    omega_power: usize,
) -> Result<Complex64> {
    let model = &conn.model;
    let n = model.dim();
    let mut sum = model.zero_form();
    for p in 0..big_k {
        for q in p + 1..big_k {
            let ab = slot_product(f, a, b, big_k, p, q)?;
            let ba = slot_product(f, b, a, big_k, p, q)?;
            sum = sum.add(&ab.sub(&ba)?.scale(Complex64::new(0.5, 0.0)))?;
        }
    }
    let fact: f64 = (1..=big_k).map(|i| i as f64).product();
    let prefactor = Complex64::new(0.0, 1.0 / (2.0 * PI)).powi(big_k as i32) / fact;
    let form = model
        .base
        .kahler_form()
        .power(omega_power)?
        .wedge(&sum.trace())?
        .degree_part(2 * n);
    Ok(prefactor * model.base.integrate_top(&form))
}

/// `Ω_Z(a, b) = Im(e^{−iφ(E)} η_Z(a, b))`.
pub fn omega_z_pairing(
    conn: &ConnectionState,
    a: &TensorField,
    b: &TensorField,
    spec: &CentralChargeSpec,
) -> Result<f64> {
    let model = &conn.model;
    let phi = bundle_phase(model, spec)?;
    let f = conn.curvature();
    let mut eta = ZERO;
    for term in spec.bundle_terms()? {
        let coefficient =
            term.coefficient.value() * spec.theta_component(term.theta_degree).value();
        if coefficient == ZERO {
            continue;
        }
        let big_k = term.chern_degree + 1;
        if big_k < 2 {
            continue;
        }
        eta += coefficient
            * pairing_term(conn, &f, a, b, big_k, term.alpha_power + term.theta_degree)?;
    }
    Ok((Complex64::from_polar(1.0, -phi) * eta).im)
}

/// `−(1/8π²) ∫ tr(a ∧ b) ∧ ω^{n−1}`, the pairing of the HYM charge computed
/// directly.
pub fn hym_pairing_direct(conn: &ConnectionState, a: &TensorField, b: &TensorField) -> Result<f64> {
    let model = &conn.model;
    let n = model.dim();
    let form = a
        .wedge(b)?
        .trace()
        .wedge(&model.base.kahler_form().power(n - 1)?)?
        .degree_part(2 * n);
    Ok((model.base.integrate_top(&form) * (-1.0 / (8.0 * PI * PI))).re)
}

/// `⟨ν(A), e⟩ = (i/2π) ∫ tr(e · Im(e^{−iφ} Z̃(E, A))) ωⁿ`.
pub fn moment_pairing(
    conn: &ConnectionState,
    e: &TensorField,
    spec: &CentralChargeSpec,
) -> Result<f64> {
    let residual = z_critical_residual(conn, spec)?;
    let integrand = e.wedge(&residual)?.trace().values();
    let value = conn.model.base.integrate(&integrand) * Complex64::new(0.0, 1.0 / (2.0 * PI));
    Ok(value.re)
}

/// Hermitian residual of a rank-one connection as a real function.
pub fn scalar_values(t: &TensorField) -> Vec<f64> {
    t.entry((0, 0), 0, 0).iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charge::builtin_charge;
    use num_rational::Ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(v: i64) -> Rational {
        Ratio::from_integer(v)
    }

    fn model(n: usize, grid: usize, rank: usize, chern: Vec<Rational>) -> Arc<BundleModel> {
        let base = Arc::new(TorusGeometry::flat(n, grid).unwrap());
        Arc::new(BundleModel::new(base, rank, chern).unwrap())
    }

    #[test]
    fn reference_curvature_reproduces_degree() {
        let m = model(1, 8, 2, vec![r(3)]);
        assert!((m.reference_degree() - 6.0).abs() < 1e-12);
        let m = model(2, 6, 1, vec![r(1), r(2)]);
        assert!((m.reference_degree() - m.topology().degree().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_perturbation_gives_reference_curvature() {
        let m = model(1, 8, 1, vec![r(1)]);
        let conn = ConnectionState::reference(m.clone());
        assert!(conn.curvature().sub(&m.reference).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn potential_connection_curvature() {
        // F − F_ref = 2∂∂̄s.
        let m = model(1, 16, 1, vec![r(0)]);
        let s: Vec<f64> = (0..m.npts())
            .map(|p| {
                let x = m.base.grid.coords(p);
                0.1 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin()
            })
            .collect();
        let conn = ConnectionState::from_line_potential(m.clone(), &s).unwrap();
        let sc: Vec<Complex64> = s.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let expected: Vec<Complex64> = m
            .base
            .grid
            .d_mixed(&sc, 0, 0)
            .iter()
            .map(|v| v * 2.0)
            .collect();
        let f = conn.curvature();
        let got = f.entry((1, 1), 0, 0);
        let err = got
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(skew_defect(&f) < 1e-12);
    }

    #[test]
    fn gauge_transform_conjugates_curvature() {
        let m = model(1, 32, 2, vec![r(1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_tangent(&m, 0.3, &mut rng);
        let conn = ConnectionState::new(m.clone(), a).unwrap();
        let e = random_algebra_element(&m, 0.8, &mut rng);
        let g = GaugeElement::exp(&e, 1.0).unwrap();
        assert!(g.unitary_defect() < 1e-13);
        let moved = gauge_act(&g, &conn).unwrap();
        // exp(e) is not band-limited, so the grid has to resolve it.
        assert!(skew_defect(&moved.perturbation) < 1e-12);
        let lhs = moved.curvature();
        let rhs = g
            .inverse()
            .wedge(&conn.curvature())
            .unwrap()
            .wedge(&g.unitary)
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn identity_and_central_gauge_fix_state() {
        let m = model(1, 8, 1, vec![r(1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conn = ConnectionState::new(m.clone(), random_tangent(&m, 0.2, &mut rng)).unwrap();
        for g in [GaugeElement::identity(&m), GaugeElement::central(&m, 0.7)] {
            let moved = gauge_act(&g, &conn).unwrap();
            assert!(
                moved
                    .perturbation
                    .sub(&conn.perturbation)
                    .unwrap()
                    .sup_norm()
                    < 1e-12
            );
        }
    }

    #[test]
    fn dhym_on_trivial_t2_bundle() {
        let m = model(1, 8, 1, vec![r(0)]);
        let conn = ConnectionState::reference(m.clone());
        let spec = builtin_charge("dhym", 1).unwrap();
        let z = z_tilde_bundle(&conn, &spec).unwrap();
        let total = m.base.integrate_top(&z.trace());
        assert!((total - Complex64::new(0.0, -1.0)).norm() < 1e-13);
    }

    #[test]
    fn constant_curvature_solves_hym_and_dhym() {
        let m = model(2, 6, 1, vec![r(1), r(2)]);
        let conn = ConnectionState::reference(m.clone());
        assert!(hym_residual(&conn).unwrap().sup_norm() < 1e-12);
        assert!(dhym_residual(&conn).unwrap().sup_norm() < 1e-12);
        let spec = builtin_charge("dhym", 2).unwrap();
        assert!(z_critical_residual(&conn, &spec).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn analytic_pairing_example() {
        let m = model(1, 8, 1, vec![r(0)]);
        let conn = ConnectionState::reference(m.clone());
        let ones = vec![I; m.npts()];
        let zeros = vec![ZERO; m.npts()];
        let a = one_form_from_real(&m, |axis, _, _| {
            if axis == 0 {
                ones.clone()
            } else {
                zeros.clone()
            }
        });
        let b = one_form_from_real(&m, |axis, _, _| {
            if axis == 1 {
                ones.clone()
            } else {
                zeros.clone()
            }
        });
        let spec = builtin_charge("hym", 1).unwrap();
        let expected = 1.0 / (8.0 * PI * PI);
        assert!((omega_z_pairing(&conn, &a, &b, &spec).unwrap() - expected).abs() < 1e-12);
        assert!((hym_pairing_direct(&conn, &a, &b).unwrap() - expected).abs() < 1e-12);
    }
}
