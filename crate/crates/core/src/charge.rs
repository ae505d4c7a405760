//! Central charges: declarative term lists, exact intersection tables for the
//! model manifolds and bundles, and evaluation of charges and phases.
//!
//! Intersection numbers are kept as rationals times a power of a single real
//! scale factor (the period of the Kähler class when it is not rational, e.g.
//! `4π` for the symplectic-coordinate model of CP¹). Whenever the scale is one
//! and every coefficient is a Gaussian rational, evaluation is exact.

use std::f64::consts::PI;

use num_complex::{Complex, Complex64};
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;
pub type GaussianRational = Complex<Rational>;

/// A complex coefficient, exact when it came from exact data.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Exact(GaussianRational),
    Float(Complex64),
}

impl Coefficient {
    pub fn exact(re: Rational, im: Rational) -> Self {
        Coefficient::Exact(Complex::new(re, im))
    }

    pub fn int(re: i64, im: i64) -> Self {
        Self::exact(Rational::from_integer(re), Rational::from_integer(im))
    }

    /// Converts a float pair, keeping it exact when it is a short binary or
    /// decimal fraction.
    pub fn from_f64(re: f64, im: f64) -> Self {
        match (exact_ratio(re), exact_ratio(im)) {
            (Some(r), Some(i)) => Self::exact(r, i),
            _ => Coefficient::Float(Complex64::new(re, im)),
        }
    }

    pub fn value(&self) -> Complex64 {
        match self {
            Coefficient::Exact(z) => gaussian_to_f64(z),
            Coefficient::Float(z) => *z,
        }
    }

    pub fn as_exact(&self) -> Option<GaussianRational> {
        match self {
            Coefficient::Exact(z) => Some(*z),
            Coefficient::Float(_) => None,
        }
    }

    pub fn scale(&self, factor: &Coefficient) -> Coefficient {
        match (self, factor) {
            (Coefficient::Exact(a), Coefficient::Exact(b)) => Coefficient::Exact(a * b),
            _ => Coefficient::Float(self.value() * factor.value()),
        }
    }
}

fn exact_ratio(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    for den in [
        1i64, 2, 4, 8, 16, 32, 64, 3, 6, 12, 24, 5, 10, 100, 1000, 10_000, 1_000_000,
    ] {
        let num = x * den as f64;
        if num.abs() < 1e15 && num == num.round() {
            return Some(Rational::new(num as i64, den));
        }
    }
    None
}

pub fn gaussian_to_f64(z: &GaussianRational) -> Complex64 {
    Complex64::new(
        z.re.to_f64().unwrap_or(f64::NAN),
        z.im.to_f64().unwrap_or(f64::NAN),
    )
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64).product::<i64>().max(1)
}

/// `(-i)^j / j!` as an exact coefficient.
pub fn exp_minus_i_coefficient(j: usize) -> Coefficient {
    let f = factorial(j);
    let (re, im) = match j % 4 {
        0 => (1, 0),
        1 => (0, -1),
        2 => (-1, 0),
        _ => (0, 1),
    };
    Coefficient::exact(Rational::new(re, f), Rational::new(im, f))
}

/// One term `a · α^j · ch_{k_1} ⋯ ch_{k_r}` of a manifold central charge.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldChargeTerm {
    pub coefficient: Coefficient,
    pub alpha_power: usize,
    pub chern_multi_index: Vec<usize>,
}

impl ManifoldChargeTerm {
    pub fn new(
        coefficient: Coefficient,
        alpha_power: usize,
        chern_multi_index: Vec<usize>,
        dimension: usize,
    ) -> Result<Self> {
        if chern_multi_index.contains(&0) {
            return Err(Error::DegreeMismatch(
                "Chern character indices must be positive; fold ch_0 into the coefficient".into(),
            ));
        }
        if chern_multi_index.len() > dimension {
            return Err(Error::DegreeMismatch(format!(
                "multi-index of length {} exceeds dimension {dimension}",
                chern_multi_index.len()
            )));
        }
        let total = alpha_power + chern_multi_index.iter().sum::<usize>();
        if total != dimension {
            return Err(Error::DegreeMismatch(format!(
                "term alpha^{alpha_power} ch{chern_multi_index:?} has degree {total}, expected {dimension}"
            )));
        }
        Ok(Self {
            coefficient,
            alpha_power,
            chern_multi_index,
        })
    }
}

/// One term `ρ · α^j · ch_k(E) · Θ_l` of a bundle central charge.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleChargeTerm {
    pub coefficient: Coefficient,
    pub alpha_power: usize,
    pub chern_degree: usize,
    pub theta_degree: usize,
}

impl BundleChargeTerm {
    pub fn new(
        coefficient: Coefficient,
        alpha_power: usize,
        chern_degree: usize,
        dimension: usize,
    ) -> Result<Self> {
        if alpha_power + chern_degree > dimension {
            return Err(Error::DegreeMismatch(format!(
                "term alpha^{alpha_power} ch_{chern_degree} exceeds dimension {dimension}"
            )));
        }
        Ok(Self {
            coefficient,
            alpha_power,
            chern_degree,
            theta_degree: dimension - alpha_power - chern_degree,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargeKind {
    Manifold,
    Bundle,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChargeTerms {
    Manifold(Vec<ManifoldChargeTerm>),
    Bundle(Vec<BundleChargeTerm>),
}

/// A central charge together with the dimension it was built for.
///
/// `theta` holds the auxiliary class by degree; its representatives are
/// `θ_l = theta[l] · ω^l`. An empty list means `Θ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CentralChargeSpec {
    pub name: String,
    pub dimension: usize,
    pub terms: ChargeTerms,
    pub theta: Vec<Coefficient>,
}

impl CentralChargeSpec {
    pub fn manifold(name: &str, dimension: usize, terms: Vec<ManifoldChargeTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid(
                "central charge needs at least one term".into(),
            ));
        }
        Ok(Self {
            name: name.to_string(),
            dimension,
            terms: ChargeTerms::Manifold(terms),
            theta: Vec::new(),
        })
    }

    pub fn bundle(
        name: &str,
        dimension: usize,
        terms: Vec<BundleChargeTerm>,
        theta: Vec<Coefficient>,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Invalid(
                "central charge needs at least one term".into(),
            ));
        }
        if theta.len() > dimension + 1 {
            return Err(Error::DegreeMismatch(format!(
                "theta has {} components but dimension is {dimension}",
                theta.len()
            )));
        }
        Ok(Self {
            name: name.to_string(),
            dimension,
            terms: ChargeTerms::Bundle(terms),
            theta,
        })
    }

    pub fn kind(&self) -> ChargeKind {
        match self.terms {
            ChargeTerms::Manifold(_) => ChargeKind::Manifold,
            ChargeTerms::Bundle(_) => ChargeKind::Bundle,
        }
    }

    pub fn manifold_terms(&self) -> Result<&[ManifoldChargeTerm]> {
        match &self.terms {
            ChargeTerms::Manifold(t) => Ok(t),
            ChargeTerms::Bundle(_) => Err(Error::Invalid(format!(
                "charge `{}` is a bundle charge",
                self.name
            ))),
        }
    }

    pub fn bundle_terms(&self) -> Result<&[BundleChargeTerm]> {
        match &self.terms {
            ChargeTerms::Bundle(t) => Ok(t),
            ChargeTerms::Manifold(_) => Err(Error::Invalid(format!(
                "charge `{}` is a manifold charge",
                self.name
            ))),
        }
    }

    /// Component `Θ_l`; `Θ = 1` when no components were declared.
    pub fn theta_component(&self, degree: usize) -> Coefficient {
        if self.theta.is_empty() {
            return if degree == 0 {
                Coefficient::int(1, 0)
            } else {
                Coefficient::int(0, 0)
            };
        }
        self.theta
            .get(degree)
            .cloned()
            .unwrap_or_else(|| Coefficient::int(0, 0))
    }

    /// Splits the term list at `at`, for linearity checks.
    pub fn split(&self, at: usize) -> (Self, Self) {
        let mut a = self.clone();
        let mut b = self.clone();
        match &self.terms {
            ChargeTerms::Manifold(t) => {
                a.terms = ChargeTerms::Manifold(t[..at].to_vec());
                b.terms = ChargeTerms::Manifold(t[at..].to_vec());
            }
            ChargeTerms::Bundle(t) => {
                a.terms = ChargeTerms::Bundle(t[..at].to_vec());
                b.terms = ChargeTerms::Bundle(t[at..].to_vec());
            }
        }
        (a, b)
    }

    pub fn term_count(&self) -> usize {
        match &self.terms {
            ChargeTerms::Manifold(t) => t.len(),
            ChargeTerms::Bundle(t) => t.len(),
        }
    }

    pub fn scaled(&self, factor: &Coefficient) -> Self {
        let mut out = self.clone();
        match &mut out.terms {
            ChargeTerms::Manifold(t) => {
                for term in t {
                    term.coefficient = term.coefficient.scale(factor);
                }
            }
            ChargeTerms::Bundle(t) => {
                for term in t {
                    term.coefficient = term.coefficient.scale(factor);
                }
            }
        }
        out
    }
}

/// A rational multiple of `scale^power`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Period {
    pub rational: Rational,
    pub scale_power: usize,
}

impl Period {
    fn value(&self, scale: f64) -> f64 {
        self.rational.to_f64().unwrap_or(f64::NAN) * scale.powi(self.scale_power as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaseModel {
    /// `T^{2n}` with `ω₀ = Σ_a A_a dx_a ∧ dy_a` on the unit lattice.
    Torus { areas: Vec<Rational> },
    /// CP¹ with `∫α = area · scale`.
    ProjectiveLine { area: Rational },
}

/// Topological data of a Hermitian bundle.
///
/// On tori the bundle is `L ⊗ C^rank` for a line bundle with
/// `c₁(L) = Σ_a c_a [dx_a ∧ dy_a]`; on CP¹ it is `O(degree) ⊗ C^rank`.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleTopology {
    pub rank: usize,
    pub line_chern: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelTopology {
    pub dimension: usize,
    pub base: BaseModel,
    pub alpha_scale: f64,
    pub bundle: Option<BundleTopology>,
}

impl ModelTopology {
    pub fn torus(areas: Vec<Rational>) -> Self {
        Self {
            dimension: areas.len(),
            base: BaseModel::Torus { areas },
            alpha_scale: 1.0,
            bundle: None,
        }
    }

    /// Unit areas on every factor.
    pub fn unit_torus(dimension: usize) -> Self {
        Self::torus(vec![Rational::from_integer(1); dimension])
    }

    pub fn projective_line(area: Rational, alpha_scale: f64) -> Self {
        Self {
            dimension: 1,
            base: BaseModel::ProjectiveLine { area },
            alpha_scale,
            bundle: None,
        }
    }

    /// CP¹ in symplectic coordinates, `ω = dx ∧ dθ`, total area `4π`.
    pub fn symplectic_cp1() -> Self {
        Self::projective_line(Rational::from_integer(1), 4.0 * PI)
    }

    pub fn with_bundle(mut self, rank: usize, line_chern: Vec<Rational>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Invalid("bundle rank must be positive".into()));
        }
        let expected = match self.base {
            BaseModel::Torus { .. } => self.dimension,
            BaseModel::ProjectiveLine { .. } => 1,
        };
        if line_chern.len() != expected {
            return Err(Error::DegreeMismatch(format!(
                "expected {expected} Chern entries, got {}",
                line_chern.len()
            )));
        }
        self.bundle = Some(BundleTopology { rank, line_chern });
        Ok(self)
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.base, BaseModel::Torus { .. })
    }

    /// `∫ αⁿ`.
    pub fn volume(&self) -> Period {
        match &self.base {
            BaseModel::Torus { areas } => Period {
                rational: Rational::from_integer(factorial(self.dimension))
                    * areas
                        .iter()
                        .fold(Rational::from_integer(1), |acc, a| acc * a),
                scale_power: self.dimension,
            },
            BaseModel::ProjectiveLine { area } => Period {
                rational: *area,
                scale_power: 1,
            },
        }
    }

    pub fn volume_f64(&self) -> f64 {
        self.volume().value(self.alpha_scale)
    }

    /// `∫ α^j · ch_{k_1}(X) ⋯ ch_{k_r}(X)`.
    pub fn manifold_intersection(&self, alpha_power: usize, chern: &[usize]) -> Result<Period> {
        let degree = alpha_power + chern.iter().sum::<usize>();
        if degree != self.dimension {
            return Err(Error::DegreeMismatch(format!(
                "integrand of degree {degree} on a {}-dimensional model",
                self.dimension
            )));
        }
        let zero = Period {
            rational: Rational::zero(),
            scale_power: 0,
        };
        match &self.base {
            BaseModel::Torus { .. } => Ok(if chern.is_empty() {
                self.volume()
            } else {
                zero
            }),
            BaseModel::ProjectiveLine { .. } => Ok(match chern {
                [] => self.volume(),
                [1] => Period {
                    rational: Rational::from_integer(2),
                    scale_power: 0,
                },
                _ => zero,
            }),
        }
    }

    fn bundle_topology(&self) -> Result<&BundleTopology> {
        self.bundle
            .as_ref()
            .ok_or_else(|| Error::Invalid("model topology carries no bundle".into()))
    }

    /// `∫ α^m · ch_k(E)` with `m + k = n`.
    pub fn bundle_intersection(&self, alpha_power: usize, chern_degree: usize) -> Result<Period> {
        let bundle = self.bundle_topology()?;
        if alpha_power + chern_degree != self.dimension {
            return Err(Error::DegreeMismatch(format!(
                "integrand of degree {} on a {}-dimensional model",
                alpha_power + chern_degree,
                self.dimension
            )));
        }
        let rank = Rational::from_integer(bundle.rank as i64);
        match &self.base {
            BaseModel::Torus { areas } => {
                // ch_k(L ⊗ C^r) = r c^k / k!, and the coefficient of the
                // fundamental class in (Σ A x)^m (Σ c x)^k is
                // m! k! Σ_{|S| = m} Π_{S} A Π_{S^c} c.
                let n = self.dimension;
                let mut sum = Rational::zero();
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize != alpha_power {
                        continue;
                    }
                    let mut prod = Rational::from_integer(1);
                    for a in 0..n {
                        prod *= if mask & (1 << a) != 0 {
                            areas[a]
                        } else {
                            bundle.line_chern[a]
                        };
                    }
                    sum += prod;
                }
                Ok(Period {
                    rational: rank * sum * Rational::from_integer(factorial(alpha_power)),
                    scale_power: alpha_power,
                })
            }
            BaseModel::ProjectiveLine { area } => Ok(match (alpha_power, chern_degree) {
                (1, 0) => Period {
                    rational: rank * area,
                    scale_power: 1,
                },
                (0, 1) => Period {
                    rational: rank * bundle.line_chern[0],
                    scale_power: 0,
                },
                _ => unreachable!("degree already checked"),
            }),
        }
    }

    /// `deg E = ∫ c₁(E) · α^{n-1}`.
    pub fn degree(&self) -> Result<f64> {
        Ok(self
            .bundle_intersection(self.dimension - 1, 1)?
            .value(self.alpha_scale))
    }

    pub fn rank(&self) -> Result<usize> {
        Ok(self.bundle_topology()?.rank)
    }
}

/// Value of a central charge; `exact` is present when every ingredient was.
#[derive(Clone, Debug, PartialEq)]
pub struct ChargeValue {
    pub value: Complex64,
    pub exact: Option<GaussianRational>,
}

impl ChargeValue {
    pub fn is_zero(&self) -> bool {
        match &self.exact {
            Some(z) => z.re.is_zero() && z.im.is_zero(),
            None => self.value.norm() == 0.0,
        }
    }
}

struct Accumulator {
    value: Complex64,
    exact: Option<GaussianRational>,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            value: Complex64::zero(),
            exact: Some(Complex::new(Rational::zero(), Rational::zero())),
        }
    }

    fn add(&mut self, coefficient: &Coefficient, period: Period, scale: f64) {
        self.value += coefficient.value() * period.value(scale);
        let exact_period = period.scale_power == 0 || scale == 1.0 || period.rational.is_zero();
        self.exact = match (self.exact.take(), coefficient.as_exact()) {
            (Some(acc), Some(c)) if exact_period => {
                Some(acc + c * Complex::new(period.rational, Rational::zero()))
            }
            _ => None,
        };
    }

    fn finish(self) -> ChargeValue {
        let value = match &self.exact {
            Some(z) => gaussian_to_f64(z),
            None => self.value,
        };
        ChargeValue {
            value,
            exact: self.exact,
        }
    }
}

/// Value of the charge without the non-vanishing check; used for linearity.
pub fn evaluate_charge_unchecked(
    spec: &CentralChargeSpec,
    topo: &ModelTopology,
) -> Result<ChargeValue> {
    if spec.dimension != topo.dimension {
        return Err(Error::DegreeMismatch(format!(
            "charge built for dimension {} evaluated on dimension {}",
            spec.dimension, topo.dimension
        )));
    }
    let mut acc = Accumulator::new();
    match &spec.terms {
        ChargeTerms::Manifold(terms) => {
            for t in terms {
                let period = topo.manifold_intersection(t.alpha_power, &t.chern_multi_index)?;
                acc.add(&t.coefficient, period, topo.alpha_scale);
            }
        }
        ChargeTerms::Bundle(terms) => {
            for t in terms {
                let theta = spec.theta_component(t.theta_degree);
                let period =
                    topo.bundle_intersection(t.alpha_power + t.theta_degree, t.chern_degree)?;
                acc.add(&t.coefficient.scale(&theta), period, topo.alpha_scale);
            }
        }
    }
    Ok(acc.finish())
}

/// `Z(X, α)` or `Z(E)`; fails when the value is exactly zero.
pub fn evaluate_charge(spec: &CentralChargeSpec, topo: &ModelTopology) -> Result<ChargeValue> {
    let value = evaluate_charge_unchecked(spec, topo)?;
    if value.is_zero() {
        return Err(Error::ZeroCharge);
    }
    Ok(value)
}

/// `arg z` on the branch `(-π, π]`.
pub fn phase(z: Complex64) -> Result<f64> {
    if z.re == 0.0 && z.im == 0.0 {
        return Err(Error::ZeroCharge);
    }
    let angle = z.im.atan2(z.re);
    Ok(if angle <= -PI { PI } else { angle })
}

/// `Ŝ = n ∫ c₁ · α^{n-1} / ∫ αⁿ`.
pub fn average_scalar(topo: &ModelTopology) -> Result<f64> {
    let n = topo.dimension;
    let volume = topo.volume_f64();
    if volume <= 0.0 {
        return Err(Error::Invalid("∫αⁿ must be positive".into()));
    }
    let c1 = topo
        .manifold_intersection(n - 1, &[1])?
        .value(topo.alpha_scale);
    Ok(n as f64 * c1 / volume)
}

/// Slope constant of the Hermitian Yang–Mills equation,
/// `λ = n deg E / (rk E ∫αⁿ)`; equals `n deg E / rk E` for unit volume.
pub fn hym_slope(topo: &ModelTopology) -> Result<f64> {
    let n = topo.dimension as f64;
    let rank = topo.rank()? as f64;
    Ok(n * topo.degree()? / (rank * topo.volume_f64()))
}

pub const BUILTIN_NAMES: [&str; 4] = ["csck", "exp", "dhym", "hym"];

/// Built-in charge by (case-insensitive) name.
pub fn builtin_charge(name: &str, dimension: usize) -> Result<CentralChargeSpec> {
    if dimension == 0 {
        return Err(Error::Invalid("dimension must be positive".into()));
    }
    let n = dimension;
    match name.to_ascii_lowercase().as_str() {
        "csck" => CentralChargeSpec::manifold(
            "cscK",
            n,
            vec![
                ManifoldChargeTerm::new(Coefficient::int(0, 1), n, vec![], n)?,
                ManifoldChargeTerm::new(Coefficient::int(-1, 0), n - 1, vec![1], n)?,
            ],
        ),
        "exp" => {
            // ∫ e^{-iα} ch(X); ch₀(X) = n folds into the pure α-power term.
            let mut terms = Vec::new();
            for j in 0..=n {
                let coefficient = exp_minus_i_coefficient(j);
                if j == n {
                    let rank = Coefficient::int(n as i64, 0);
                    terms.push(ManifoldChargeTerm::new(
                        coefficient.scale(&rank),
                        n,
                        vec![],
                        n,
                    )?);
                } else {
                    terms.push(ManifoldChargeTerm::new(coefficient, j, vec![n - j], n)?);
                }
            }
            CentralChargeSpec::manifold("exp", n, terms)
        }
        "dhym" => {
            let terms = (0..=n)
                .map(|j| BundleChargeTerm::new(exp_minus_i_coefficient(j), j, n - j, n))
                .collect::<Result<Vec<_>>>()?;
            CentralChargeSpec::bundle("dHYM", n, terms, Vec::new())
        }
        "hym" => CentralChargeSpec::bundle(
            "HYM",
            n,
            vec![
                BundleChargeTerm::new(Coefficient::int(0, 1), n, 0, n)?,
                BundleChargeTerm::new(Coefficient::int(-1, 0), n - 1, 1, n)?,
            ],
            Vec::new(),
        ),
        _ => Err(Error::NameError(name.to_string())),
    }
}

/// All built-in charges for the given dimension.
pub fn builtin_charges(dimension: usize) -> Result<Vec<CentralChargeSpec>> {
    BUILTIN_NAMES
        .iter()
        .map(|name| builtin_charge(name, dimension))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn csck_on_cp1_with_unit_area() {
        let topo = ModelTopology::projective_line(r(1), 1.0);
        let spec = builtin_charge("cscK", 1).unwrap();
        let z = evaluate_charge(&spec, &topo).unwrap();
        assert_eq!(z.exact, Some(Complex::new(r(-2), r(1))));
        assert_eq!(phase(z.value).unwrap(), PI - (0.5f64).atan());
    }

    #[test]
    fn dhym_on_t2_is_minus_i() {
        let topo = ModelTopology::unit_torus(1)
            .with_bundle(1, vec![r(0)])
            .unwrap();
        let spec = builtin_charge("dhym", 1).unwrap();
        let z = evaluate_charge(&spec, &topo).unwrap();
        assert_eq!(z.exact, Some(Complex::new(r(0), r(-1))));
        assert_eq!(phase(z.value).unwrap(), -PI / 2.0);
    }

    #[test]
    fn pure_chern_charge_vanishes_on_torus() {
        let spec = CentralChargeSpec::manifold(
            "c1c1",
            2,
            vec![
                ManifoldChargeTerm::new(Coefficient::int(1, 0), 0, vec![1, 1], 2).unwrap(),
                ManifoldChargeTerm::new(Coefficient::int(0, 3), 0, vec![2], 2).unwrap(),
            ],
        )
        .unwrap();
        let err = evaluate_charge(&spec, &ModelTopology::unit_torus(2)).unwrap_err();
        assert!(matches!(err, Error::ZeroCharge));
    }

    #[test]
    fn phase_examples() {
        assert_eq!(phase(Complex64::new(0.0, -1.0)).unwrap(), -PI / 2.0);
        assert_eq!(phase(Complex64::new(1.0, 0.0)).unwrap(), 0.0);
        assert_eq!(phase(Complex64::new(-1.0, 0.0)).unwrap(), PI);
        assert_eq!(phase(Complex64::new(-1.0, -0.0)).unwrap(), PI);
        assert!(matches!(
            phase(Complex64::new(0.0, 0.0)),
            Err(Error::ZeroCharge)
        ));
    }

    #[test]
    fn average_scalar_examples() {
        let unit = ModelTopology::projective_line(r(1), 1.0);
        assert_eq!(average_scalar(&unit).unwrap(), 2.0);
        assert_eq!(average_scalar(&ModelTopology::unit_torus(2)).unwrap(), 0.0);
        let symplectic = ModelTopology::symplectic_cp1();
        assert!((average_scalar(&symplectic).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn hym_slope_examples() {
        let t2 = ModelTopology::unit_torus(1)
            .with_bundle(1, vec![r(1)])
            .unwrap();
        assert_eq!(hym_slope(&t2).unwrap(), 1.0);
        // Unit-volume T⁴ (areas 1 and 1/2, so ∫α² = 1), rank 2, deg E = 3.
        let t4 = ModelTopology::torus(vec![r(1), Rational::new(1, 2)])
            .with_bundle(2, vec![r(1), r(1)])
            .unwrap();
        assert_eq!(t4.volume_f64(), 1.0);
        assert_eq!(t4.degree().unwrap(), 3.0);
        assert_eq!(hym_slope(&t4).unwrap(), 3.0);
        let trivial = ModelTopology::unit_torus(2)
            .with_bundle(2, vec![r(0), r(0)])
            .unwrap();
        assert_eq!(hym_slope(&trivial).unwrap(), 0.0);
    }

    #[test]
    fn builtin_lookup() {
        let dhym = builtin_charge("dhym", 2).unwrap();
        let terms = dhym.bundle_terms().unwrap();
        let shape: Vec<_> = terms
            .iter()
            .map(|t| {
                (
                    t.coefficient.value(),
                    t.alpha_power,
                    t.chern_degree,
                    t.theta_degree,
                )
            })
            .collect();
        assert_eq!(
            shape,
            vec![
                (Complex64::new(1.0, 0.0), 0, 2, 0),
                (Complex64::new(0.0, -1.0), 1, 1, 0),
                (Complex64::new(-0.5, 0.0), 2, 0, 0),
            ]
        );
        let csck = builtin_charge("cscK", 1).unwrap();
        let terms = csck.manifold_terms().unwrap();
        assert_eq!(terms[0].coefficient, Coefficient::int(0, 1));
        assert_eq!(
            (terms[0].alpha_power, terms[0].chern_multi_index.clone()),
            (1, vec![])
        );
        assert_eq!(terms[1].coefficient, Coefficient::int(-1, 0));
        assert_eq!(
            (terms[1].alpha_power, terms[1].chern_multi_index.clone()),
            (0, vec![1])
        );
        assert!(matches!(
            builtin_charge("nope", 1),
            Err(Error::NameError(_))
        ));
    }

    #[test]
    fn degree_rule_enforced_at_construction() {
        assert!(ManifoldChargeTerm::new(Coefficient::int(1, 0), 1, vec![1], 1).is_err());
        assert!(ManifoldChargeTerm::new(Coefficient::int(1, 0), 0, vec![0, 1], 1).is_err());
        assert!(BundleChargeTerm::new(Coefficient::int(1, 0), 2, 1, 2).is_err());
        let t = BundleChargeTerm::new(Coefficient::int(1, 0), 0, 1, 2).unwrap();
        assert_eq!(t.theta_degree, 1);
    }

    #[test]
    fn exp_charge_on_t4() {
        let spec = builtin_charge("exp", 2).unwrap();
        let z = evaluate_charge(&spec, &ModelTopology::unit_torus(2)).unwrap();
        // -(n/2) ∫α² with ∫α² = 2.
        assert_eq!(z.exact, Some(Complex::new(r(-2), r(0))));
    }

    #[test]
    fn coefficient_exactness() {
        assert!(matches!(
            Coefficient::from_f64(-0.5, 0.25),
            Coefficient::Exact(_)
        ));
        assert!(matches!(
            Coefficient::from_f64(PI, 0.0),
            Coefficient::Float(_)
        ));
    }
}
