//! Grid-sampled complex differential forms with matrix coefficients.
//!
//! A monomial is `dz^I ∧ dz̄^J` with `I`, `J` increasing index sets stored as
//! bit masks. Each component holds an `r × r` matrix per grid point, laid out
//! entry-major: entry `(i, j)` occupies `values[(i * r + j) * npts ..][..npts]`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mask = u8;

/// What the matrix coefficients of a field act on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndoShape {
    Scalar,
    /// `End(TX^{1,0})`, rank equal to the complex dimension.
    Tangent,
    /// `End(E)` of the given rank.
    Bundle(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub dim: usize,
    pub npts: usize,
    pub shape: EndoShape,
    pub comps: BTreeMap<(Mask, Mask), Vec<Complex64>>,
}

pub fn full_mask(n: usize) -> Mask {
    ((1u16 << n) - 1) as Mask
}

fn popcount(m: Mask) -> usize {
    m.count_ones() as usize
}

/// Sign of the permutation sorting the concatenation of `a` then `b`.
fn merge_sign(a: Mask, b: Mask) -> f64 {
    let mut inversions = 0;
    for i in 0..8 {
        if a & (1 << i) != 0 {
            inversions += (b & ((1u16 << i) - 1) as Mask).count_ones();
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `(dz^I ∧ dz̄^J) ∧ (dz^K ∧ dz̄^L) = sign · dz^{I∪K} ∧ dz̄^{J∪L}`, or `None`.
pub fn wedge_monomials(a: (Mask, Mask), b: (Mask, Mask)) -> Option<((Mask, Mask), f64)> {
    let (i, j) = a;
    let (k, l) = b;
    if i & k != 0 || j & l != 0 {
        return None;
    }
    let mut sign = if (popcount(j) * popcount(k)).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    sign *= merge_sign(i, k) * merge_sign(j, l);
    Some(((i | k, j | l), sign))
}

impl TensorField {
    pub fn rank(&self) -> usize {
        match self.shape {
            EndoShape::Scalar => 1,
            EndoShape::Tangent => self.dim,
            EndoShape::Bundle(r) => r,
        }
    }

    fn block(&self) -> usize {
        let r = self.rank();
        r * r * self.npts
    }

    pub fn zero(dim: usize, npts: usize, shape: EndoShape) -> Self {
        Self {
            dim,
            npts,
            shape,
            comps: BTreeMap::new(),
        }
    }

    /// Scalar 0-form.
    pub fn function(dim: usize, values: Vec<Complex64>) -> Self {
        let npts = values.len();
        let mut f = Self::zero(dim, npts, EndoShape::Scalar);
        f.comps.insert((0, 0), values);
        f
    }

    pub fn real_function(dim: usize, values: &[f64]) -> Self {
        Self::function(
            dim,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn constant(dim: usize, npts: usize, value: Complex64) -> Self {
        Self::function(dim, vec![value; npts])
    }

    /// Identity endomorphism as a 0-form.
    pub fn identity(dim: usize, npts: usize, shape: EndoShape) -> Self {
        let mut f = Self::zero(dim, npts, shape);
        let r = f.rank();
        let mut v = vec![Complex64::new(0.0, 0.0); r * r * npts];
        for i in 0..r {
            v[(i * r + i) * npts..(i * r + i + 1) * npts].fill(Complex64::new(1.0, 0.0));
        }
        f.comps.insert((0, 0), v);
        f
    }

    /// Single-monomial scalar form `f dz^I ∧ dz̄^J`.
    pub fn monomial(dim: usize, key: (Mask, Mask), values: Vec<Complex64>) -> Self {
        let npts = values.len();
        let mut f = Self::zero(dim, npts, EndoShape::Scalar);
        f.comps.insert(key, values);
        f
    }

    /// Builds an endomorphism-valued monomial from per-entry grids.
    pub fn from_entries(
        dim: usize,
        npts: usize,
        shape: EndoShape,
        key: (Mask, Mask),
        entries: impl Fn(usize, usize) -> Vec<Complex64>,
    ) -> Self {
        let mut f = Self::zero(dim, npts, shape);
        let r = f.rank();
        let mut v = Vec::with_capacity(r * r * npts);
        for i in 0..r {
            for j in 0..r {
                let e = entries(i, j);
                assert_eq!(e.len(), npts, "entry grid has wrong length");
                v.extend(e);
            }
        }
        f.comps.insert(key, v);
        f
    }

    pub fn component(&self, key: (Mask, Mask)) -> Option<&[Complex64]> {
        self.comps.get(&key).map(|v| v.as_slice())
    }

    /// Entry `(i, j)` of component `key`, zeros if absent.
    pub fn entry(&self, key: (Mask, Mask), i: usize, j: usize) -> Vec<Complex64> {
        let r = self.rank();
        match self.comps.get(&key) {
            Some(v) => v[(i * r + j) * self.npts..(i * r + j + 1) * self.npts].to_vec(),
            None => vec![Complex64::new(0.0, 0.0); self.npts],
        }
    }

    pub fn add_component(&mut self, key: (Mask, Mask), values: &[Complex64], factor: Complex64) {
        let len = self.block();
        assert_eq!(values.len(), len, "component has wrong length");
        let slot = self
            .comps
            .entry(key)
            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); len]);
        for (s, v) in slot.iter_mut().zip(values) {
            *s += factor * v;
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.npts != other.npts {
            return Err(Error::Shape(format!(
                "fields on different grids ({}, {}) vs ({}, {})",
                self.dim, self.npts, other.dim, other.npts
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: Complex64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "cannot add {:?} and {:?} fields",
                self.shape, other.shape
            )));
        }
        let mut out = self.clone();
        for (key, v) in &other.comps {
            out.add_component(*key, v, factor);
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.comps.values_mut() {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
        out
    }

    /// Pointwise multiplication by a scalar function.
    pub fn mul_function(&self, f: &[Complex64]) -> Self {
        assert_eq!(f.len(), self.npts);
        let mut out = self.clone();
        for v in out.comps.values_mut() {
            for chunk in v.chunks_mut(self.npts) {
                for (x, s) in chunk.iter_mut().zip(f) {
                    *x *= s;
                }
            }
        }
        out
    }

    /// Wedge product; coefficients multiply as matrices, a scalar factor
    /// broadcasts against an endomorphism-valued one.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let shape = match (self.shape, other.shape) {
            (EndoShape::Scalar, s) | (s, EndoShape::Scalar) => s,
            (a, b) if a == b => a,
            (a, b) => {
                return Err(Error::Shape(format!(
                    "cannot multiply {a:?} by {b:?} coefficients"
                )))
            }
        };
        let mut out = Self::zero(self.dim, self.npts, shape);
        let r = out.rank();
        let np = self.npts;
        for (ka, va) in &self.comps {
            for (kb, vb) in &other.comps {
                let Some((key, sign)) = wedge_monomials(*ka, *kb) else {
                    continue;
                };
                let mut prod = vec![Complex64::new(0.0, 0.0); r * r * np];
                let ra = self.rank();
                let rb = other.rank();
                for i in 0..r {
                    for j in 0..r {
                        let dst = &mut prod[(i * r + j) * np..(i * r + j + 1) * np];
                        match (ra, rb) {
                            (1, 1) => mul_acc(dst, &va[..np], &vb[..np]),
                            (1, _) => mul_acc(dst, &va[..np], &vb[(i * r + j) * np..][..np]),
                            (_, 1) => mul_acc(dst, &va[(i * r + j) * np..][..np], &vb[..np]),
                            _ => {
                                for k in 0..r {
                                    mul_acc(
                                        dst,
                                        &va[(i * r + k) * np..][..np],
                                        &vb[(k * r + j) * np..][..np],
                                    );
                                }
                            }
                        }
                    }
                }
                out.add_component(key, &prod, Complex64::new(sign, 0.0));
            }
        }
        Ok(out)
    }

    /// `self ∧ self ∧ ⋯` with `k` factors; `k = 0` gives the identity 0-form.
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut out = Self::identity(self.dim, self.npts, self.shape);
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    /// Pointwise matrix trace; the result is scalar-valued.
    pub fn trace(&self) -> Self {
        let r = self.rank();
        let np = self.npts;
        let mut out = Self::zero(self.dim, np, EndoShape::Scalar);
        for (key, v) in &self.comps {
            let mut t = vec![Complex64::new(0.0, 0.0); np];
            for i in 0..r {
                for (x, y) in t.iter_mut().zip(&v[(i * r + i) * np..][..np]) {
                    *x += y;
                }
            }
            out.comps.insert(*key, t);
        }
        out
    }

    /// Complex conjugation of the form combined with the pointwise adjoint of
    /// the coefficient matrix: `(f dz^I dz̄^J)^* = f^† (-1)^{|I||J|} dz^J dz̄^I`.
    pub fn adjoint(&self) -> Self {
        let r = self.rank();
        let np = self.npts;
        let mut out = Self::zero(self.dim, np, self.shape);
        for (&(i_mask, j_mask), v) in &self.comps {
            let sign = if (popcount(i_mask) * popcount(j_mask)).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            let mut w = vec![Complex64::new(0.0, 0.0); r * r * np];
            for a in 0..r {
                for b in 0..r {
                    let src = &v[(b * r + a) * np..][..np];
                    let dst = &mut w[(a * r + b) * np..][..np];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d = s.conj() * sign;
                    }
                }
            }
            out.comps.insert((j_mask, i_mask), w);
        }
        out
    }

    /// Keeps only the components of total degree `deg`.
    pub fn degree_part(&self, deg: usize) -> Self {
        let mut out = self.clone();
        out.comps
            .retain(|&(i, j), _| popcount(i) + popcount(j) == deg);
        out
    }

    /// Keeps only the components of bidegree `(p, q)`.
    pub fn bidegree_part(&self, p: usize, q: usize) -> Self {
        let mut out = self.clone();
        out.comps
            .retain(|&(i, j), _| popcount(i) == p && popcount(j) == q);
        out
    }

    /// Coefficient of `dz^{1..n} ∧ dz̄^{1..n}` (zeros if absent).
    pub fn top_coefficient(&self) -> Vec<Complex64> {
        let f = full_mask(self.dim);
        match self.comps.get(&(f, f)) {
            Some(v) => v.clone(),
            None => vec![Complex64::new(0.0, 0.0); self.block()],
        }
    }

    /// Ratio of the top coefficient against a nowhere-vanishing scalar top
    /// form, as an endomorphism-valued 0-form.
    pub fn ratio_to(&self, volume: &Self) -> Result<Self> {
        self.check_compatible(volume)?;
        if volume.shape != EndoShape::Scalar {
            return Err(Error::Shape("reference top form must be scalar".into()));
        }
        let denom = volume.top_coefficient();
        let mut out = Self::zero(self.dim, self.npts, self.shape);
        let mut top = self.top_coefficient();
        for chunk in top.chunks_mut(self.npts) {
            for (x, d) in chunk.iter_mut().zip(&denom) {
                *x /= d;
            }
        }
        out.comps.insert((0, 0), top);
        Ok(out)
    }

    /// Values of a scalar 0-form.
    pub fn values(&self) -> Vec<Complex64> {
        self.entry((0, 0), 0, 0)
    }

    /// Largest absolute value over all stored entries.
    pub fn sup_norm(&self) -> f64 {
        self.comps
            .values()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, x| m.max(x.norm()))
    }

    /// Applies `d` given a derivative oracle: `deriv(f, a, false)` is `∂_a f`
    /// and `deriv(f, a, true)` is `∂_ā f`.
    pub fn exterior_derivative(
        &self,
        deriv: &dyn Fn(&[Complex64], usize, bool) -> Vec<Complex64>,
    ) -> Self {
        let mut out = Self::zero(self.dim, self.npts, self.shape);
        let np = self.npts;
        for (&key, v) in &self.comps {
            for a in 0..self.dim {
                for bar in [false, true] {
                    let one = if bar { (0, 1 << a) } else { (1 << a, 0) };
                    let Some((new_key, sign)) = wedge_monomials(one, key) else {
                        continue;
                    };
                    let mut dv = Vec::with_capacity(v.len());
                    for chunk in v.chunks(np) {
                        dv.extend(deriv(chunk, a, bar));
                    }
                    out.add_component(new_key, &dv, Complex64::new(sign, 0.0));
                }
            }
        }
        out
    }

    /// Pointwise commutator `[self, other]` of endomorphism-valued forms,
    /// graded: `a ∧ b − (−1)^{|a||b|} b ∧ a` for homogeneous degrees.
    pub fn graded_commutator(
        &self,
        other: &Self,
        deg_self: usize,
        deg_other: usize,
    ) -> Result<Self> {
        let ab = self.wedge(other)?;
        let ba = other.wedge(self)?;
        let sign = if (deg_self * deg_other).is_multiple_of(2) {
            -1.0
        } else {
            1.0
        };
        ab.axpy(Complex64::new(sign, 0.0), &ba)
    }
}

fn mul_acc(dst: &mut [Complex64], a: &[Complex64], b: &[Complex64]) {
    for ((d, x), y) in dst.iter_mut().zip(a).zip(b) {
        *d += x * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn monomial_signs() {
        // dz1 ∧ dz̄1 vs dz̄1 ∧ dz1.
        assert_eq!(wedge_monomials((1, 0), (0, 1)), Some(((1, 1), 1.0)));
        assert_eq!(wedge_monomials((0, 1), (1, 0)), Some(((1, 1), -1.0)));
        // dz2 ∧ dz1 = −dz1 ∧ dz2.
        assert_eq!(wedge_monomials((2, 0), (1, 0)), Some(((3, 0), -1.0)));
        assert_eq!(wedge_monomials((1, 0), (1, 0)), None);
        // (dz1 dz̄1) ∧ (dz2 dz̄2) = dz1 dz̄1 dz2 dz̄2 = −dz1 dz2 dz̄1 dz̄2.
        assert_eq!(wedge_monomials((1, 1), (2, 2)), Some(((3, 3), -1.0)));
    }

    #[test]
    fn kahler_form_power_on_c2() {
        // ω = i (dz1 dz̄1 + dz2 dz̄2); ω² = 2 i² dz1 dz̄1 dz2 dz̄2 = 2 dz1dz2dz̄1dz̄2.
        let mut w = TensorField::zero(2, 1, EndoShape::Scalar);
        w.add_component((1, 1), &[c(0.0, 1.0)], c(1.0, 0.0));
        w.add_component((2, 2), &[c(0.0, 1.0)], c(1.0, 0.0));
        let w2 = w.power(2).unwrap();
        assert_eq!(w2.top_coefficient(), vec![c(2.0, 0.0)]);
    }

    #[test]
    fn matrix_coefficients_multiply_in_order() {
        let a = TensorField::from_entries(1, 1, EndoShape::Bundle(2), (0, 0), |i, j| {
            vec![c((i * 2 + j) as f64, 0.0)]
        });
        let b = TensorField::from_entries(1, 1, EndoShape::Bundle(2), (0, 0), |i, j| {
            vec![c(if i == 0 && j == 1 { 1.0 } else { 0.0 }, 0.0)]
        });
        let ab = a.wedge(&b).unwrap();
        // a = [[0,1],[2,3]], b = [[0,1],[0,0]] → ab = [[0,0],[0,2]].
        assert_eq!(ab.entry((0, 0), 1, 1), vec![c(2.0, 0.0)]);
        assert_eq!(ab.entry((0, 0), 0, 1), vec![c(0.0, 0.0)]);
        let ba = b.wedge(&a).unwrap();
        assert_eq!(ba.entry((0, 0), 0, 0), vec![c(2.0, 0.0)]);
    }

    #[test]
    fn adjoint_of_kahler_form_is_itself() {
        let mut w = TensorField::zero(1, 1, EndoShape::Scalar);
        w.add_component((1, 1), &[c(0.0, 1.0)], c(1.0, 0.0));
        assert_eq!(w.adjoint(), w);
    }

    proptest! {
        #[test]
        fn wedge_is_graded_commutative(a in prop::collection::vec(-1.0f64..1.0, 8),
                                       b in prop::collection::vec(-1.0f64..1.0, 8)) {
            // Random scalar 1-forms on C²: α ∧ β = −β ∧ α.
            let keys = [(1, 0), (2, 0), (0, 1), (0, 2)];
            let mut x = TensorField::zero(2, 1, EndoShape::Scalar);
            let mut y = TensorField::zero(2, 1, EndoShape::Scalar);
            for (i, key) in keys.iter().enumerate() {
                x.add_component(*key, &[c(a[2 * i], a[2 * i + 1])], c(1.0, 0.0));
                y.add_component(*key, &[c(b[2 * i], b[2 * i + 1])], c(1.0, 0.0));
            }
            let xy = x.wedge(&y).unwrap();
            let yx = y.wedge(&x).unwrap();
            prop_assert!(xy.add(&yx).unwrap().sup_norm() < 1e-14);
        }

        #[test]
        fn wedge_is_associative(a in prop::collection::vec(-1.0f64..1.0, 12)) {
            let keys = [(1, 0), (2, 0), (0, 1), (0, 2)];
            let mut forms = Vec::new();
            for f in 0..3 {
                let mut x = TensorField::zero(2, 1, EndoShape::Scalar);
                for (i, key) in keys.iter().enumerate() {
                    x.add_component(*key, &[c(a[4 * f + i], 0.0)], c(1.0, 0.0));
                }
                forms.push(x);
            }
            let l = forms[0].wedge(&forms[1]).unwrap().wedge(&forms[2]).unwrap();
            let r = forms[0].wedge(&forms[1].wedge(&forms[2]).unwrap()).unwrap();
            prop_assert!(l.sub(&r).unwrap().sup_norm() < 1e-14);
        }
    }
}
