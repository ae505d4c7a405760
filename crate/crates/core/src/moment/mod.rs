//! Numerical certificates for the moment-map identities.
//!
//! Every check returns a [`VerificationReport`]. Checks that take a
//! corruption switch are expected to fail when it is on; the report records
//! that expectation so suites can count controls correctly.

mod equivariant;
mod family;
mod gauge;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use equivariant::{
    check_curvature_moment_map, check_equivariant_closed, check_futaki_constancy, futaki_values,
    EquivariantFormSample, FutakiWeight,
};
pub use family::{check_family_csck_paths, check_family_moment_map, FamilySample, ProductFamily};
pub use gauge::{
    check_bundle_moment_map, check_equivariant_chern_weil_bundle, check_moment_linearity,
    check_pairing_paths,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for MetaValue {
    fn from(v: usize) -> Self {
        MetaValue::Int(v as i64)
    }
}

impl From<f64> for MetaValue {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            MetaValue::Float(v)
        } else {
            MetaValue::Text(format!("{v}"))
        }
    }
}

impl From<&str> for MetaValue {
    fn from(v: &str) -> Self {
        MetaValue::Text(v.to_string())
    }
}

impl From<String> for MetaValue {
    fn from(v: String) -> Self {
        MetaValue::Text(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    /// Short stable tag of the identity being checked.
    pub identity: String,
    pub sup: f64,
    pub l2: f64,
    pub tolerance: f64,
    pub metadata: BTreeMap<String, MetaValue>,
    /// `sup ≤ tolerance` and `l2 ≤ tolerance`.
    pub pass: bool,
    /// Set for falsifiability controls, which must not pass.
    pub expect_failure: bool,
}

impl VerificationReport {
    pub fn new(
        name: impl Into<String>,
        identity: impl Into<String>,
        sup: f64,
        l2: f64,
        tolerance: f64,
    ) -> Self {
        let pass = sup <= tolerance && l2 <= tolerance;
        Self {
            name: name.into(),
            identity: identity.into(),
            sup,
            l2,
            tolerance,
            metadata: BTreeMap::new(),
            pass,
            expect_failure: false,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<MetaValue>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn as_control(mut self) -> Self {
        self.expect_failure = true;
        self.name = format!("{} [control]", self.name);
        self
    }

    /// Whether the outcome matches what was expected.
    pub fn succeeded(&self) -> bool {
        self.pass != self.expect_failure
    }
}

/// `(sup, rms)` of a sampled mismatch.
pub fn norms(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    let mut count = 0usize;
    for v in values {
        sup = sup.max(v.abs());
        sq += v * v;
        count += 1;
    }
    let l2 = if count == 0 {
        0.0
    } else {
        (sq / count as f64).sqrt()
    };
    (sup, l2)
}

/// Central-difference derivative at three step sizes with one Richardson
/// extrapolation.
#[derive(Clone, Debug)]
pub struct FdEstimate {
    pub value: f64,
    pub raw: [f64; 3],
    pub step: f64,
    /// Observed convergence order of the raw differences; `None` when the
    /// differences agree to rounding (the function is locally quadratic).
    pub observed_order: Option<f64>,
}

impl FdEstimate {
    pub fn order_ok(&self) -> bool {
        self.observed_order.map(|p| p >= 1.8).unwrap_or(true)
    }
}

pub fn extrapolated_derivative(
    f: impl Fn(f64) -> Result<f64>,
    x: f64,
    step: f64,
) -> Result<FdEstimate> {
    let mut raw = [0.0; 3];
    let mut scale = 0.0f64;
    for (i, h) in [step, step / 2.0, step / 4.0].into_iter().enumerate() {
        let (a, b) = (f(x + h)?, f(x - h)?);
        scale = scale.max(a.abs()).max(b.abs());
        raw[i] = (a - b) / (2.0 * h);
    }
    let d1 = raw[0] - raw[1];
    let d2 = raw[1] - raw[2];
    let noise = 1e-13 * scale.max(1e-300) / step;
    let observed_order = if d1.abs() <= noise || d2.abs() <= noise {
        None
    } else {
        Some((d1 / d2).abs().log2())
    };
    Ok(FdEstimate {
        value: raw[2] + (raw[2] - raw[1]) / 3.0,
        raw,
        step,
        observed_order,
    })
}

fn order_text(estimates: &[FdEstimate]) -> MetaValue {
    let orders: Vec<f64> = estimates.iter().filter_map(|e| e.observed_order).collect();
    if orders.is_empty() {
        MetaValue::Text("exact".into())
    } else {
        MetaValue::Float(orders.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}
