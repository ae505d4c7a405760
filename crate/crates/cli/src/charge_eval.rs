//! `charge eval`: a central charge on a named model, printed exactly when
//! possible.

use std::f64::consts::PI;
use std::fmt::Write as _;

use zcrit::charge::{
    evaluate_charge, phase, CentralChargeSpec, ChargeKind, ChargeValue, GaussianRational,
    ModelTopology, Rational,
};
use zcrit::kgeom::cp1::cp1_topology;

use crate::error::{CliError, CliResult, Context};

pub const MODELS: [&str; 3] = ["t2", "t4", "cp1"];

pub fn model_dimension(model: &str) -> CliResult<usize> {
    match model {
        "t2" | "cp1" => Ok(1),
        "t4" => Ok(2),
        other => Err(CliError::Usage(format!(
            "unknown model `{other}` ({})",
            MODELS.join(", ")
        ))),
    }
}

/// Topology of `model`, with an `O(c) ⊗ C^rank`-type bundle for bundle charges.
pub fn model_topology(
    model: &str,
    kind: ChargeKind,
    rank: usize,
    chern: &[Rational],
) -> CliResult<ModelTopology> {
    let n = model_dimension(model)?;
    let base = if model == "cp1" {
        cp1_topology()
    } else {
        ModelTopology::unit_torus(n)
    };
    if kind == ChargeKind::Manifold {
        return Ok(base);
    }
    let chern = if chern.is_empty() {
        vec![Rational::from_integer(0); n]
    } else {
        chern.to_vec()
    };
    base.with_bundle(rank, chern)
        .context(|| format!("bundle on `{model}`"))
}

fn fmt_rational(r: &Rational) -> String {
    r.to_string()
}

/// `a + bi` with exact rationals: `-i`, `1/2 + (3/2)i`, `2`.
pub fn format_exact(z: &GaussianRational) -> String {
    let zero = Rational::from_integer(0);
    let one = Rational::from_integer(1);
    let imag = |b: &Rational| -> String {
        if *b == one {
            "i".into()
        } else if *b == -one {
            "-i".into()
        } else if b.is_integer() {
            format!("{b}i")
        } else {
            format!("({b})i")
        }
    };
    match (z.re == zero, z.im == zero) {
        (true, true) => "0".into(),
        (false, true) => fmt_rational(&z.re),
        (true, false) => imag(&z.im),
        (false, false) => {
            let sign = if z.im < zero { '-' } else { '+' };
            let abs = if z.im < zero { -z.im } else { z.im };
            format!("{} {sign} {}", fmt_rational(&z.re), imag(&abs))
        }
    }
}

pub fn format_value(v: &ChargeValue) -> String {
    match &v.exact {
        Some(z) => format_exact(z),
        None => format!(
            "{} {} {}i",
            v.value.re,
            if v.value.im < 0.0 { '-' } else { '+' },
            v.value.im.abs()
        ),
    }
}

/// `pπ/q` when the angle is a small rational multiple of π.
pub fn format_phase(angle: f64) -> Option<String> {
    let t = angle / PI;
    for q in 1..=12i64 {
        let p = (t * q as f64).round();
        if (t * q as f64 - p).abs() < 1e-10 {
            let p = p as i64;
            return Some(match (p, q) {
                (0, _) => "0".into(),
                (1, 1) => "π".into(),
                (-1, 1) => "-π".into(),
                (1, q) => format!("π/{q}"),
                (-1, q) => format!("-π/{q}"),
                (p, 1) => format!("{p}π"),
                (p, q) => format!("{p}π/{q}"),
            });
        }
    }
    None
}

/// The text printed by `charge eval`.
pub fn describe(spec: &CentralChargeSpec, model: &str, topo: &ModelTopology) -> CliResult<String> {
    let value =
        evaluate_charge(spec, topo).context(|| format!("charge `{}` on `{model}`", spec.name))?;
    let angle = phase(value.value).context(|| format!("phase of `{}` on `{model}`", spec.name))?;
    let mut out = String::new();
    let kind = match spec.kind() {
        ChargeKind::Manifold => "manifold",
        ChargeKind::Bundle => "bundle",
    };
    let _ = writeln!(
        out,
        "charge: {} ({kind}, n = {})",
        spec.name, spec.dimension
    );
    match &topo.bundle {
        Some(b) => {
            let chern: Vec<String> = b.line_chern.iter().map(fmt_rational).collect();
            let _ = writeln!(
                out,
                "model: {model}, rank {}, c1 = [{}]",
                b.rank,
                chern.join(", ")
            );
        }
        None => {
            let _ = writeln!(out, "model: {model}");
        }
    }
    let _ = writeln!(out, "Z = {}", format_value(&value));
    let _ = writeln!(out, "|Z| = {}", value.value.norm());
    match format_phase(angle) {
        Some(exact) => {
            let _ = writeln!(out, "phase = {exact} ({angle})");
        }
        None => {
            let _ = writeln!(out, "phase = {angle}");
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use zcrit::charge::builtin_charge;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn exact_formatting() {
        let z = |a: Rational, b: Rational| GaussianRational::new(a, b);
        assert_eq!(format_exact(&z(q(0, 1), q(-1, 1))), "-i");
        assert_eq!(format_exact(&z(q(1, 2), q(3, 2))), "1/2 + (3/2)i");
        assert_eq!(format_exact(&z(q(2, 1), q(-2, 1))), "2 - 2i");
        assert_eq!(format_exact(&z(q(0, 1), q(0, 1))), "0");
    }

    #[test]
    fn phase_formatting() {
        assert_eq!(format_phase(-PI / 2.0).as_deref(), Some("-π/2"));
        assert_eq!(format_phase(PI).as_deref(), Some("π"));
        assert_eq!(format_phase(3.0 * PI / 4.0).as_deref(), Some("3π/4"));
        assert_eq!(format_phase(0.123), None);
    }

    #[test]
    fn dhym_on_t2() {
        let spec = builtin_charge("dhym", 1).unwrap();
        let topo = model_topology("t2", spec.kind(), 1, &[]).unwrap();
        let text = describe(&spec, "t2", &topo).unwrap();
        assert!(text.contains("Z = -i\n"), "{text}");
        assert!(text.contains("phase = -π/2"), "{text}");
    }
}
