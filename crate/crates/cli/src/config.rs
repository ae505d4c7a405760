//! Run configuration. One TOML file whose sections mirror the library:
//! `[run]`, `[geometry.<name>]`, `[charge.<name>]`, `[bundle.<name>]`,
//! `[family.<name>]` and `[flow]`. The schema is documented in
//! `config/README.md`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Value;
use zcrit::bundle::FlowControls;
use zcrit::charge::{
    builtin_charge, BundleChargeTerm, CentralChargeSpec, ChargeKind, Coefficient,
    ManifoldChargeTerm, Rational, BUILTIN_NAMES,
};

use crate::error::ConfigError;

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    All,
    Manifold,
    Bundle,
    Family,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(Suite::All),
            "manifold" => Some(Suite::Manifold),
            "bundle" => Some(Suite::Bundle),
            "family" => Some(Suite::Family),
            _ => None,
        }
    }

    pub fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::All => "all",
            Suite::Manifold => "manifold",
            Suite::Bundle => "bundle",
            Suite::Family => "family",
        };
        f.write_str(s)
    }
}

/// Tolerance keys accepted under `[run.tolerances]`, with defaults.
pub const TOLERANCE_DEFAULTS: [(&str, f64); 12] = [
    ("invariance", 1e-6),
    ("closed_form", 1e-6),
    ("curvature", 1e-6),
    ("closedness", 1e-8),
    ("futaki", 1e-8),
    ("family", 1e-4),
    ("csck_paths", 1e-6),
    ("bundle_moment", 1e-6),
    ("linearity", 1e-12),
    ("pairing", 1e-10),
    ("chern_weil", 1e-8),
    ("flow", 1e-8),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(
            TOLERANCE_DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        )
    }
}

impl Tolerances {
    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }

    /// `--tol` replaces every entry.
    pub fn override_all(&mut self, tol: f64) {
        for v in self.0.values_mut() {
            *v = tol;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TorusPotential {
    Flat,
    Random { amplitude: f64 },
    Modes(Vec<zcrit::kgeom::FourierMode>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cp1Potential {
    Round,
    Random { amplitude: f64 },
    Chebyshev(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeometryConfig {
    Torus {
        dimension: usize,
        grid: usize,
        areas: Vec<Rational>,
        potential: TorusPotential,
    },
    Cp1 {
        nodes: usize,
        potential: Cp1Potential,
        /// Size of the random family used for the Futaki check.
        members: usize,
    },
}

impl GeometryConfig {
    pub fn dimension(&self) -> usize {
        match self {
            GeometryConfig::Torus { dimension, .. } => *dimension,
            GeometryConfig::Cp1 { .. } => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChargeConfig {
    Builtin(String),
    Custom(CentralChargeSpec),
}

impl ChargeConfig {
    pub fn kind(&self) -> ChargeKind {
        match self {
            ChargeConfig::Builtin(name) => {
                builtin_charge(name, 1).expect("validated at load").kind()
            }
            ChargeConfig::Custom(spec) => spec.kind(),
        }
    }

    /// The charge on an `n`-dimensional model, or `None` for a custom
    /// charge built for a different dimension.
    pub fn for_dimension(&self, n: usize) -> Option<CentralChargeSpec> {
        match self {
            ChargeConfig::Builtin(name) => builtin_charge(name, n).ok(),
            ChargeConfig::Custom(spec) => (spec.dimension == n).then(|| spec.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundleConfig {
    pub geometry: String,
    pub rank: usize,
    pub chern: Vec<Rational>,
    pub charge: String,
    /// Amplitude of the random connection perturbation.
    pub perturbation: f64,
    pub flow: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyConfig {
    pub nodes: usize,
    pub epsilon: f64,
    pub decay: f64,
    pub profile: Vec<f64>,
    pub samples: Vec<f64>,
    pub step: f64,
    pub charge: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub controls: FlowControls,
    pub initial_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub suite: Suite,
    pub out: PathBuf,
    pub tolerances: Tolerances,
    pub geometries: BTreeMap<String, GeometryConfig>,
    pub charges: BTreeMap<String, ChargeConfig>,
    pub bundles: BTreeMap<String, BundleConfig>,
    pub families: BTreeMap<String, FamilyConfig>,
    pub flow: FlowConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub suite: Option<Suite>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub grid: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run: Option<RawRun>,
    geometry: Option<BTreeMap<String, RawGeometry>>,
    charge: Option<BTreeMap<String, RawCharge>>,
    #[serde(default)]
    bundle: BTreeMap<String, RawBundle>,
    #[serde(default)]
    family: BTreeMap<String, RawFamily>,
    flow: Option<RawFlow>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    suite: Option<String>,
    out: Option<String>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    backend: String,
    dimension: Option<usize>,
    grid: Option<usize>,
    nodes: Option<usize>,
    areas: Option<Vec<Value>>,
    potential: Option<String>,
    amplitude: Option<f64>,
    modes: Option<Vec<RawMode>>,
    chebyshev: Option<Vec<f64>>,
    members: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    k: Vec<i64>,
    #[serde(default)]
    cos: f64,
    #[serde(default)]
    sin: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCharge {
    builtin: Option<String>,
    kind: Option<String>,
    dimension: Option<usize>,
    terms: Option<Vec<Value>>,
    theta: Option<Vec<Value>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBundle {
    geometry: String,
    #[serde(default = "one")]
    rank: usize,
    chern: Vec<Value>,
    charge: String,
    #[serde(default = "default_perturbation")]
    perturbation: f64,
    #[serde(default)]
    flow: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    #[serde(default = "default_nodes")]
    nodes: usize,
    epsilon: f64,
    decay: f64,
    profile: Vec<f64>,
    samples: Vec<f64>,
    #[serde(default = "default_step")]
    step: f64,
    #[serde(default = "default_family_charge")]
    charge: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    step: Option<f64>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
    initial_amplitude: Option<f64>,
}

fn one() -> usize {
    1
}
fn default_perturbation() -> f64 {
    0.3
}
fn default_nodes() -> usize {
    64
}
fn default_step() -> f64 {
    0.02
}
fn default_family_charge() -> String {
    "csck".into()
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let run = raw.run.unwrap_or_default();

        let seed = overrides.seed.or(run.seed);
        let suite = match overrides.suite {
            Some(s) => s,
            None => match run.suite.as_deref() {
                None => Suite::All,
                Some(s) => Suite::parse(s).ok_or_else(|| {
                    ConfigError::key(
                        "run.suite",
                        format!("unknown suite `{s}` (all, manifold, bundle, family)"),
                    )
                })?,
            },
        };
        let out = overrides
            .out
            .clone()
            .or_else(|| run.out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("zcrit-out"));

        let mut tolerances = Tolerances::default();
        for (key, value) in &run.tolerances {
            let slot = tolerances.0.get_mut(key).ok_or_else(|| {
                ConfigError::key(format!("run.tolerances.{key}"), "unknown tolerance key")
            })?;
            if value.is_nan() || *value <= 0.0 {
                return Err(ConfigError::key(
                    format!("run.tolerances.{key}"),
                    "must be positive",
                ));
            }
            *slot = *value;
        }
        if let Some(tol) = overrides.tol {
            if tol.is_nan() || tol <= 0.0 {
                return Err(ConfigError::key("--tol", "must be positive"));
            }
            tolerances.override_all(tol);
        }

        let raw_geometries = raw
            .geometry
            .ok_or_else(|| ConfigError::MissingSection("geometry".into()))?;
        if raw_geometries.is_empty() {
            return Err(ConfigError::MissingSection("geometry".into()));
        }
        let mut geometries = BTreeMap::new();
        for (name, g) in raw_geometries {
            geometries.insert(name.clone(), parse_geometry(&name, g, overrides.grid)?);
        }

        let raw_charges = raw
            .charge
            .ok_or_else(|| ConfigError::MissingSection("charge".into()))?;
        let mut charges = BTreeMap::new();
        for (name, c) in raw_charges {
            charges.insert(name.clone(), parse_charge(&name, c)?);
        }

        let mut bundles = BTreeMap::new();
        for (name, b) in raw.bundle {
            let key = |field: &str| format!("bundle.{name}.{field}");
            match geometries.get(&b.geometry) {
                Some(GeometryConfig::Torus { .. }) => {}
                Some(_) => {
                    return Err(ConfigError::key(
                        key("geometry"),
                        "bundles live on torus geometries",
                    ))
                }
                None => {
                    return Err(ConfigError::key(
                        key("geometry"),
                        format!("unknown geometry `{}`", b.geometry),
                    ))
                }
            }
            match charges.get(&b.charge) {
                Some(c) if c.kind() == ChargeKind::Bundle => {}
                Some(_) => return Err(ConfigError::key(key("charge"), "not a bundle charge")),
                None => {
                    return Err(ConfigError::key(
                        key("charge"),
                        format!("unknown charge `{}`", b.charge),
                    ))
                }
            }
            if !(1..=2).contains(&b.rank) {
                return Err(ConfigError::key(key("rank"), "rank must be 1 or 2"));
            }
            let chern = b
                .chern
                .iter()
                .enumerate()
                .map(|(i, v)| rational(v, &format!("{}[{i}]", key("chern"))))
                .collect::<Result<Vec<_>, _>>()?;
            if chern.len() != geometries[&b.geometry].dimension() {
                return Err(ConfigError::key(
                    key("chern"),
                    "needs one entry per complex dimension",
                ));
            }
            if b.flow && b.rank != 1 {
                return Err(ConfigError::key(
                    key("flow"),
                    "the flow solver handles line bundles only",
                ));
            }
            bundles.insert(
                name.clone(),
                BundleConfig {
                    geometry: b.geometry,
                    rank: b.rank,
                    chern,
                    charge: b.charge,
                    perturbation: b.perturbation,
                    flow: b.flow,
                },
            );
        }

        let mut families = BTreeMap::new();
        for (name, f) in raw.family {
            let key = |field: &str| format!("family.{name}.{field}");
            match charges.get(&f.charge) {
                Some(c) if c.kind() == ChargeKind::Manifold && c.for_dimension(1).is_some() => {}
                Some(_) => {
                    return Err(ConfigError::key(
                        key("charge"),
                        "needs a manifold charge for n = 1",
                    ))
                }
                None => {
                    return Err(ConfigError::key(
                        key("charge"),
                        format!("unknown charge `{}`", f.charge),
                    ))
                }
            }
            if f.samples.is_empty() {
                return Err(ConfigError::key(
                    key("samples"),
                    "at least one base point is required",
                ));
            }
            if f.step.is_nan() || f.step <= 0.0 {
                return Err(ConfigError::key(key("step"), "must be positive"));
            }
            families.insert(
                name.clone(),
                FamilyConfig {
                    nodes: f.nodes,
                    epsilon: f.epsilon,
                    decay: f.decay,
                    profile: f.profile,
                    samples: f.samples,
                    step: f.step,
                    charge: f.charge,
                },
            );
        }

        let mut controls = FlowControls::default();
        let mut initial_amplitude = 0.05;
        if let Some(f) = raw.flow {
            if let Some(v) = f.step {
                controls.step = v;
            }
            if let Some(v) = f.max_iterations {
                controls.max_iterations = v;
            }
            if let Some(v) = f.tolerance {
                controls.tolerance = v;
            }
            if let Some(v) = f.initial_amplitude {
                initial_amplitude = v;
            }
        }

        Ok(RunConfig {
            seed,
            suite,
            out,
            tolerances,
            geometries,
            charges,
            bundles,
            families,
            flow: FlowConfig {
                controls,
                initial_amplitude,
            },
        })
    }

    /// The seed is mandatory; it may come from the file or from `--seed`.
    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| {
            ConfigError::key(
                "run.seed",
                "a seed is required (set it here or pass --seed)",
            )
        })
    }
}

fn parse_geometry(
    name: &str,
    g: RawGeometry,
    grid_override: Option<usize>,
) -> Result<GeometryConfig, ConfigError> {
    let key = |field: &str| format!("geometry.{name}.{field}");
    let amplitude = |default: f64| -> Result<f64, ConfigError> {
        let a = g.amplitude.unwrap_or(default);
        if !(0.0..1.0).contains(&a) {
            return Err(ConfigError::key(key("amplitude"), "must lie in [0, 1)"));
        }
        Ok(a)
    };
    match g.backend.as_str() {
        "torus" => {
            let dimension = g.dimension.ok_or_else(|| {
                ConfigError::key(key("dimension"), "required for the torus backend")
            })?;
            if !(1..=2).contains(&dimension) {
                return Err(ConfigError::key(
                    key("dimension"),
                    "torus dimension must be 1 or 2",
                ));
            }
            let grid = grid_override
                .or(g.grid)
                .unwrap_or(if dimension == 1 { 64 } else { 16 });
            if grid < 4 {
                return Err(ConfigError::key(
                    key("grid"),
                    "need at least 4 points per axis",
                ));
            }
            let areas = match &g.areas {
                None => vec![Rational::from_integer(1); dimension],
                Some(list) => {
                    if list.len() != dimension {
                        return Err(ConfigError::key(
                            key("areas"),
                            "needs one entry per complex dimension",
                        ));
                    }
                    list.iter()
                        .enumerate()
                        .map(|(i, v)| rational(v, &format!("{}[{i}]", key("areas"))))
                        .collect::<Result<Vec<_>, _>>()?
                }
            };
            let potential = match g.potential.as_deref().unwrap_or("flat") {
                "flat" => TorusPotential::Flat,
                "random" => TorusPotential::Random {
                    amplitude: amplitude(0.05)?,
                },
                "modes" => {
                    let modes = g.modes.as_ref().ok_or_else(|| {
                        ConfigError::key(key("modes"), "required when potential = \"modes\"")
                    })?;
                    let mut out = Vec::with_capacity(modes.len());
                    for (i, m) in modes.iter().enumerate() {
                        if m.k.len() != 2 * dimension {
                            return Err(ConfigError::key(
                                format!("{}[{i}].k", key("modes")),
                                format!("wavevector needs {} entries", 2 * dimension),
                            ));
                        }
                        out.push(zcrit::kgeom::FourierMode {
                            k: m.k.clone(),
                            cos_amp: m.cos,
                            sin_amp: m.sin,
                        });
                    }
                    TorusPotential::Modes(out)
                }
                other => {
                    return Err(ConfigError::key(
                        key("potential"),
                        format!("unknown torus potential `{other}` (flat, random, modes)"),
                    ))
                }
            };
            Ok(GeometryConfig::Torus {
                dimension,
                grid,
                areas,
                potential,
            })
        }
        "cp1" => {
            if g.dimension.is_some_and(|d| d != 1) {
                return Err(ConfigError::key(key("dimension"), "CP1 has dimension 1"));
            }
            let nodes = grid_override.or(g.nodes).unwrap_or(64);
            if nodes < 8 {
                return Err(ConfigError::key(key("nodes"), "need at least 8 nodes"));
            }
            let potential = match g.potential.as_deref().unwrap_or("round") {
                "round" => Cp1Potential::Round,
                "random" => Cp1Potential::Random {
                    amplitude: amplitude(0.3)?,
                },
                "chebyshev" => Cp1Potential::Chebyshev(g.chebyshev.clone().ok_or_else(|| {
                    ConfigError::key(key("chebyshev"), "required when potential = \"chebyshev\"")
                })?),
                other => {
                    return Err(ConfigError::key(
                        key("potential"),
                        format!("unknown CP1 potential `{other}` (round, random, chebyshev)"),
                    ))
                }
            };
            let members = g.members.unwrap_or(5);
            if members < 2 {
                return Err(ConfigError::key(
                    key("members"),
                    "a family needs at least 2 members",
                ));
            }
            Ok(GeometryConfig::Cp1 {
                nodes,
                potential,
                members,
            })
        }
        other => Err(ConfigError::key(
            key("backend"),
            format!("unknown backend `{other}` (torus, cp1)"),
        )),
    }
}

fn parse_charge(name: &str, c: RawCharge) -> Result<ChargeConfig, ConfigError> {
    let key = |field: &str| format!("charge.{name}.{field}");
    if let Some(builtin) = c.builtin {
        if c.terms.is_some() {
            return Err(ConfigError::key(
                key("terms"),
                "give either `builtin` or `terms`, not both",
            ));
        }
        if builtin_charge(&builtin, 1).is_err() {
            return Err(ConfigError::key(
                key("builtin"),
                format!("unknown builtin `{builtin}` ({})", BUILTIN_NAMES.join(", ")),
            ));
        }
        return Ok(ChargeConfig::Builtin(builtin.to_ascii_lowercase()));
    }
    let kind = c.kind.ok_or_else(|| {
        ConfigError::key(
            key("kind"),
            "required for custom charges (manifold, bundle)",
        )
    })?;
    let dimension = c
        .dimension
        .ok_or_else(|| ConfigError::key(key("dimension"), "required for custom charges"))?;
    let terms = c
        .terms
        .ok_or_else(|| ConfigError::key(key("terms"), "required for custom charges"))?;
    let module_err = |field: &str, e: zcrit::Error| ConfigError::key(key(field), e.to_string());
    let spec = match kind.as_str() {
        "manifold" => {
            if c.theta.is_some() {
                return Err(ConfigError::key(
                    key("theta"),
                    "only bundle charges carry theta",
                ));
            }
            let mut parsed = Vec::with_capacity(terms.len());
            for (i, t) in terms.iter().enumerate() {
                let at = format!("{}[{i}]", key("terms"));
                let items = term_items(t, &at)?;
                let ks = items[3]
                    .as_array()
                    .ok_or_else(|| {
                        ConfigError::key(&at, "fourth entry must be a list of Chern indices")
                    })?
                    .iter()
                    .map(|v| index(v, &at))
                    .collect::<Result<Vec<_>, _>>()?;
                let term = ManifoldChargeTerm::new(
                    coefficient(&items[0], &items[1], &at)?,
                    index(&items[2], &at)?,
                    ks,
                    dimension,
                )
                .map_err(|e| ConfigError::key(&at, e.to_string()))?;
                parsed.push(term);
            }
            CentralChargeSpec::manifold(name, dimension, parsed)
                .map_err(|e| module_err("terms", e))?
        }
        "bundle" => {
            let mut parsed = Vec::with_capacity(terms.len());
            for (i, t) in terms.iter().enumerate() {
                let at = format!("{}[{i}]", key("terms"));
                let items = term_items(t, &at)?;
                let term = BundleChargeTerm::new(
                    coefficient(&items[0], &items[1], &at)?,
                    index(&items[2], &at)?,
                    index(&items[3], &at)?,
                    dimension,
                )
                .map_err(|e| ConfigError::key(&at, e.to_string()))?;
                parsed.push(term);
            }
            let mut theta = Vec::new();
            for (i, v) in c.theta.unwrap_or_default().iter().enumerate() {
                let at = format!("{}[{i}]", key("theta"));
                let pair = v
                    .as_array()
                    .filter(|p| p.len() == 2)
                    .ok_or_else(|| ConfigError::key(&at, "expected [re, im]"))?;
                theta.push(coefficient(&pair[0], &pair[1], &at)?);
            }
            CentralChargeSpec::bundle(name, dimension, parsed, theta)
                .map_err(|e| module_err("theta", e))?
        }
        other => {
            return Err(ConfigError::key(
                key("kind"),
                format!("unknown kind `{other}` (manifold, bundle)"),
            ))
        }
    };
    Ok(ChargeConfig::Custom(spec))
}

fn term_items<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>, ConfigError> {
    v.as_array()
        .filter(|items| items.len() == 4)
        .ok_or_else(|| ConfigError::key(at, "expected [re, im, j, k]"))
}

fn index(v: &Value, at: &str) -> Result<usize, ConfigError> {
    v.as_integer()
        .and_then(|i| usize::try_from(i).ok())
        .ok_or_else(|| ConfigError::key(at, format!("expected a non-negative integer, got {v}")))
}

/// Integers stay exact; floats go through the library's exact-if-possible
/// conversion.
fn coefficient(re: &Value, im: &Value, at: &str) -> Result<Coefficient, ConfigError> {
    match (re, im) {
        (Value::Integer(a), Value::Integer(b)) => Ok(Coefficient::int(*a, *b)),
        _ => {
            let f = |v: &Value| match v {
                Value::Integer(i) => Some(*i as f64),
                Value::Float(x) => Some(*x),
                _ => None,
            };
            match (f(re), f(im)) {
                (Some(a), Some(b)) => Ok(Coefficient::from_f64(a, b)),
                _ => Err(ConfigError::key(at, "coefficient parts must be numbers")),
            }
        }
    }
}

/// An integer or a string such as `"1/2"`.
fn rational(v: &Value, at: &str) -> Result<Rational, ConfigError> {
    match v {
        Value::Integer(i) => Ok(Rational::from_integer(*i)),
        Value::String(s) => s
            .trim()
            .parse::<Rational>()
            .map_err(|_| ConfigError::key(at, format!("`{s}` is not a rational number"))),
        other => Err(ConfigError::key(
            at,
            format!("expected an integer or \"p/q\", got {other}"),
        )),
    }
}
