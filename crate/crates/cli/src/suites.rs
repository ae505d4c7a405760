//! Builds geometries, connections and families from a [`RunConfig`] and
//! turns them into verification jobs.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use zcrit::bundle::{
    random_algebra_element, random_tangent, solve_dhym_line_bundle, BundleModel, ConnectionState,
    FlowOutcome, FlowRecord,
};
use zcrit::charge::{builtin_charge, ChargeKind};
use zcrit::kgeom::torus::{random_modes, sample_modes};
use zcrit::kgeom::{Cp1Geometry, GeometryBackend, TensorField, TorusGeometry};
use zcrit::moment::{
    check_bundle_moment_map, check_curvature_moment_map, check_equivariant_chern_weil_bundle,
    check_equivariant_closed, check_family_csck_paths, check_family_moment_map,
    check_futaki_constancy, check_moment_linearity, check_pairing_paths, norms,
    EquivariantFormSample, FutakiWeight, ProductFamily, VerificationReport,
};
use zcrit::zkahler::{correction_c1_laplacian, correction_term, z_tilde_manifold};
use zcrit::Error;

use crate::config::{
    BundleConfig, Cp1Potential, FamilyConfig, GeometryConfig, RunConfig, Suite, Tolerances,
    TorusPotential,
};
use crate::error::{CliResult, Context};
use crate::output::{axis_names, slug, FieldDump, TraceDump};

/// What one job hands back to the runner.
#[derive(Default)]
pub struct JobOutput {
    pub reports: Vec<VerificationReport>,
    pub fields: Vec<FieldDump>,
    pub traces: Vec<TraceDump>,
}

pub struct Job {
    pub name: String,
    run: Box<dyn FnOnce() -> CliResult<JobOutput> + Send>,
}

impl Job {
    fn new(
        name: impl Into<String>,
        run: impl FnOnce() -> CliResult<JobOutput> + Send + 'static,
    ) -> Self {
        Job {
            name: name.into(),
            run: Box::new(run),
        }
    }
}

pub struct Finished {
    pub name: String,
    pub output: JobOutput,
    pub elapsed: Duration,
}

/// Runs jobs concurrently; results come back in job order.
pub fn run_jobs(jobs: Vec<Job>) -> CliResult<Vec<Finished>> {
    jobs.into_par_iter()
        .map(|job| {
            let start = Instant::now();
            let output = (job.run)()?;
            Ok(Finished {
                name: job.name,
                output,
                elapsed: start.elapsed(),
            })
        })
        .collect()
}

/// Independent stream of the run seed for each constructed object.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const BUNDLE_STREAMS: u64 = 1000;
const FLOW_STREAMS: u64 = 2000;

pub enum Built {
    Torus(Arc<TorusGeometry>),
    Cp1 {
        geometry: Arc<Cp1Geometry>,
        /// The geometry itself followed by further random members.
        family: Arc<Vec<Cp1Geometry>>,
    },
}

pub fn build_geometries(cfg: &RunConfig, seed: u64) -> CliResult<BTreeMap<String, Built>> {
    let mut out = BTreeMap::new();
    for (i, (name, g)) in cfg.geometries.iter().enumerate() {
        let mut rng = stream_rng(seed, i as u64 + 1);
        let what = || format!("geometry `{name}`");
        let built = match g {
            GeometryConfig::Torus {
                dimension,
                grid,
                areas,
                potential,
            } => {
                let geom = match potential {
                    TorusPotential::Flat => TorusGeometry::new(
                        *dimension,
                        *grid,
                        areas.clone(),
                        vec![0.0; grid.pow(2 * *dimension as u32)],
                    ),
                    TorusPotential::Random { amplitude } => TorusGeometry::random(
                        *dimension,
                        *grid,
                        areas.clone(),
                        *amplitude,
                        &mut rng,
                    ),
                    TorusPotential::Modes(modes) => {
                        TorusGeometry::from_modes(*dimension, *grid, areas.clone(), modes)
                    }
                }
                .context(what)?;
                Built::Torus(Arc::new(geom))
            }
            GeometryConfig::Cp1 {
                nodes,
                potential,
                members,
            } => {
                let geom = match potential {
                    Cp1Potential::Round => Ok(Cp1Geometry::round(*nodes)),
                    Cp1Potential::Random { amplitude } => {
                        Cp1Geometry::random(*nodes, *amplitude, &mut rng)
                    }
                    Cp1Potential::Chebyshev(coeffs) => Cp1Geometry::from_chebyshev(*nodes, coeffs),
                }
                .context(what)?;
                let amplitude = match potential {
                    Cp1Potential::Random { amplitude } => *amplitude,
                    _ => 0.3,
                };
                let mut family = vec![geom.clone()];
                for _ in 1..*members {
                    family.push(Cp1Geometry::random(*nodes, amplitude, &mut rng).context(what)?);
                }
                Built::Cp1 {
                    geometry: Arc::new(geom),
                    family: Arc::new(family),
                }
            }
        };
        out.insert(name.clone(), built);
    }
    Ok(out)
}

/// All jobs of the selected suite, in a fixed order.
pub fn verification_jobs(cfg: &RunConfig, seed: u64) -> CliResult<Vec<Job>> {
    let built = build_geometries(cfg, seed)?;
    let tol = &cfg.tolerances;
    let mut jobs = Vec::new();
    if cfg.suite.includes(Suite::Manifold) {
        manifold_jobs(cfg, &built, tol, &mut jobs);
    }
    if cfg.suite.includes(Suite::Bundle) {
        for (i, (name, b)) in cfg.bundles.iter().enumerate() {
            let Built::Torus(base) = &built[&b.geometry] else {
                unreachable!("bundle geometries are validated as tori")
            };
            let spec_cfg = cfg.charges[&b.charge].clone();
            let model = Arc::new(
                BundleModel::new(base.clone(), b.rank, b.chern.clone())
                    .context(|| format!("bundle `{name}`"))?,
            );
            let spec = spec_cfg.for_dimension(model.dim()).ok_or_else(|| {
                crate::error::ConfigError::key(
                    format!("bundle.{name}.charge"),
                    "charge has a different dimension",
                )
            })?;
            let rng = stream_rng(seed, BUNDLE_STREAMS + i as u64);
            let (n, t) = (name.clone(), tol.clone());
            let (m, bc) = (model.clone(), b.clone());
            jobs.push(Job::new(format!("bundle/{name}"), move || {
                bundle_checks(&n, m, bc, &spec, &t, rng)
            }));
            if b.flow {
                jobs.push(flow_job(name, i, model, cfg, seed));
            }
        }
    }
    if cfg.suite.includes(Suite::Family) {
        for (name, f) in &cfg.families {
            let spec = cfg.charges[&f.charge]
                .for_dimension(1)
                .expect("validated at load");
            let (n, f, t) = (name.clone(), f.clone(), tol.clone());
            jobs.push(Job::new(format!("family/{name}"), move || {
                family_checks(&n, &f, &spec, &t)
            }));
        }
    }
    Ok(jobs)
}

fn manifold_jobs(
    cfg: &RunConfig,
    built: &BTreeMap<String, Built>,
    tol: &Tolerances,
    jobs: &mut Vec<Job>,
) {
    for (gname, geom) in built {
        let n = cfg.geometries[gname].dimension();
        for (cname, charge) in &cfg.charges {
            if charge.kind() != ChargeKind::Manifold {
                continue;
            }
            let Some(spec) = charge.for_dimension(n) else {
                continue;
            };
            let (g, c, t) = (gname.clone(), cname.clone(), tol.get("invariance"));
            match geom {
                Built::Torus(torus) => {
                    let torus = torus.clone();
                    jobs.push(Job::new(format!("invariance/{cname}/{gname}"), move || {
                        invariance(&*torus, &g, &c, &spec, t, false)
                    }));
                }
                Built::Cp1 { geometry, .. } => {
                    let cp1 = geometry.clone();
                    jobs.push(Job::new(format!("invariance/{cname}/{gname}"), move || {
                        invariance(&*cp1, &g, &c, &spec, t, true)
                    }));
                }
            }
        }
        match geom {
            Built::Torus(torus) => {
                let (torus, g, t) = (torus.clone(), gname.clone(), tol.get("closed_form"));
                jobs.push(Job::new(format!("closed-form/{gname}"), move || {
                    closed_form(&torus, &g, t)
                }));
            }
            Built::Cp1 { geometry, family } => {
                let (geometry, family, g, t) =
                    (geometry.clone(), family.clone(), gname.clone(), tol.clone());
                jobs.push(Job::new(format!("cp1/{gname}"), move || {
                    cp1_checks(&geometry, &family, &g, &t)
                }));
            }
        }
    }
}

fn invariance<G: GeometryBackend + ?Sized>(
    geom: &G,
    gname: &str,
    cname: &str,
    spec: &zcrit::charge::CentralChargeSpec,
    tolerance: f64,
    cp1: bool,
) -> CliResult<JobOutput> {
    let eval = match z_tilde_manifold(geom, spec) {
        Ok(eval) => eval,
        // No phase, nothing to verify.
        Err(Error::ZeroCharge) => return Ok(JobOutput::default()),
        Err(e) => return Err(e).context(|| format!("charge `{cname}` on `{gname}`")),
    };
    let total = geom.integrate(&eval.z_tilde);
    let err = (total - eval.charge.value).norm() / eval.charge.value.norm();
    let (res_sup, _) = norms(eval.residual.iter().copied());
    let report = VerificationReport::new(
        format!("topological invariance ({cname} on {gname})"),
        "int Z~ w^n = Z",
        err,
        err,
        tolerance,
    )
    .with("geometry", gname)
    .with("charge", cname)
    .with("points", geom.npts())
    .with("charge_re", eval.charge.value.re)
    .with("charge_im", eval.charge.value.im)
    .with("phase", eval.phase_used)
    .with("residual_sup", res_sup);
    let coordinates = geom.coordinates();
    let axes = axis_names(coordinates.first().map_or(0, Vec::len), cp1);
    Ok(JobOutput {
        reports: vec![report],
        fields: vec![FieldDump {
            name: format!("residual_{}_{}", slug(cname), slug(gname)),
            field: TensorField::real_function(geom.dimension(), &eval.residual),
            coordinates,
            axes,
        }],
        traces: Vec::new(),
    })
}

fn closed_form(geom: &TorusGeometry, gname: &str, tolerance: f64) -> CliResult<JobOutput> {
    let n = geom.dimension();
    let mut reports = Vec::new();
    for j in 0..n {
        let what = || format!("correction term j = {j} on `{gname}`");
        let term = zcrit::charge::ManifoldChargeTerm::new(
            zcrit::charge::Coefficient::int(1, 0),
            j,
            vec![1; n - j],
            n,
        )
        .context(what)?;
        let general = correction_term(geom, &term).context(what)?;
        let laplacian = correction_c1_laplacian(geom, j).context(what)?;
        let (sup, l2) = norms(general.iter().zip(&laplacian).map(|(a, b)| (a - b).norm()));
        reports.push(
            VerificationReport::new(
                format!("correction closed form (alpha^{j} c1^{} on {gname})", n - j),
                "d*dbar*(l) = Laplacian form",
                sup,
                l2,
                tolerance,
            )
            .with("geometry", gname)
            .with("grid", geom.grid_size()),
        );
    }
    Ok(JobOutput {
        reports,
        ..JobOutput::default()
    })
}

fn cp1_checks(
    geom: &Cp1Geometry,
    family: &[Cp1Geometry],
    gname: &str,
    tol: &Tolerances,
) -> CliResult<JobOutput> {
    let what = || format!("CP1 geometry `{gname}`");
    let action = geom.hamiltonian_for_rotation().context(what)?;
    let closed = tol.get("closedness");
    let kahler = EquivariantFormSample::kahler(geom, &action);
    let chern = EquivariantFormSample::first_chern(geom, &action);
    let wedge = kahler.wedge(&chern).context(what)?;
    let reports = vec![
        check_curvature_moment_map(geom, &action, false, tol.get("curvature")),
        check_curvature_moment_map(geom, &action, true, tol.get("curvature")),
        check_equivariant_closed(&kahler, geom, closed),
        check_equivariant_closed(&chern, geom, closed),
        check_equivariant_closed(&wedge, geom, closed),
        check_equivariant_closed(&kahler.clone().with_scaled_hamiltonian(2.0), geom, closed)
            .as_control(),
        check_futaki_constancy(family, FutakiWeight::Hamiltonian, tol.get("futaki"))
            .context(what)?,
        check_futaki_constancy(family, FutakiWeight::SquaredHamiltonian, tol.get("futaki"))
            .context(what)?,
    ];
    let reports = reports
        .into_iter()
        .map(|r| r.with("geometry", gname))
        .collect();
    let coordinates = geom.coordinates();
    Ok(JobOutput {
        reports,
        fields: vec![FieldDump {
            name: format!("scalar_curvature_{}", slug(gname)),
            field: TensorField::real_function(1, &geom.scalar_curvature()),
            coordinates,
            axes: axis_names(1, true),
        }],
        traces: Vec::new(),
    })
}

fn bundle_checks(
    name: &str,
    model: Arc<BundleModel>,
    b: BundleConfig,
    spec: &zcrit::charge::CentralChargeSpec,
    tol: &Tolerances,
    mut rng: ChaCha8Rng,
) -> CliResult<JobOutput> {
    let what = || format!("bundle `{name}`");
    let conn = ConnectionState::new(
        model.clone(),
        random_tangent(&model, b.perturbation, &mut rng),
    )
    .context(what)?;
    let a = random_tangent(&model, 1.0, &mut rng);
    let c = random_tangent(&model, 1.0, &mut rng);
    let e = random_algebra_element(&model, 1.0, &mut rng);
    let e2 = random_algebra_element(&model, 1.0, &mut rng);
    let moment = tol.get("bundle_moment");
    let reports = vec![
        check_bundle_moment_map(&conn, &e, &a, spec, false, moment).context(what)?,
        check_bundle_moment_map(&conn, &e, &a, spec, true, moment).context(what)?,
        check_moment_linearity(&conn, &e, &e2, spec, tol.get("linearity")).context(what)?,
        check_pairing_paths(&conn, &a, &c, tol.get("pairing")).context(what)?,
        check_equivariant_chern_weil_bundle(&conn, &e, tol.get("chern_weil")).context(what)?,
    ];
    let reports = reports
        .into_iter()
        .map(|r| r.with("bundle", name))
        .collect();
    let curvature = conn.curvature();
    let coordinates = model.base.coordinates();
    let axes = axis_names(coordinates.first().map_or(0, Vec::len), false);
    Ok(JobOutput {
        reports,
        fields: vec![FieldDump {
            name: format!("curvature_{}", slug(name)),
            field: curvature,
            coordinates,
            axes,
        }],
        traces: Vec::new(),
    })
}

/// dHYM flow on the `index`-th bundle section from a seeded random start.
pub fn flow_job(
    name: &str,
    index: usize,
    model: Arc<BundleModel>,
    cfg: &RunConfig,
    seed: u64,
) -> Job {
    let mut rng = stream_rng(seed, FLOW_STREAMS + index as u64);
    let (n, t, flow) = (name.to_string(), cfg.tolerances.clone(), cfg.flow.clone());
    Job::new(format!("flow/{name}"), move || {
        let initial = initial_potential(&model, flow.initial_amplitude, &mut rng);
        let solved = solve_dhym_line_bundle(model.clone(), &initial, &flow.controls);
        flow_output(&n, &model, solved, &t)
    })
}

fn initial_potential(model: &BundleModel, amplitude: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let modes = random_modes(2 * model.dim(), rng);
    sample_modes(&model.base.grid, &modes)
        .iter()
        .map(|v| amplitude * v)
        .collect()
}

/// Reports and dumps of a flow run, converged or not.
fn flow_output(
    name: &str,
    model: &BundleModel,
    solved: zcrit::Result<FlowOutcome>,
    tol: &Tolerances,
) -> CliResult<JobOutput> {
    let (trace, potential): (Vec<FlowRecord>, Option<Vec<f64>>) = match solved {
        Ok(outcome) => (outcome.trace, Some(outcome.potential)),
        Err(Error::NonConvergence { trace, .. }) => (trace, None),
        Err(e) => return Err(e).context(|| format!("flow on bundle `{name}`")),
    };
    let last = trace.last().cloned().unwrap_or(FlowRecord {
        iteration: 0,
        sup: f64::INFINITY,
        l2: f64::INFINITY,
        drift: f64::INFINITY,
    });
    let max_drift = trace.iter().map(|r| r.drift).fold(0.0, f64::max);
    let converged = potential.is_some();
    let tolerance = tol.get("flow");
    let mut residual = VerificationReport::new(
        format!("dHYM flow residual ({name})"),
        "Im(e^-i phi Z~) = 0 at the limit",
        last.sup,
        last.l2,
        tolerance,
    )
    .with("bundle", name)
    .with("iterations", last.iteration)
    .with("converged", if converged { "yes" } else { "no" });
    if !converged {
        residual.pass = false;
    }
    let drift = VerificationReport::new(
        format!("charge drift along the flow ({name})"),
        "int tr Z~ = Z along the flow",
        max_drift,
        max_drift,
        tolerance,
    )
    .with("bundle", name);
    let mut fields = Vec::new();
    if let Some(s) = potential {
        let coordinates = model.base.coordinates();
        let axes = axis_names(coordinates.first().map_or(0, Vec::len), false);
        fields.push(FieldDump {
            name: format!("flow_potential_{}", slug(name)),
            field: TensorField::real_function(model.dim(), &s),
            coordinates,
            axes,
        });
    }
    Ok(JobOutput {
        reports: vec![residual, drift],
        fields,
        traces: vec![TraceDump {
            name: format!("flow_{}", slug(name)),
            records: trace,
        }],
    })
}

fn family_checks(
    name: &str,
    f: &FamilyConfig,
    spec: &zcrit::charge::CentralChargeSpec,
    tol: &Tolerances,
) -> CliResult<JobOutput> {
    let what = || format!("family `{name}`");
    let family =
        ProductFamily::new(f.nodes, f.epsilon, f.decay, f.profile.clone()).context(what)?;
    let moment = tol.get("family");
    let mut reports = vec![
        check_family_moment_map(&family, spec, &f.samples, f.step, false, moment).context(what)?,
        check_family_moment_map(&family, spec, &f.samples, f.step, true, moment).context(what)?,
    ];
    if builtin_charge("csck", 1).is_ok_and(|c| c.terms == spec.terms) {
        reports.push(
            check_family_csck_paths(&family, &f.samples, tol.get("csck_paths")).context(what)?,
        );
    }
    Ok(JobOutput {
        reports: reports
            .into_iter()
            .map(|r| r.with("family", name))
            .collect(),
        ..JobOutput::default()
    })
}
