//! Batch front-end for the `zcrit` library: configuration, verification
//! suites, solves and on-disk artifacts.

pub mod charge_eval;
pub mod config;
pub mod error;
pub mod output;
pub mod suites;

use std::path::Path;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use zcrit::bundle::BundleModel;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::output::{
    create_dir, emit_plot_data, emit_trace, fields_dir, summary_table, traces_dir, write_json,
    write_text, JobTiming, ReportFile, RunMetadata, SCHEMA_VERSION,
};
use crate::suites::{build_geometries, run_jobs, Built, Finished};

/// What a command leaves behind, besides the files.
pub struct RunSummary {
    pub reports: ReportFile,
    pub table: String,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.reports.all_succeeded() {
            0
        } else {
            1
        }
    }
}

/// Runs the configured suite and writes `reports.json`, `metadata.json`,
/// `summary.txt` and the CSV dumps under the output directory.
pub fn verify(cfg: &RunConfig) -> CliResult<RunSummary> {
    let seed = cfg.require_seed()?;
    let started = Instant::now();
    let jobs = suites::verification_jobs(cfg, seed)?;
    let finished = run_jobs(jobs)?;
    write_artifacts(cfg, "verify", seed, finished, started)
}

/// Runs the dHYM flow on one line-bundle section.
pub fn solve_dhym(cfg: &RunConfig, bundle: Option<&str>) -> CliResult<RunSummary> {
    let seed = cfg.require_seed()?;
    let started = Instant::now();
    let (index, name) = match bundle {
        Some(name) => cfg
            .bundles
            .keys()
            .position(|k| k == name)
            .map(|i| (i, name.to_string()))
            .ok_or_else(|| CliError::Usage(format!("no bundle section `{name}`")))?,
        None => cfg
            .bundles
            .iter()
            .enumerate()
            .find(|(_, (_, b))| b.flow)
            .or_else(|| {
                cfg.bundles
                    .iter()
                    .enumerate()
                    .find(|(_, (_, b))| b.rank == 1)
            })
            .map(|(i, (k, _))| (i, k.clone()))
            .ok_or_else(|| CliError::Usage("no line-bundle section to solve on".into()))?,
    };
    let b = &cfg.bundles[&name];
    if b.rank != 1 {
        return Err(CliError::Usage(format!(
            "bundle `{name}` has rank {}; the flow needs a line bundle",
            b.rank
        )));
    }
    let built = build_geometries(cfg, seed)?;
    let Built::Torus(base) = &built[&b.geometry] else {
        unreachable!("bundle geometries are validated as tori")
    };
    let model = Arc::new(
        BundleModel::new(base.clone(), 1, b.chern.clone())
            .context(|| format!("bundle `{name}`"))?,
    );
    let job = suites::flow_job(&name, index, model, cfg, seed);
    let finished = run_jobs(vec![job])?;
    write_artifacts(cfg, "solve-dhym", seed, finished, started)
}

fn write_artifacts(
    cfg: &RunConfig,
    command: &str,
    seed: u64,
    finished: Vec<Finished>,
    started: Instant,
) -> CliResult<RunSummary> {
    let out = &cfg.out;
    create_dir(out)?;
    let mut reports = Vec::new();
    let mut timings = Vec::new();
    for job in &finished {
        reports.extend(job.output.reports.iter().cloned());
        timings.push(JobTiming {
            job: job.name.clone(),
            seconds: job.elapsed.as_secs_f64(),
            reports: job.output.reports.len(),
        });
        if !job.output.fields.is_empty() {
            create_dir(&fields_dir(out))?;
        }
        for dump in &job.output.fields {
            let path = fields_dir(out).join(format!("{}.csv", dump.name));
            emit_plot_data(&dump.field, &dump.coordinates, &dump.axes, &path)?;
        }
        if !job.output.traces.is_empty() {
            create_dir(&traces_dir(out))?;
        }
        for trace in &job.output.traces {
            emit_trace(
                &trace.records,
                &traces_dir(out).join(format!("{}.csv", trace.name)),
            )?;
        }
    }
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        suite: cfg.suite.to_string(),
        seed,
        reports,
    };
    write_json(&out.join("reports.json"), &file)?;
    let table = summary_table(&file.reports);
    write_text(&out.join("summary.txt"), &table)?;
    let metadata = RunMetadata {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
            .saturating_sub(started.elapsed().as_secs()),
        elapsed_seconds: started.elapsed().as_secs_f64(),
        jobs: timings,
    };
    write_json(&out.join("metadata.json"), &metadata)?;
    Ok(RunSummary {
        reports: file,
        table,
    })
}

/// Re-reads a `reports.json` and rebuilds its summary.
pub fn report(path: &Path) -> CliResult<RunSummary> {
    let reports = output::read_reports(path)?;
    if reports.schema_version != SCHEMA_VERSION {
        return Err(CliError::Usage(format!(
            "{}: schema version {} (this build reads {SCHEMA_VERSION})",
            path.display(),
            reports.schema_version
        )));
    }
    let table = summary_table(&reports.reports);
    Ok(RunSummary { reports, table })
}
