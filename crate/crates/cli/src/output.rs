//! Artifacts on disk: report JSON, run metadata, summary table and CSV dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zcrit::bundle::FlowRecord;
use zcrit::kgeom::forms::Mask;
use zcrit::kgeom::TensorField;
use zcrit::moment::VerificationReport;

use crate::error::{CliError, CliResult};

/// Bumped whenever a field of [`ReportFile`] or [`VerificationReport`]
/// changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Contents of `reports.json`. Nothing here depends on wall-clock time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub command: String,
    pub suite: String,
    pub seed: u64,
    pub reports: Vec<VerificationReport>,
}

impl ReportFile {
    pub fn all_succeeded(&self) -> bool {
        self.reports.iter().all(VerificationReport::succeeded)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JobTiming {
    pub job: String,
    pub seconds: f64,
    pub reports: usize,
}

/// Contents of `metadata.json`: everything that may differ between runs.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub version: String,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub jobs: Vec<JobTiming>,
}

/// A sampled field with the coordinates of its grid.
#[derive(Clone, Debug)]
pub struct FieldDump {
    pub name: String,
    pub field: TensorField,
    pub coordinates: Vec<Vec<f64>>,
    pub axes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct TraceDump {
    pub name: String,
    pub records: Vec<FlowRecord>,
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_reports(path: &Path) -> CliResult<ReportFile> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Real axis labels of a grid: `x` on CP¹, `x, y` on T², `x1, y1, …` above.
pub fn axis_names(coordinate_count: usize, cp1: bool) -> Vec<String> {
    if cp1 {
        return vec!["x".into()];
    }
    if coordinate_count == 2 {
        return vec!["x".into(), "y".into()];
    }
    (0..coordinate_count)
        .map(|i| format!("{}{}", if i % 2 == 0 { "x" } else { "y" }, i / 2 + 1))
        .collect()
}

fn monomial_label(key: (Mask, Mask)) -> String {
    if key == (0, 0) {
        return "f".into();
    }
    let mut s = String::new();
    for (mask, prefix) in [(key.0, "dz"), (key.1, "dzb")] {
        for a in 0..8 {
            if mask & (1 << a) != 0 {
                let _ = write!(s, "{prefix}{}", a + 1);
            }
        }
    }
    s
}

/// Writes one row per grid point: coordinates, then the real and imaginary
/// part of every stored matrix entry of every component, in key order.
/// A field without points gives a header-only file.
pub fn emit_plot_data(
    field: &TensorField,
    coordinates: &[Vec<f64>],
    axes: &[String],
    path: &Path,
) -> CliResult<()> {
    if coordinates.len() != field.npts {
        return Err(CliError::Usage(format!(
            "{}: {} coordinate rows for a field with {} points",
            path.display(),
            coordinates.len(),
            field.npts
        )));
    }
    let r = field.rank();
    let mut header: Vec<String> = axes.to_vec();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &key in field.comps.keys() {
        let label = monomial_label(key);
        for i in 0..r {
            for j in 0..r {
                let entry = field.entry(key, i, j);
                let name = if r == 1 {
                    label.clone()
                } else {
                    format!("{label}_{i}{j}")
                };
                header.push(format!("{name}_re"));
                header.push(format!("{name}_im"));
                columns.push(entry.iter().map(|z| z.re).collect());
                columns.push(entry.iter().map(|z| z.im).collect());
            }
        }
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(&header)?;
    for (p, coords) in coordinates.iter().enumerate() {
        let row = coords
            .iter()
            .copied()
            .chain(columns.iter().map(|c| c[p]))
            .map(|v| v.to_string());
        writer.write_record(row)?;
    }
    writer.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_trace(records: &[FlowRecord], path: &Path) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["iteration", "sup", "l2", "drift"])?;
    for r in records {
        writer.write_record([
            r.iteration.to_string(),
            r.sup.to_string(),
            r.l2.to_string(),
            r.drift.to_string(),
        ])?;
    }
    writer.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn status(r: &VerificationReport) -> &'static str {
    match (r.expect_failure, r.pass) {
        (false, true) => "pass",
        (false, false) => "FAIL",
        (true, false) => "control ok",
        (true, true) => "CONTROL PASSED",
    }
}

/// Fixed-width table, one line per report, with a closing count.
pub fn summary_table(reports: &[VerificationReport]) -> String {
    let width = reports
        .iter()
        .map(|r| r.name.chars().count())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14}  {:<width$}  {:>10}  {:>10}  {:>9}",
        "status", "name", "sup", "l2", "tol"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14}  {:<width$}  {:>10.3e}  {:>10.3e}  {:>9.1e}",
            status(r),
            r.name,
            r.sup,
            r.l2,
            r.tolerance
        );
    }
    let ok = reports.iter().filter(|r| r.succeeded()).count();
    let _ = writeln!(out, "{ok}/{} as expected", reports.len());
    out
}

pub fn fields_dir(out: &Path) -> PathBuf {
    out.join("fields")
}

pub fn traces_dir(out: &Path) -> PathBuf {
    out.join("traces")
}

/// File-name-safe version of a label.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("zcrit-output-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn rows(path: &Path) -> Vec<String> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect()
    }

    #[test]
    fn torus_field_has_one_row_per_point() {
        let coords: Vec<Vec<f64>> = (0..64 * 64)
            .map(|p| vec![(p % 64) as f64 / 64.0, (p / 64) as f64 / 64.0])
            .collect();
        let field = TensorField::real_function(1, &vec![0.5; 64 * 64]);
        let path = tmp("t2.csv");
        emit_plot_data(&field, &coords, &axis_names(2, false), &path).unwrap();
        let lines = rows(&path);
        assert_eq!(lines[0], "x,y,f_re,f_im");
        assert_eq!(lines.len(), 4097);
    }

    #[test]
    fn profile_and_empty_field() {
        let coords: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let field = TensorField::real_function(1, &vec![1.0; 64]);
        let path = tmp("cp1.csv");
        emit_plot_data(&field, &coords, &axis_names(1, true), &path).unwrap();
        assert_eq!(rows(&path).len(), 65);

        let empty = TensorField::real_function(1, &[]);
        let path = tmp("empty.csv");
        emit_plot_data(&empty, &[], &axis_names(1, true), &path).unwrap();
        assert_eq!(rows(&path), vec!["x,f_re,f_im".to_string()]);
    }

    #[test]
    fn matrix_columns_are_labelled() {
        let mut field = TensorField::zero(1, 2, zcrit::kgeom::EndoShape::Bundle(2));
        field.add_component(
            (0, 1),
            &[Complex64::new(1.0, 2.0); 8],
            Complex64::new(1.0, 0.0),
        );
        let path = tmp("matrix.csv");
        emit_plot_data(
            &field,
            &[vec![0.0, 0.0], vec![0.5, 0.0]],
            &axis_names(2, false),
            &path,
        )
        .unwrap();
        let lines = rows(&path);
        assert!(lines[0].starts_with("x,y,dzb1_00_re,dzb1_00_im,dzb1_01_re"));
        assert_eq!(lines[1], "0,0,1,2,1,2,1,2,1,2");
    }

    #[test]
    fn mismatched_coordinates_rejected() {
        let field = TensorField::real_function(1, &[1.0, 2.0]);
        assert!(
            emit_plot_data(&field, &[vec![0.0]], &axis_names(1, true), &tmp("bad.csv")).is_err()
        );
    }

    #[test]
    fn table_counts_controls() {
        let reports = vec![
            VerificationReport::new("a", "id", 1e-9, 1e-9, 1e-8),
            VerificationReport::new("b", "id", 1.0, 1.0, 1e-8).as_control(),
        ];
        let table = summary_table(&reports);
        assert!(table.contains("control ok"));
        assert!(table.ends_with("2/2 as expected\n"));
    }
}
