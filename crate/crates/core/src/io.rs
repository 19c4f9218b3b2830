//! CSV ingestion and the on-disk formats for batches and reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value read back is bit-identical to the one written.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Dataset, SupportSet};
use crate::sampler::{CvResult, DrawIssue, Procedure, SampleBatch};
use crate::sim::{ReplicateResult, SimSetting};
use crate::weights::{WeightDistribution, WeightScheme};

pub const SOFTWARE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const DRAWS_FILE: &str = "draws.csv";
pub const SELECTED_FILE: &str = "selected.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub values: Matrix,
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let cell = raw.trim();
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("'{cell}' is not finite"),
        });
    }
    Ok(v)
}

/// Reads an all-numeric CSV. Parse errors name the 1-based data row and the
/// column header.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Data("missing header row".into()));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: r + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                row: r + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (cell, name) in rec.iter().zip(&header) {
            data.push(parse_cell(cell, r + 1, name)?);
        }
        rows += 1;
    }
    Ok(Table {
        values: Matrix::new(rows, header.len(), data)?,
        header,
    })
}

/// Loads a regression dataset. Every non-response column is a predictor, in
/// header order; both sides are centered and the means kept for
/// back-transformation.
pub fn load_csv(path: impl AsRef<Path>, response: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_csv_from(file, response)
}

pub fn load_csv_from<R: Read>(reader: R, response: &str) -> Result<Dataset> {
    let table = read_table(reader)?;
    let resp = table
        .header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::Data(format!("response column '{response}' not found")))?;
    let n = table.values.rows();
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 data rows, found {n}")));
    }
    if table.header.len() < 2 {
        return Err(Error::Data("no predictor columns".into()));
    }
    let pred: Vec<usize> = (0..table.header.len()).filter(|&j| j != resp).collect();
    let x = table.values.select_cols(&pred);
    let y = table.values.column(resp);
    let names: Vec<String> = pred.iter().map(|&j| table.header[j].clone()).collect();
    for (j, name) in names.iter().enumerate() {
        let col = x.column(j);
        if col.iter().all(|v| *v == col[0]) {
            return Err(Error::Data(format!("predictor '{name}' is constant")));
        }
    }
    Dataset::from_raw(&x, &y)?.with_names(names)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Everything about a batch except the draws themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub software_version: String,
    pub procedure: Procedure,
    pub scheme: Option<WeightScheme>,
    pub distribution: Option<WeightDistribution>,
    pub lambda: f64,
    pub seed: u64,
    pub kkt_tol: f64,
    pub n_obs: usize,
    pub draws: usize,
    pub names: Vec<String>,
    pub issues: Vec<DrawIssue>,
}

impl BatchManifest {
    pub fn of(batch: &SampleBatch) -> Self {
        Self {
            software_version: SOFTWARE_VERSION.to_string(),
            procedure: batch.procedure,
            scheme: batch.scheme,
            distribution: batch.dist,
            lambda: batch.lambda,
            seed: batch.master_seed,
            kkt_tol: batch.kkt_tol,
            n_obs: batch.n_obs,
            draws: batch.len(),
            names: batch.names.clone(),
            issues: batch.issues.clone(),
        }
    }
}

/// Writes `draws.csv`, `selected.csv` and `manifest.json` into `dir`.
///
/// `selected.csv` has one row per draw: the 0-based draw index and the
/// 1-based selected variables joined by `;`.
pub fn write_batch(batch: &SampleBatch, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;

    let path = dir.join(DRAWS_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(&batch.names).map_err(|e| csv_err(&path, e))?;
    for b in 0..batch.len() {
        w.write_record(batch.draw(b).iter().map(|v| fmt_f64(*v)))
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(SELECTED_FILE);
    let mut w = csv_writer(&path)?;
    w.write_record(["draw_index", "selected"]).map_err(|e| csv_err(&path, e))?;
    for (b, s) in batch.selected.iter().enumerate() {
        let members: Vec<String> = s.to_one_based().iter().map(|j| j.to_string()).collect();
        w.write_record([b.to_string(), members.join(";")])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    write_json(&BatchManifest::of(batch), dir.join(MANIFEST_FILE))
}

/// Inverse of [`write_batch`].
pub fn read_batch(dir: impl AsRef<Path>) -> Result<SampleBatch> {
    let dir = dir.as_ref();
    let manifest: BatchManifest = read_json(dir.join(MANIFEST_FILE))?;
    let path = dir.join(DRAWS_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let table = read_table(file)?;
    if table.header != manifest.names {
        return Err(Error::Format {
            path,
            message: "draws.csv header does not match the manifest names".into(),
        });
    }
    if table.values.rows() != manifest.draws {
        return Err(Error::Format {
            path,
            message: format!("expected {} draws, found {}", manifest.draws, table.values.rows()),
        });
    }
    let p = table.header.len();

    let path = dir.join(SELECTED_FILE);
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut selected = Vec::with_capacity(manifest.draws);
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(&path, e))?;
        let bad = |message: String| Error::Parse {
            row: r + 1,
            column: "selected".into(),
            message,
        };
        if rec.get(0) != Some(r.to_string().as_str()) {
            return Err(bad(format!("expected draw_index {r}")));
        }
        let members = rec.get(1).unwrap_or("");
        let idx = members
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| match s.trim().parse::<usize>() {
                Ok(j) if j >= 1 => Ok(j - 1),
                _ => Err(bad(format!("'{s}' is not a 1-based index"))),
            })
            .collect::<Result<Vec<_>>>()?;
        selected.push(SupportSet::new(idx, p)?);
    }
    if selected.len() != manifest.draws {
        return Err(Error::Format {
            path,
            message: format!("expected {} rows, found {}", manifest.draws, selected.len()),
        });
    }

    Ok(SampleBatch {
        draws: table.values,
        selected,
        names: manifest.names,
        procedure: manifest.procedure,
        scheme: manifest.scheme,
        dist: manifest.distribution,
        lambda: manifest.lambda,
        master_seed: manifest.seed,
        kkt_tol: manifest.kkt_tol,
        n_obs: manifest.n_obs,
        issues: manifest.issues,
    })
}

/// Per-variable table: `variable, select_prob, ci_low, ci_high, ci_width`
/// plus `covered` and `tv` when present.
pub fn write_report_csv(report: &DiagnosticsReport, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["variable", "select_prob", "ci_low", "ci_high", "ci_width"];
    if report.covered.is_some() {
        header.push("covered");
    }
    if report.tv_per_var.is_some() {
        header.push("tv");
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (j, name) in names.iter().enumerate() {
        let mut row = vec![
            name.clone(),
            fmt_f64(report.select_prob[j]),
            fmt_f64(report.ci_low[j]),
            fmt_f64(report.ci_high[j]),
            fmt_f64(report.ci_width[j]),
        ];
        if let Some(c) = &report.covered {
            row.push(u8::from(c[j]).to_string());
        }
        if let Some(tv) = &report.tv_per_var {
            row.push(fmt_f64(tv[j]));
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_cv_csv(cv: &CvResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["lambda", "cv_error"]).map_err(|e| csv_err(path, e))?;
    for (l, e) in cv.lambda_grid.iter().zip(&cv.cv_error) {
        w.write_record([fmt_f64(*l), fmt_f64(*e)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Long-format rows `replicate, method, metric, variable, value`.
/// Scalar metrics leave `variable` empty; data-level rows use method `data`.
pub fn write_replicates_csv<W: Write>(results: &[ReplicateResult], names: &[String], out: W) -> Result<()> {
    let path = PathBuf::from("<simulation output>");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replicate", "method", "metric", "variable", "value"])
        .map_err(|e| csv_err(&path, e))?;
    let mut emit = |r: usize, method: &str, metric: &str, var: &str, value: String| {
        w.write_record([r.to_string().as_str(), method, metric, var, value.as_str()])
            .map_err(|e| csv_err(&path, e))
    };
    for res in results {
        let r = res.replicate;
        emit(r, "data", "lambda_two_step", "", fmt_f64(res.lambda_two_step))?;
        emit(r, "data", "lambda_one_step", "", fmt_f64(res.lambda_one_step))?;
        if let Some(irr) = &res.irrepresentable {
            emit(r, "data", "irrepresentable_eta_star", "", fmt_f64(irr.eta_star))?;
            emit(r, "data", "irrepresentable_satisfied", "", u8::from(irr.satisfied).to_string())?;
        }
        for m in &res.methods {
            let label = m.method.to_string();
            emit(r, &label, "lambda", "", fmt_f64(m.lambda))?;
            emit(r, &label, "flagged_draws", "", m.flagged_draws.to_string())?;
            let Some(rep) = &m.report else {
                emit(r, &label, "failed", "", "1".into())?;
                continue;
            };
            emit(r, &label, "mse", "", fmt_f64(rep.mse))?;
            if let Some(v) = rep.mspe {
                emit(r, &label, "mspe", "", fmt_f64(v))?;
            }
            if let Some(v) = rep.tv_mean() {
                emit(r, &label, "tv_mean", "", fmt_f64(v))?;
            }
            for (j, name) in names.iter().enumerate() {
                emit(r, &label, "select_prob", name, fmt_f64(rep.select_prob[j]))?;
                emit(r, &label, "ci_low", name, fmt_f64(rep.ci_low[j]))?;
                emit(r, &label, "ci_high", name, fmt_f64(rep.ci_high[j]))?;
                emit(r, &label, "ci_width", name, fmt_f64(rep.ci_width[j]))?;
                if let Some(c) = &rep.covered {
                    emit(r, &label, "covered", name, u8::from(c[j]).to_string())?;
                }
                if let Some(tv) = &rep.tv_per_var {
                    emit(r, &label, "tv", name, fmt_f64(tv[j]))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimManifest {
    pub software_version: String,
    pub setting: SimSetting,
    pub seed: u64,
    pub methods: Vec<String>,
    pub method_seeds: Vec<Vec<u64>>,
    pub cv_seeds: Vec<u64>,
}

impl SimManifest {
    pub fn of(setting: &SimSetting, seed: u64, results: &[ReplicateResult]) -> Self {
        Self {
            software_version: SOFTWARE_VERSION.to_string(),
            setting: setting.clone(),
            seed,
            methods: results
                .first()
                .map(|r| r.methods.iter().map(|m| m.method.to_string()).collect())
                .unwrap_or_default(),
            method_seeds: results
                .iter()
                .map(|r| r.methods.iter().map(|m| m.seed).collect())
                .collect(),
            cv_seeds: results.iter().map(|r| r.seeds.cv).collect(),
        }
    }
}
