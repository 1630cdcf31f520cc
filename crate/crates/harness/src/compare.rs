//! Baseline-versus-model comparison over per-seed metrics CSVs.
//!
//! Vehicle-level values are pooled across seeds. Count metrics report the
//! mean per-seed total; the others report the pooled per-vehicle mean. The
//! p-value is always Welch's test on the pooled per-vehicle values.

use crate::stats::{mean, welch};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("{0}: no seed-*/metrics.csv files")]
    NoSeeds(String),
    #[error("{dir}: {found} seed(s), at least 2 needed")]
    TooFewSeeds { dir: String, found: usize },
    #[error("column sets differ: {left} vs {right}")]
    SchemaMismatch { left: String, right: String },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: bad number '{value}' in column '{column}'")]
    BadNumber { path: String, column: String, value: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregate {
    /// Mean over seeds of the per-seed column total.
    SeedTotal,
    /// Mean over every vehicle of every seed.
    VehicleMean,
}

/// Whether a decrease counts as an improvement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Clone, Copy, Debug)]
pub struct MetricDef {
    pub name: &'static str,
    pub column: &'static str,
    pub aggregate: Aggregate,
    pub sense: Sense,
    pub unit: &'static str,
}

const fn def(name: &'static str, column: &'static str, aggregate: Aggregate, sense: Sense, unit: &'static str) -> MetricDef {
    MetricDef { name, column, aggregate, sense, unit }
}

/// Metrics that each get their own bar chart.
pub const HEADLINE: &[MetricDef] = &[
    def("serious_collisions", "serious_collisions", Aggregate::SeedTotal, Sense::LowerIsBetter, "count per episode"),
    def("vv_collisions", "vv_collisions", Aggregate::SeedTotal, Sense::LowerIsBetter, "count per episode"),
    def("vnv_collisions", "vnv_collisions", Aggregate::SeedTotal, Sense::LowerIsBetter, "count per episode"),
    def("avg_distance", "distance", Aggregate::VehicleMean, Sense::HigherIsBetter, "units per vehicle"),
    def("avg_stopped_time", "stopped_total", Aggregate::VehicleMean, Sense::LowerIsBetter, "s per vehicle"),
    def("pass_throughs", "pass_throughs", Aggregate::SeedTotal, Sense::HigherIsBetter, "count per episode"),
    def("fuel_per_mile", "fuel_per_mile", Aggregate::VehicleMean, Sense::LowerIsBetter, "gal per mile"),
    def("co2_per_mile", "co2_per_mile", Aggregate::VehicleMean, Sense::LowerIsBetter, "g per mile"),
];

/// Speed-bin dwell times, reported and charted as one group.
pub const SPEED_BINS: &[MetricDef] = &[
    def("time_0_5", "bin_0_5", Aggregate::VehicleMean, Sense::LowerIsBetter, "s per vehicle"),
    def("time_5_10", "bin_5_10", Aggregate::VehicleMean, Sense::LowerIsBetter, "s per vehicle"),
    def("time_10_15", "bin_10_15", Aggregate::VehicleMean, Sense::LowerIsBetter, "s per vehicle"),
    def("time_15_20", "bin_15_20", Aggregate::VehicleMean, Sense::HigherIsBetter, "s per vehicle"),
    def("time_20_25", "bin_20_25", Aggregate::VehicleMean, Sense::HigherIsBetter, "s per vehicle"),
    def("time_25_30", "bin_25_30", Aggregate::VehicleMean, Sense::HigherIsBetter, "s per vehicle"),
    def("time_30_35", "bin_30_35", Aggregate::VehicleMean, Sense::LowerIsBetter, "s per vehicle"),
];

pub fn all_metrics() -> impl Iterator<Item = &'static MetricDef> {
    HEADLINE.iter().chain(SPEED_BINS)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub unit: String,
    pub baseline_mean: f64,
    pub model_mean: f64,
    /// (model - baseline) / baseline * 100.
    pub percent_change: f64,
    /// `percent_change` with its sign flipped for lower-is-better metrics.
    pub improvement: f64,
    pub p_value: f64,
    pub baseline_n: usize,
    pub model_n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<MetricRow>,
}

impl ComparisonReport {
    pub fn get(&self, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

pub const REPORT_COLUMNS: &[&str] = &[
    "metric",
    "unit",
    "baseline_mean",
    "model_mean",
    "percent_change",
    "improvement",
    "p_value",
    "baseline_n",
    "model_n",
];

/// Vehicle rows of the last capture of every seed in a run directory.
pub struct RunData {
    pub dir: PathBuf,
    pub columns: Vec<String>,
    /// Column name to per-seed vectors of per-vehicle values; empty cells are skipped.
    pub values: BTreeMap<String, Vec<Vec<f64>>>,
}

impl RunData {
    pub fn seeds(&self) -> usize {
        self.values.values().next().map_or(0, Vec::len)
    }
}

/// `seed-*` subdirectories holding a `metrics.csv`, in name order.
pub fn seed_dirs(dir: &Path) -> Result<Vec<PathBuf>, CompareError> {
    let entries = std::fs::read_dir(dir).map_err(|source| CompareError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("seed-")) && p.join("metrics.csv").is_file()
        })
        .collect();
    out.sort();
    Ok(out)
}

fn read_metrics(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), CompareError> {
    let p = path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|source| CompareError::Csv { path: p.clone(), source })?;
    let header: Vec<String> = r
        .headers()
        .map_err(|source| CompareError::Csv { path: p.clone(), source })?
        .iter()
        .map(String::from)
        .collect();
    let rows = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| CompareError::Csv { path: p, source })?;
    Ok((header, rows))
}

fn schema(cols: &[String]) -> String {
    let mut c = cols.to_vec();
    c.sort();
    c.join(",")
}

pub fn load_run(dir: &Path) -> Result<RunData, CompareError> {
    let seeds = seed_dirs(dir)?;
    if seeds.is_empty() {
        return Err(CompareError::NoSeeds(dir.display().to_string()));
    }
    let mut columns: Option<Vec<String>> = None;
    let mut values: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for s in &seeds {
        let path = s.join("metrics.csv");
        let p = path.display().to_string();
        let (header, rows) = read_metrics(&path)?;
        match &columns {
            Some(c) if schema(c) != schema(&header) => {
                return Err(CompareError::SchemaMismatch { left: schema(c), right: schema(&header) })
            }
            None => columns = Some(header.clone()),
            _ => {}
        }
        let idx = |name: &str| {
            header.iter().position(|h| h == name).ok_or_else(|| CompareError::MissingColumn {
                path: p.clone(),
                column: name.to_string(),
            })
        };
        let time_col = idx("capture_time")?;
        let last = rows.iter().filter_map(|r| r.get(time_col)).max_by(|a, b| {
            a.parse::<f64>().unwrap_or(f64::NEG_INFINITY).total_cmp(&b.parse::<f64>().unwrap_or(f64::NEG_INFINITY))
        });
        let last = last.map(String::from);
        let final_rows: Vec<&csv::StringRecord> = rows.iter().filter(|r| r.get(time_col) == last.as_deref()).collect();
        for m in all_metrics() {
            let col = idx(m.column)?;
            let mut v = Vec::with_capacity(final_rows.len());
            for r in &final_rows {
                let cell = r.get(col).unwrap_or("");
                if cell.is_empty() {
                    continue;
                }
                v.push(cell.parse::<f64>().map_err(|_| CompareError::BadNumber {
                    path: p.clone(),
                    column: m.column.to_string(),
                    value: cell.to_string(),
                })?);
            }
            values.entry(m.column.to_string()).or_default().push(v);
        }
    }
    Ok(RunData { dir: dir.to_path_buf(), columns: columns.unwrap_or_default(), values })
}

fn aggregate(per_seed: &[Vec<f64>], how: Aggregate) -> f64 {
    match how {
        Aggregate::SeedTotal => mean(&per_seed.iter().map(|s| s.iter().sum::<f64>()).collect::<Vec<_>>()),
        Aggregate::VehicleMean => {
            let pooled: Vec<f64> = per_seed.iter().flatten().copied().collect();
            if pooled.is_empty() {
                0.0
            } else {
                mean(&pooled)
            }
        }
    }
}

pub fn percent_change(baseline: f64, model: f64) -> f64 {
    if baseline == model {
        0.0
    } else {
        (model - baseline) / baseline * 100.0
    }
}

pub fn compare_runs(baseline: &RunData, model: &RunData) -> Result<ComparisonReport, CompareError> {
    for run in [baseline, model] {
        if run.seeds() < 2 {
            return Err(CompareError::TooFewSeeds { dir: run.dir.display().to_string(), found: run.seeds() });
        }
    }
    if schema(&baseline.columns) != schema(&model.columns) {
        return Err(CompareError::SchemaMismatch { left: schema(&baseline.columns), right: schema(&model.columns) });
    }
    let rows = all_metrics()
        .map(|m| {
            let b = &baseline.values[m.column];
            let v = &model.values[m.column];
            let bm = aggregate(b, m.aggregate);
            let vm = aggregate(v, m.aggregate);
            let pb: Vec<f64> = b.iter().flatten().copied().collect();
            let pv: Vec<f64> = v.iter().flatten().copied().collect();
            let change = percent_change(bm, vm);
            MetricRow {
                metric: m.name.to_string(),
                unit: m.unit.to_string(),
                baseline_mean: bm,
                model_mean: vm,
                percent_change: change,
                improvement: match m.sense {
                    Sense::LowerIsBetter => -change,
                    Sense::HigherIsBetter => change,
                },
                p_value: welch(&pb, &pv).map_or(f64::NAN, |w| w.p),
                baseline_n: pb.len(),
                model_n: pv.len(),
            }
        })
        .collect();
    Ok(ComparisonReport { rows })
}

pub fn compare_dirs(baseline: &Path, model: &Path) -> Result<ComparisonReport, CompareError> {
    compare_runs(&load_run(baseline)?, &load_run(model)?)
}

/// Shortest round-trip formatting, shared with the charts so both carry the same digits.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn report_rows(report: &ComparisonReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.metric.clone(),
                r.unit.clone(),
                num(r.baseline_mean),
                num(r.model_mean),
                num(r.percent_change),
                num(r.improvement),
                num(r.p_value),
                r.baseline_n.to_string(),
                r.model_n.to_string(),
            ]
        })
        .collect()
}

pub fn summary_text(report: &ComparisonReport) -> String {
    let mut s = format!("{:<20} {:>14} {:>14} {:>10} {:>12} {:>10}\n", "metric", "baseline", "model", "change%", "improvement%", "p");
    for r in &report.rows {
        s.push_str(&format!(
            "{:<20} {:>14.4} {:>14.4} {:>10.2} {:>12.2} {:>10.3e}\n",
            r.metric, r.baseline_mean, r.model_mean, r.percent_change, r.improvement, r.p_value
        ));
    }
    s
}

/// Writes `report.csv` and `report.txt` into `out`.
pub fn write_report(report: &ComparisonReport, out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("report.csv"))?;
    w.write_record(REPORT_COLUMNS)?;
    for r in report_rows(report) {
        w.write_record(&r)?;
    }
    w.flush()?;
    std::fs::write(out.join("report.txt"), summary_text(report))?;
    Ok(())
}
