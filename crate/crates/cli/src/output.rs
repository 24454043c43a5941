use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// 17 significant digits, enough to round-trip an f64.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Whitespace-separated columns with a `#` header line.
#[derive(Clone, Debug, Default)]
pub struct PlotData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn new(columns: &[&str]) -> Self {
        PlotData { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub table: Table,
    pub plot: PlotData,
    pub seeds: Value,
    pub estimates: Value,
    pub bounds: Value,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a Value,
    seeds: &'a Value,
    estimates: &'a Value,
    bounds: &'a Value,
    checks: &'a [Check],
    pass: bool,
}

pub fn write_artifacts(dir: &Path, config: &Value, outcome: &Outcome) -> io::Result<()> {
    fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
    w.write_record(&outcome.table.header)?;
    for row in &outcome.table.rows {
        w.write_record(row)?;
    }
    w.flush()?;

    let summary = Summary {
        config,
        seeds: &outcome.seeds,
        estimates: &outcome.estimates,
        bounds: &outcome.bounds,
        checks: &outcome.checks,
        pass: outcome.passed(),
    };
    let mut f = io::BufWriter::new(fs::File::create(dir.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f)?;
    f.flush()?;

    let mut f = io::BufWriter::new(fs::File::create(dir.join("plot.dat"))?);
    writeln!(f, "# {}", outcome.plot.columns.join(" "))?;
    for row in &outcome.plot.rows {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        writeln!(f, "{}", cells.join(" "))?;
    }
    f.flush()
}

/// Equal-width histogram over the sample range as `(center, count)` rows.
pub fn histogram(values: &[f64], bins: usize) -> Vec<Vec<f64>> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !(hi > lo) {
        return values.first().map(|&v| vec![vec![v, values.len() as f64]]).unwrap_or_default();
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts.iter().enumerate().map(|(i, &c)| vec![lo + (i as f64 + 0.5) * width, c as f64]).collect()
}
