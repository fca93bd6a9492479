//! CSV files written by `track run` and `track plotdata`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Result, SimError};
use crate::runner::{aggregate, AggregateRow, FilterKind, StepRecord};

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

pub const RUNS_HEADER: [&str; 11] = [
    "run",
    "k",
    "filter",
    "ospat_m",
    "step_time_s",
    "n_est",
    "n_true",
    "n_lmb_groups",
    "n_dglmb_groups",
    "max_kl",
    "max_entropy",
];

const AGGREGATE_HEADER: [&str; 11] = [
    "k",
    "filter",
    "runs",
    "ospat_m",
    "step_time_s",
    "n_est",
    "n_true",
    "n_lmb_groups",
    "n_dglmb_groups",
    "max_kl",
    "max_entropy",
];

pub fn write_records(w: impl std::io::Write, records: &[StepRecord]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(RUNS_HEADER)?;
    for r in records {
        csv.write_record([
            r.run.to_string(),
            r.k.to_string(),
            r.filter.name().to_string(),
            r.ospat_m.to_string(),
            r.step_time_s.to_string(),
            r.n_est.to_string(),
            r.n_true.to_string(),
            r.n_lmb_groups.to_string(),
            r.n_dglmb_groups.to_string(),
            r.max_kl.to_string(),
            r.max_entropy.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| SimError::io("csv output", e))?;
    Ok(())
}

pub fn write_aggregate(w: impl std::io::Write, rows: &[AggregateRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        csv.write_record([
            r.k.to_string(),
            r.filter.name().to_string(),
            r.runs.to_string(),
            r.ospat_m.to_string(),
            r.step_time_s.to_string(),
            r.n_est.to_string(),
            r.n_true.to_string(),
            r.n_lmb_groups.to_string(),
            r.n_dglmb_groups.to_string(),
            r.max_kl.to_string(),
            r.max_entropy.to_string(),
        ])?;
    }
    csv.flush().map_err(|e| SimError::io("csv output", e))?;
    Ok(())
}

/// Writes `runs.csv` and `aggregate.csv` into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, records: &[StepRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let runs = dir.join(RUNS_FILE);
    let file = fs::File::create(&runs).map_err(|e| SimError::io(&runs, e))?;
    write_records(std::io::BufWriter::new(file), records)?;
    let agg = dir.join(AGGREGATE_FILE);
    let file = fs::File::create(&agg).map_err(|e| SimError::io(&agg, e))?;
    write_aggregate(std::io::BufWriter::new(file), &aggregate(records))
}

fn parse<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| SimError::Config(format!("malformed or missing column '{name}'")))
}

/// Reads a `runs.csv` file.
pub fn read_records(path: &Path) -> Result<Vec<StepRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RUNS_HEADER {
        return Err(SimError::Config(format!(
            "{}: unexpected header {}",
            path.display(),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = |i: usize| row.get(i);
        out.push(StepRecord {
            run: parse(f(0), "run")?,
            k: parse(f(1), "k")?,
            filter: f(2).unwrap_or("").parse()?,
            ospat_m: parse(f(3), "ospat_m")?,
            step_time_s: parse(f(4), "step_time_s")?,
            n_est: parse(f(5), "n_est")?,
            n_true: parse(f(6), "n_true")?,
            n_lmb_groups: parse(f(7), "n_lmb_groups")?,
            n_dglmb_groups: parse(f(8), "n_dglmb_groups")?,
            max_kl: parse(f(9), "max_kl")?,
            max_entropy: parse(f(10), "max_entropy")?,
        });
    }
    Ok(out)
}

/// One wide table: `k` followed by one column per filter present.
fn write_series(path: &Path, rows: &[AggregateRow], value: impl Fn(&AggregateRow) -> f64) -> Result<()> {
    let mut filters: Vec<FilterKind> = rows.iter().map(|r| r.filter).collect();
    filters.sort();
    filters.dedup();
    let mut table: BTreeMap<u32, BTreeMap<FilterKind, f64>> = BTreeMap::new();
    for r in rows {
        table.entry(r.k).or_default().insert(r.filter, value(r));
    }
    let mut csv = csv::Writer::from_path(path)?;
    let mut header = vec!["k".to_string()];
    header.extend(filters.iter().map(|f| f.name().to_string()));
    csv.write_record(&header)?;
    for (k, by_filter) in table {
        let mut line = vec![k.to_string()];
        for f in &filters {
            line.push(by_filter.get(f).map(|v| v.to_string()).unwrap_or_default());
        }
        csv.write_record(&line)?;
    }
    csv.flush().map_err(|e| SimError::io(path, e))?;
    Ok(())
}

/// Per-figure tables from the runs in `input_dir`: mean OSPA-T, mean step
/// time and mean estimated cardinality per step and filter.
pub fn plotdata(input_dir: &Path, output_dir: &Path) -> Result<Vec<String>> {
    let records = read_records(&input_dir.join(RUNS_FILE))?;
    let rows = aggregate(&records);
    fs::create_dir_all(output_dir).map_err(|e| SimError::io(output_dir, e))?;
    let files = [
        ("ospat.csv", (|r: &AggregateRow| r.ospat_m) as fn(&AggregateRow) -> f64),
        ("runtime.csv", |r| r.step_time_s),
        ("cardinality.csv", |r| r.n_est),
    ];
    let mut written = Vec::new();
    for (name, value) in files {
        write_series(&output_dir.join(name), &rows, value)?;
        written.push(name.to_string());
    }
    Ok(written)
}
