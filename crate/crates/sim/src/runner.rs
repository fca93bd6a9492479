//! Filter runs and Monte-Carlo evaluation.
//!
//! The three filters are the same pipeline under different representation
//! policies, fed with the same measurement stream within a run.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use almb_core::ospa::{ospat, LabeledPoint};
use almb_core::pipeline::StepDiagnostics;
use almb_core::{AlmbFilter, Label, RepresentationPolicy, TrackEstimate};
use nalgebra::{dvector, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};
use crate::truth::{generate_measurements, generate_truth, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterKind {
    Lmb,
    Dglmb,
    Almb,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Lmb, FilterKind::Dglmb, FilterKind::Almb];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Lmb => "lmb",
            FilterKind::Dglmb => "dglmb",
            FilterKind::Almb => "almb",
        }
    }

    pub fn policy(self) -> RepresentationPolicy {
        match self {
            FilterKind::Lmb => RepresentationPolicy::PinnedLmb,
            FilterKind::Dglmb => RepresentationPolicy::PinnedDglmb,
            FilterKind::Almb => RepresentationPolicy::Adaptive,
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown filter '{s}' (expected lmb, dglmb or almb)")))
    }
}

/// Output of one filter over one measurement sequence.
#[derive(Debug, Clone)]
pub struct FilterRun {
    pub estimates: Vec<Vec<TrackEstimate>>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Wall-clock seconds of each filter step.
    pub step_times: Vec<f64>,
}

impl FilterRun {
    /// Estimated positions per step.
    pub fn positions(&self) -> Vec<Vec<LabeledPoint<Label>>> {
        self.estimates
            .iter()
            .map(|step| {
                step.iter()
                    .map(|e| LabeledPoint::new(e.label, position(&e.state)))
                    .collect()
            })
            .collect()
    }
}

fn position(state: &DVector<f64>) -> DVector<f64> {
    dvector![state[0], state[2]]
}

/// Runs one filter over all scans.
pub fn run_filter(kind: FilterKind, scans: &[Vec<DVector<f64>>], config: &ScenarioConfig) -> Result<FilterRun> {
    let pipeline = almb_core::PipelineConfig {
        policy: kind.policy(),
        ..config.pipeline()?
    };
    let mut filter = AlmbFilter::new(config.models()?, pipeline)?;
    let mut out = FilterRun {
        estimates: Vec::with_capacity(scans.len()),
        diagnostics: Vec::with_capacity(scans.len()),
        step_times: Vec::with_capacity(scans.len()),
    };
    for z in scans {
        let started = Instant::now();
        let (estimates, diagnostics) = filter.step(z)?;
        out.step_times.push(started.elapsed().as_secs_f64());
        out.estimates.push(estimates);
        out.diagnostics.push(diagnostics);
    }
    Ok(out)
}

/// One output row: a (run, step, filter) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub run: u32,
    pub k: u32,
    pub filter: FilterKind,
    pub ospat_m: f64,
    pub step_time_s: f64,
    pub n_est: usize,
    pub n_true: usize,
    pub n_lmb_groups: usize,
    pub n_dglmb_groups: usize,
    pub max_kl: f64,
    pub max_entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Record wall-clock step times; when false they are written as zero so
    /// that the output depends on configuration and seed only.
    pub timing: bool,
}

/// Simulates run `run` (seed `config.seed + run`) and evaluates `filters`.
pub fn run_once(
    config: &ScenarioConfig,
    truth: &GroundTruth,
    run: u32,
    filters: &[FilterKind],
    options: RunOptions,
) -> Result<Vec<StepRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(run as u64));
    let scans = generate_measurements(truth, config, &mut rng);
    let truth_points = truth.positions();
    let params = config.ospa_params();
    let mut records = Vec::with_capacity(filters.len() * scans.len());
    for &kind in filters {
        let result = run_filter(kind, &scans, config)?;
        let distances = ospat(&truth_points, &result.positions(), &params);
        for (i, d) in result.diagnostics.iter().enumerate() {
            let k = i as u32 + 1;
            records.push(StepRecord {
                run,
                k,
                filter: kind,
                ospat_m: distances[i],
                step_time_s: if options.timing { result.step_times[i] } else { 0.0 },
                n_est: result.estimates[i].len(),
                n_true: truth.cardinality(k),
                n_lmb_groups: d.lmb_groups,
                n_dglmb_groups: d.dglmb_groups,
                max_kl: d.max_kl,
                max_entropy: d.max_entropy,
            });
        }
    }
    records.sort_by_key(|r| (r.run, r.k, r.filter));
    Ok(records)
}

/// Runs `runs` Monte-Carlo repetitions. Runs are executed one after the
/// other so that step timings are not distorted by competing threads.
pub fn monte_carlo(
    config: &ScenarioConfig,
    runs: u32,
    filters: &[FilterKind],
    options: RunOptions,
    mut progress: impl FnMut(u32),
) -> Result<Vec<StepRecord>> {
    if runs == 0 {
        return Err(SimError::Config("at least one run is required".into()));
    }
    let truth = generate_truth(config);
    let mut records = Vec::new();
    for run in 0..runs {
        records.extend(run_once(config, &truth, run, filters, options)?);
        progress(run);
    }
    Ok(records)
}

/// Means over runs for one (step, filter) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: u32,
    pub filter: FilterKind,
    pub runs: usize,
    pub ospat_m: f64,
    pub step_time_s: f64,
    pub n_est: f64,
    pub n_true: f64,
    pub n_lmb_groups: f64,
    pub n_dglmb_groups: f64,
    pub max_kl: f64,
    pub max_entropy: f64,
}

/// Per-(k, filter) averages, ordered by step then filter.
pub fn aggregate(records: &[StepRecord]) -> Vec<AggregateRow> {
    let mut rows: std::collections::BTreeMap<(u32, FilterKind), Vec<&StepRecord>> = Default::default();
    for r in records {
        rows.entry((r.k, r.filter)).or_default().push(r);
    }
    rows.into_iter()
        .map(|((k, filter), rs)| {
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&StepRecord) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
            AggregateRow {
                k,
                filter,
                runs: rs.len(),
                ospat_m: mean(&|r| r.ospat_m),
                step_time_s: mean(&|r| r.step_time_s),
                n_est: mean(&|r| r.n_est as f64),
                n_true: mean(&|r| r.n_true as f64),
                n_lmb_groups: mean(&|r| r.n_lmb_groups as f64),
                n_dglmb_groups: mean(&|r| r.n_dglmb_groups as f64),
                max_kl: mean(&|r| r.max_kl),
                max_entropy: mean(&|r| r.max_entropy),
            }
        })
        .collect()
}

/// Mean of `value` over the rows of `filter` with k in `[from, to]`.
pub fn window_mean(rows: &[AggregateRow], filter: FilterKind, from: u32, to: u32, value: impl Fn(&AggregateRow) -> f64) -> f64 {
    let picked: Vec<f64> = rows
        .iter()
        .filter(|r| r.filter == filter && (from..=to).contains(&r.k))
        .map(value)
        .collect();
    picked.iter().sum::<f64>() / picked.len().max(1) as f64
}
