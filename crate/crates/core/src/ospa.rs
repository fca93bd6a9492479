//! OSPA and labeled OSPA-T miss distances.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};

use crate::assignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaParams {
    /// Order p.
    pub order: f64,
    /// Cut-off c.
    pub cutoff: f64,
    /// Labeling error penalty α, in [0, c].
    pub label_penalty: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self {
            order: 1.0,
            cutoff: 300.0,
            label_penalty: 100.0,
        }
    }
}

impl OspaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.order >= 1.0 && self.order.is_finite()) {
            return Err(Error::Config(format!("OSPA order must be >= 1, got {}", self.order)));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::Config(format!("OSPA cut-off must be positive, got {}", self.cutoff)));
        }
        if !(0.0..=self.cutoff).contains(&self.label_penalty) {
            return Err(Error::Config(format!(
                "label penalty must lie in [0, c], got {}",
                self.label_penalty
            )));
        }
        Ok(())
    }
}

/// A position tagged with a track identity.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint<L> {
    pub label: L,
    pub position: DVector<f64>,
}

impl<L> LabeledPoint<L> {
    pub fn new(label: L, position: DVector<f64>) -> Self {
        Self { label, position }
    }
}

/// OSPA from a matrix of already cut-off base distances (rows: X, columns: Y).
fn ospa_from_distances(d: &DMatrix<f64>, params: &OspaParams) -> f64 {
    let (m, n) = d.shape();
    if m == 0 && n == 0 {
        return 0.0;
    }
    let p = params.order;
    let c = params.cutoff;
    let powered = d.map(|x| x.min(c).powf(p));
    let matched = if m == 0 || n == 0 {
        0.0
    } else if m <= n {
        assignment::solve(&powered).expect("finite costs").cost
    } else {
        assignment::solve(&powered.transpose()).expect("finite costs").cost
    };
    let cardinality = c.powf(p) * m.abs_diff(n) as f64;
    ((matched + cardinality) / m.max(n) as f64).powf(1.0 / p).min(c)
}

/// Unlabeled OSPA distance between two point sets.
pub fn ospa(x: &[DVector<f64>], y: &[DVector<f64>], params: &OspaParams) -> f64 {
    let d = DMatrix::from_fn(x.len(), y.len(), |i, j| (&x[i] - &y[j]).norm());
    ospa_from_distances(&d, params)
}

/// Global truth-to-estimate correspondence: an optimal assignment on the
/// per-pair costs accumulated over all steps. Both present: min(c, d)^p;
/// only one present: c^p; neither: 0.
pub fn correspondence<T, E>(
    truth: &[Vec<LabeledPoint<T>>],
    estimates: &[Vec<LabeledPoint<E>>],
    params: &OspaParams,
) -> HashMap<T, E>
where
    T: Copy + Eq + Hash + Ord,
    E: Copy + Eq + Hash + Ord,
{
    let mut t_ids: Vec<T> = truth.iter().flatten().map(|p| p.label).collect();
    t_ids.sort();
    t_ids.dedup();
    let mut e_ids: Vec<E> = estimates.iter().flatten().map(|p| p.label).collect();
    e_ids.sort();
    e_ids.dedup();
    if t_ids.is_empty() || e_ids.is_empty() {
        return HashMap::new();
    }
    let t_index: HashMap<T, usize> = t_ids.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let e_index: HashMap<E, usize> = e_ids.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let cp = params.cutoff.powf(params.order);

    // start from "never both present" and correct the steps where both are
    let mut t_steps = vec![0usize; t_ids.len()];
    let mut e_steps = vec![0usize; e_ids.len()];
    let mut both = DMatrix::<f64>::zeros(t_ids.len(), e_ids.len());
    let mut both_count = DMatrix::<f64>::zeros(t_ids.len(), e_ids.len());
    let steps = truth.len().max(estimates.len());
    for k in 0..steps {
        let ts = truth.get(k).map(Vec::as_slice).unwrap_or(&[]);
        let es = estimates.get(k).map(Vec::as_slice).unwrap_or(&[]);
        for t in ts {
            t_steps[t_index[&t.label]] += 1;
        }
        for e in es {
            e_steps[e_index[&e.label]] += 1;
        }
        for t in ts {
            let i = t_index[&t.label];
            for e in es {
                let j = e_index[&e.label];
                let d = (&t.position - &e.position).norm().min(params.cutoff);
                both[(i, j)] += d.powf(params.order);
                both_count[(i, j)] += 1.0;
            }
        }
    }
    // steps with exactly one present: t_steps + e_steps - 2 * both_count
    let cost = DMatrix::from_fn(t_ids.len(), e_ids.len(), |i, j| {
        let single = (t_steps[i] + e_steps[j]) as f64 - 2.0 * both_count[(i, j)];
        both[(i, j)] + cp * single
    });
    let pairs: Vec<(usize, usize)> = if t_ids.len() <= e_ids.len() {
        let a = assignment::solve(&cost).expect("finite costs");
        a.columns.iter().enumerate().map(|(i, &j)| (i, j)).collect()
    } else {
        let a = assignment::solve(&cost.transpose()).expect("finite costs");
        a.columns.iter().enumerate().map(|(j, &i)| (i, j)).collect()
    };
    pairs.into_iter().map(|(i, j)| (t_ids[i], e_ids[j])).collect()
}

/// Per-step OSPA-T. Pairs whose labels are not in the global correspondence
/// pay the label penalty: d = min(c, (‖Δ‖^p + α^p)^(1/p)).
pub fn ospat<T, E>(
    truth: &[Vec<LabeledPoint<T>>],
    estimates: &[Vec<LabeledPoint<E>>],
    params: &OspaParams,
) -> Vec<f64>
where
    T: Copy + Eq + Hash + Ord,
    E: Copy + Eq + Hash + Ord,
{
    let map = correspondence(truth, estimates, params);
    let p = params.order;
    let penalty = params.label_penalty.powf(p);
    let steps = truth.len().max(estimates.len());
    (0..steps)
        .map(|k| {
            let ts = truth.get(k).map(Vec::as_slice).unwrap_or(&[]);
            let es = estimates.get(k).map(Vec::as_slice).unwrap_or(&[]);
            let d = DMatrix::from_fn(ts.len(), es.len(), |i, j| {
                let dist = (&ts[i].position - &es[j].position).norm();
                if map.get(&ts[i].label) == Some(&es[j].label) {
                    dist
                } else {
                    (dist.powf(p) + penalty).powf(1.0 / p)
                }
            });
            ospa_from_distances(&d, params)
        })
        .collect()
}
