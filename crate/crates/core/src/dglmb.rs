//! δ-GLMB recursion with a linear-Gaussian model and constant p_S, p_D.
//!
//! The update generates child hypotheses per predicted hypothesis through
//! ranked assignment on a `labels × (measurements + labels)` cost matrix
//! whose entries are negative log association factors; the trailing block
//! holds one missed-detection column per label. All weight arithmetic is done
//! in the log domain.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::assignment::ranked_assignments;
use crate::error::{Error, Result};
use crate::gaussian::{logsumexp, GaussianMixture, MixtureInnovation, MotionModel, SensorModel};
use crate::labeled::{best_subsets, DglmbDensity, Hypothesis, Label, LmbDensity};

/// Association of a hypothesis' labels to measurement indices; `None` is a
/// missed detection. Entries align with [`Hypothesis::labels`].
pub type AssociationMap = Vec<Option<usize>>;

/// Knobs of the δ-GLMB update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateParams {
    /// Maximum number of posterior hypotheses; `usize::MAX` for no limit.
    pub cap: usize,
    /// Squared Mahalanobis gate; pairs at or beyond it get zero likelihood.
    pub gate: Option<f64>,
}

impl UpdateParams {
    pub fn uncapped() -> Self {
        Self {
            cap: usize::MAX,
            gate: None,
        }
    }
}

/// Posterior of a δ-GLMB update plus its association statistics.
#[derive(Debug, Clone)]
pub struct UpdateOutput {
    pub posterior: DglmbDensity,
    /// Row labels of the marginal matrices (the predicted label space).
    pub labels: Vec<Label>,
    /// `assoc_marginals[(i, j)]`: probability that `labels[i]` exists and
    /// generated measurement `j`.
    pub assoc_marginals: DMatrix<f64>,
    /// Probability that `labels[i]` exists and was missed.
    pub miss_marginals: Vec<f64>,
    /// Association map of every posterior hypothesis.
    pub associations: Vec<AssociationMap>,
}

/// Prediction through survival and birth.
///
/// Each prior hypothesis spawns its surviving label subsets with weights
/// p_S^|L| (1 - p_S)^(|I| - |L|); the birth LMB contributes its subset weights
/// as an independent factor. At most `cap` hypotheses are kept.
pub fn predict(
    prior: &DglmbDensity,
    motion: &MotionModel,
    birth: &LmbDensity,
    cap: usize,
) -> Result<DglmbDensity> {
    for l in birth.labels() {
        if prior.label_space().binary_search(&l).is_ok() {
            return Err(Error::LabelCollision(l));
        }
    }
    let ps = motion.survival();
    let (log_in, log_out) = (ps.ln(), (1.0 - ps).ln());

    let mut predicted: HashMap<*const GaussianMixture, Arc<GaussianMixture>> = HashMap::new();
    let mut survivors: Vec<Hypothesis> = Vec::new();
    for h in prior.hypotheses() {
        if h.weight <= 0.0 {
            continue;
        }
        let mut spatial = Vec::with_capacity(h.len());
        for gm in h.spatial() {
            let key = Arc::as_ptr(gm);
            let p = match predicted.get(&key) {
                Some(p) => p.clone(),
                None => {
                    let p = Arc::new(gm.predict(motion)?);
                    predicted.insert(key, p.clone());
                    p
                }
            };
            spatial.push(p);
        }
        let n = h.len();
        for (members, log_w) in best_subsets(&vec![log_in; n], &vec![log_out; n], cap) {
            let labels = members.iter().map(|&i| h.labels()[i]).collect();
            let gms = members.iter().map(|&i| spatial[i].clone()).collect();
            survivors.push(Hypothesis::from_sorted(labels, gms, h.weight * log_w.exp()));
        }
    }
    let mut label_space = prior.label_space().to_vec();
    let mut survivors = DglmbDensity::from_parts(label_space.clone(), survivors);
    survivors.merge_duplicates();

    if birth.is_empty() {
        return Ok(survivors.prune(0.0, cap));
    }
    let survivors = survivors.prune(0.0, cap);
    let births = birth.to_dglmb(cap);
    let mut combined = Vec::with_capacity(survivors.hypotheses().len() * births.hypotheses().len());
    for s in survivors.hypotheses() {
        for b in births.hypotheses() {
            combined.push(s.product(b)?);
        }
    }
    label_space.extend(birth.labels());
    label_space.sort();
    let mut out = DglmbDensity::from_parts(label_space, combined);
    out.merge_duplicates();
    Ok(out.prune(0.0, cap))
}

/// Per-mixture measurement statistics shared by every hypothesis holding
/// the same mixture.
struct MixtureTerms {
    innovation: MixtureInnovation,
    /// ln(p_D g(z_j)/κ(z_j)) per measurement; -∞ when gated out.
    log_assign: Vec<f64>,
    updated: Vec<Option<Arc<GaussianMixture>>>,
}

/// Measurement update of a predicted δ-GLMB density.
pub fn update(
    predicted: &DglmbDensity,
    measurements: &[DVector<f64>],
    sensor: &SensorModel,
    params: &UpdateParams,
) -> Result<UpdateOutput> {
    let m = measurements.len();
    let pd = sensor.detection();
    let log_pd = pd.ln();
    let log_qd = (1.0 - pd).ln();
    let log_kappa = sensor.log_clutter_intensity();

    let mut terms: HashMap<*const GaussianMixture, MixtureTerms> = HashMap::new();
    for h in predicted.hypotheses() {
        for gm in h.spatial() {
            let key = Arc::as_ptr(gm);
            if terms.contains_key(&key) {
                continue;
            }
            let innovation = gm.innovation(sensor)?;
            let log_assign = measurements
                .iter()
                .map(|z| {
                    if let Some(gate) = params.gate {
                        if innovation.gate_distance_sq(z)? >= gate {
                            return Ok(f64::NEG_INFINITY);
                        }
                    }
                    Ok(log_pd + innovation.log_likelihood(z)? - log_kappa)
                })
                .collect::<Result<Vec<f64>>>()?;
            terms.insert(
                key,
                MixtureTerms {
                    innovation,
                    log_assign,
                    updated: vec![None; m],
                },
            );
        }
    }

    // (parent index, association, log weight)
    let mut children: Vec<(usize, AssociationMap, f64)> = Vec::new();
    for (hi, h) in predicted.hypotheses().iter().enumerate() {
        if h.weight <= 0.0 {
            continue;
        }
        let log_w = h.weight.ln();
        let n = h.len();
        if n == 0 {
            children.push((hi, Vec::new(), log_w));
            continue;
        }
        let mut cost = DMatrix::from_element(n, m + n, f64::INFINITY);
        for (a, gm) in h.spatial().iter().enumerate() {
            let t = &terms[&Arc::as_ptr(gm)];
            for j in 0..m {
                cost[(a, j)] = -t.log_assign[j];
            }
            cost[(a, m + a)] = -log_qd;
        }
        let k = if params.cap == usize::MAX {
            usize::MAX
        } else {
            ((params.cap as f64 * h.weight).ceil() as usize).max(1)
        };
        for assignment in ranked_assignments(&cost, k) {
            let map = assignment
                .columns
                .iter()
                .map(|&c| (c < m).then_some(c))
                .collect();
            children.push((hi, map, log_w - assignment.cost));
        }
    }

    let total = logsumexp(children.iter().map(|c| c.2));
    if !total.is_finite() {
        return Err(Error::Numerical(format!(
            "every association hypothesis has zero weight ({} predicted hypotheses, {} measurements, p_D = {pd})",
            predicted.hypotheses().len(),
            m
        )));
    }
    let mut weights: Vec<(usize, f64)> = children
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (c.2 - total).exp()))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    weights.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    weights.truncate(params.cap);
    let kept: f64 = weights.iter().map(|(_, w)| w).sum();

    let labels = predicted.label_space().to_vec();
    let row_of: HashMap<Label, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut assoc = DMatrix::zeros(labels.len(), m);
    let mut miss = vec![0.0; labels.len()];
    let mut hypotheses = Vec::with_capacity(weights.len());
    let mut associations = Vec::with_capacity(weights.len());
    for (ci, w) in weights {
        let w = w / kept;
        let (hi, map, _) = &children[ci];
        let parent = &predicted.hypotheses()[*hi];
        let mut spatial = Vec::with_capacity(parent.len());
        for (a, (label, gm)) in parent.entries().enumerate() {
            let row = row_of[&label];
            match map[a] {
                Some(j) => {
                    assoc[(row, j)] += w;
                    let t = terms.get_mut(&Arc::as_ptr(gm)).expect("cached");
                    let updated = match &t.updated[j] {
                        Some(u) => u.clone(),
                        None => {
                            let u = Arc::new(t.innovation.update(&measurements[j])?.mixture);
                            t.updated[j] = Some(u.clone());
                            u
                        }
                    };
                    spatial.push(updated);
                }
                None => {
                    miss[row] += w;
                    spatial.push(gm.clone());
                }
            }
        }
        hypotheses.push(Hypothesis::from_sorted(parent.labels().to_vec(), spatial, w));
        associations.push(map.clone());
    }

    Ok(UpdateOutput {
        posterior: DglmbDensity::from_parts(labels.clone(), hypotheses),
        labels,
        assoc_marginals: assoc,
        miss_marginals: miss,
        associations,
    })
}
