//! Labeled random finite set densities.
//!
//! An [`LmbDensity`] is a set of independent labeled Bernoulli tracks. A
//! [`DglmbDensity`] is a weighted list of [`Hypothesis`] values, each a label set
//! together with one spatial mixture per label. The association history that
//! distinguishes two hypotheses with the same label set is never stored
//! symbolically: it lives in the per-label mixtures, which are shared between
//! hypotheses through `Arc`.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gaussian::GaussianMixture;

/// Existence probabilities of exactly one are replaced by this before the
/// LMB subset weights are formed, which divide by `1 - r`.
pub const MAX_EXISTENCE: f64 = 1.0 - 1e-9;

/// Track identity: the scan a track was born in plus a disambiguator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub birth_step: u32,
    pub birth_index: u32,
}

impl Label {
    pub const fn new(birth_step: u32, birth_index: u32) -> Self {
        Self {
            birth_step,
            birth_index,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.birth_step, self.birth_index)
    }
}

/// Labeled Bernoulli component: existence probability plus spatial density.
#[derive(Debug, Clone)]
pub struct Track {
    pub label: Label,
    pub existence: f64,
    pub spatial: Arc<GaussianMixture>,
}

impl Track {
    pub fn new(label: Label, existence: f64, spatial: GaussianMixture) -> Self {
        Self {
            label,
            existence,
            spatial: Arc::new(spatial),
        }
    }
}

/// Labeled multi-Bernoulli density. Tracks are kept sorted by label.
#[derive(Debug, Clone, Default)]
pub struct LmbDensity {
    tracks: Vec<Track>,
}

/// One δ-GLMB component: a label set, its weight and one mixture per label.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    labels: Vec<Label>,
    spatial: Vec<Arc<GaussianMixture>>,
    pub weight: f64,
}

/// δ-GLMB density over a finite label space.
#[derive(Debug, Clone)]
pub struct DglmbDensity {
    label_space: Vec<Label>,
    hypotheses: Vec<Hypothesis>,
}

/// Either representation; the unit the adaptive filter keeps per group.
#[derive(Debug, Clone)]
pub enum MultiObjectDensity {
    Lmb(LmbDensity),
    Dglmb(DglmbDensity),
}

/// Probability mass over the number of objects, indexed from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityDistribution(Vec<f64>);

impl CardinalityDistribution {
    pub fn new(probabilities: Vec<f64>) -> Self {
        Self(probabilities)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Probability of `n` objects; zero beyond the stored support.
    pub fn get(&self, n: usize) -> f64 {
        self.0.get(n).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl LmbDensity {
    pub fn new(mut tracks: Vec<Track>) -> Result<Self> {
        tracks.sort_by_key(|t| t.label);
        if let Some(w) = tracks.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(Error::LabelCollision(w[0].label));
        }
        for t in &tracks {
            if !(0.0..=1.0).contains(&t.existence) {
                return Err(Error::Config(format!(
                    "existence of track {} outside [0, 1]: {}",
                    t.label, t.existence
                )));
            }
        }
        Ok(Self { tracks })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.tracks.iter().map(|t| t.label).collect()
    }

    pub fn get(&self, label: Label) -> Option<&Track> {
        self.tracks
            .binary_search_by_key(&label, |t| t.label)
            .ok()
            .map(|i| &self.tracks[i])
    }

    pub fn mean_cardinality(&self) -> f64 {
        self.tracks.iter().map(|t| t.existence).sum()
    }

    /// Set union of two LMB densities with disjoint label sets.
    pub fn union(mut self, other: LmbDensity) -> Result<Self> {
        self.tracks.extend(other.tracks);
        Self::new(self.tracks)
    }

    pub fn retain(&mut self, f: impl FnMut(&Track) -> bool) {
        self.tracks.retain(f);
    }

    /// Replaces every spatial mixture with `f(mixture)`.
    pub fn map_spatial(&mut self, mut f: impl FnMut(&GaussianMixture) -> GaussianMixture) {
        for t in &mut self.tracks {
            t.spatial = Arc::new(f(&t.spatial));
        }
    }

    /// Cardinality distribution by sequential convolution of the per-track
    /// Bernoulli distributions, i.e. the coefficients of ∏(1 - r + r x).
    pub fn cardinality(&self) -> CardinalityDistribution {
        let mut rho = vec![1.0];
        for t in &self.tracks {
            let r = t.existence;
            let mut next = vec![0.0; rho.len() + 1];
            for (n, p) in rho.iter().enumerate() {
                next[n] += p * (1.0 - r);
                next[n + 1] += p * r;
            }
            rho = next;
        }
        CardinalityDistribution(rho)
    }

    /// Equivalent δ-GLMB: one hypothesis per label subset with the LMB subset
    /// weight. At most `max_hypotheses` of the heaviest subsets are kept and
    /// renormalized.
    pub fn to_dglmb(&self, max_hypotheses: usize) -> DglmbDensity {
        let label_space = self.labels();
        let (log_in, log_out): (Vec<f64>, Vec<f64>) = self
            .tracks
            .iter()
            .map(|t| {
                let r = t.existence.min(MAX_EXISTENCE);
                (r.ln(), (1.0 - r).ln())
            })
            .unzip();
        let subsets = best_subsets(&log_in, &log_out, max_hypotheses);
        let mut hypotheses: Vec<Hypothesis> = subsets
            .into_iter()
            .map(|(members, log_w)| {
                let (labels, spatial) = members
                    .iter()
                    .map(|&i| (self.tracks[i].label, self.tracks[i].spatial.clone()))
                    .unzip();
                Hypothesis {
                    labels,
                    spatial,
                    weight: log_w.exp(),
                }
            })
            .collect();
        normalize_weights(&mut hypotheses);
        DglmbDensity {
            label_space,
            hypotheses,
        }
    }
}

impl Hypothesis {
    /// Builds a hypothesis from `(label, mixture)` pairs; labels must be distinct.
    pub fn new(entries: Vec<(Label, Arc<GaussianMixture>)>, weight: f64) -> Result<Self> {
        let mut entries = entries;
        entries.sort_by_key(|(l, _)| *l);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::LabelCollision(w[0].0));
        }
        let (labels, spatial) = entries.into_iter().unzip();
        Ok(Self {
            labels,
            spatial,
            weight,
        })
    }

    pub(crate) fn from_sorted(labels: Vec<Label>, spatial: Vec<Arc<GaussianMixture>>, weight: f64) -> Self {
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        debug_assert_eq!(labels.len(), spatial.len());
        Self {
            labels,
            spatial,
            weight,
        }
    }

    pub fn empty(weight: f64) -> Self {
        Self {
            labels: Vec::new(),
            spatial: Vec::new(),
            weight,
        }
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn spatial(&self) -> &[Arc<GaussianMixture>] {
        &self.spatial
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.labels.binary_search(&label).is_ok()
    }

    pub fn spatial_of(&self, label: Label) -> Option<&Arc<GaussianMixture>> {
        self.labels
            .binary_search(&label)
            .ok()
            .map(|i| &self.spatial[i])
    }

    pub fn entries(&self) -> impl Iterator<Item = (Label, &Arc<GaussianMixture>)> {
        self.labels.iter().copied().zip(self.spatial.iter())
    }

    /// Same label set and the same mixture for every label.
    pub fn same_component(&self, other: &Hypothesis) -> bool {
        self.labels == other.labels
            && self
                .spatial
                .iter()
                .zip(&other.spatial)
                .all(|(a, b)| Arc::ptr_eq(a, b) || a == b)
    }

    /// Hypothesis restricted to the labels accepted by `keep`.
    pub(crate) fn restricted(&self, mut keep: impl FnMut(Label) -> bool) -> Hypothesis {
        let (labels, spatial) = self
            .entries()
            .filter(|(l, _)| keep(*l))
            .map(|(l, s)| (l, s.clone()))
            .unzip();
        Hypothesis {
            labels,
            spatial,
            weight: self.weight,
        }
    }

    /// Union of two hypotheses over disjoint label sets; weights multiply.
    pub(crate) fn product(&self, other: &Hypothesis) -> Result<Hypothesis> {
        let entries = self
            .entries()
            .chain(other.entries())
            .map(|(l, s)| (l, s.clone()))
            .collect();
        Hypothesis::new(entries, self.weight * other.weight)
    }
}

pub(crate) fn normalize_weights(hypotheses: &mut [Hypothesis]) -> f64 {
    let total: f64 = hypotheses.iter().map(|h| h.weight).sum();
    if total > 0.0 {
        for h in hypotheses.iter_mut() {
            h.weight /= total;
        }
    }
    total
}

/// Sorts by descending weight; equal weights keep their relative order.
pub(crate) fn sort_by_weight(hypotheses: &mut [Hypothesis]) {
    hypotheses.sort_by(|a, b| b.weight.total_cmp(&a.weight));
}

impl DglmbDensity {
    pub fn new(label_space: Vec<Label>, hypotheses: Vec<Hypothesis>) -> Result<Self> {
        let mut label_space = label_space;
        label_space.sort();
        label_space.dedup();
        for h in &hypotheses {
            if let Some(l) = h.labels.iter().find(|l| label_space.binary_search(l).is_err()) {
                return Err(Error::Config(format!(
                    "hypothesis label {l} is outside the label space"
                )));
            }
            if !(h.weight >= 0.0) {
                return Err(Error::Config(format!("negative hypothesis weight {}", h.weight)));
            }
        }
        Ok(Self {
            label_space,
            hypotheses,
        })
    }

    pub(crate) fn from_parts(label_space: Vec<Label>, hypotheses: Vec<Hypothesis>) -> Self {
        Self {
            label_space,
            hypotheses,
        }
    }

    /// The density of the empty set: one hypothesis (∅, 1).
    pub fn empty() -> Self {
        Self {
            label_space: Vec::new(),
            hypotheses: vec![Hypothesis::empty(1.0)],
        }
    }

    pub fn label_space(&self) -> &[Label] {
        &self.label_space
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn into_hypotheses(self) -> Vec<Hypothesis> {
        self.hypotheses
    }

    pub fn total_weight(&self) -> f64 {
        self.hypotheses.iter().map(|h| h.weight).sum()
    }

    /// Labels that occur in at least one hypothesis.
    pub fn active_labels(&self) -> Vec<Label> {
        let mut labels: Vec<Label> = self
            .hypotheses
            .iter()
            .flat_map(|h| h.labels.iter().copied())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }

    pub fn normalize(&mut self) -> f64 {
        normalize_weights(&mut self.hypotheses)
    }

    /// Sums the weights of hypotheses that share a label set and the same
    /// per-label mixtures. First occurrences keep their position.
    pub fn merge_duplicates(&mut self) {
        let mut buckets: HashMap<Vec<Label>, Vec<usize>> = HashMap::new();
        let mut out: Vec<Hypothesis> = Vec::with_capacity(self.hypotheses.len());
        for h in std::mem::take(&mut self.hypotheses) {
            let bucket = buckets.entry(h.labels.clone()).or_default();
            match bucket.iter().find(|&&i| out[i].same_component(&h)) {
                Some(&i) => out[i].weight += h.weight,
                None => {
                    bucket.push(out.len());
                    out.push(h);
                }
            }
        }
        self.hypotheses = out;
    }

    /// Drops hypotheses lighter than `min_weight`, keeps the `cap` heaviest
    /// and renormalizes. If nothing survives, the heaviest hypothesis is kept
    /// with weight one.
    pub fn prune(&self, min_weight: f64, cap: usize) -> DglmbDensity {
        let mut kept: Vec<Hypothesis> = self
            .hypotheses
            .iter()
            .filter(|h| h.weight >= min_weight)
            .cloned()
            .collect();
        if kept.is_empty() || cap == 0 {
            let best = self
                .hypotheses
                .iter()
                .fold(None::<&Hypothesis>, |best, h| match best {
                    Some(b) if b.weight >= h.weight => Some(b),
                    _ => Some(h),
                });
            kept = best.into_iter().cloned().collect();
            if let Some(h) = kept.first_mut() {
                h.weight = 1.0;
            }
        } else if kept.len() > cap {
            sort_by_weight(&mut kept);
            kept.truncate(cap);
        }
        normalize_weights(&mut kept);
        DglmbDensity {
            label_space: self.label_space.clone(),
            hypotheses: kept,
        }
    }

    /// ρ(n): total weight of hypotheses with n labels. The support runs up
    /// to the size of the label space.
    pub fn cardinality(&self) -> CardinalityDistribution {
        let max = self
            .hypotheses
            .iter()
            .map(Hypothesis::len)
            .max()
            .unwrap_or(0)
            .max(self.label_space.len());
        let mut rho = vec![0.0; max + 1];
        for h in &self.hypotheses {
            rho[h.len()] += h.weight;
        }
        CardinalityDistribution(rho)
    }

    pub fn mean_cardinality(&self) -> f64 {
        self.hypotheses.iter().map(|h| h.weight * h.len() as f64).sum()
    }

    /// Marginal existence probability of `label`; zero for unknown labels.
    pub fn existence(&self, label: Label) -> f64 {
        self.hypotheses
            .iter()
            .filter(|h| h.contains(label))
            .map(|h| h.weight)
            .sum()
    }

    /// Marginal spatial mixture of `label`: the weight-averaged mixture over
    /// all hypotheses that contain it.
    pub fn marginal_spatial(&self, label: Label) -> Option<(f64, GaussianMixture)> {
        let lmb = self.marginalize(Some(label));
        lmb.tracks
            .into_iter()
            .next()
            .map(|t| (t.existence, Arc::unwrap_or_clone(t.spatial)))
    }

    /// LMB approximation: per label, r = Σ w 1_I(ℓ) and p = (1/r) Σ w 1_I(ℓ) p^(I).
    /// Labels with zero existence are omitted.
    pub fn to_lmb(&self) -> LmbDensity {
        self.marginalize(None)
    }

    /// Replaces every distinct spatial mixture with `f(mixture)`. Mixtures
    /// shared between hypotheses are mapped once and stay shared.
    pub fn map_spatial(&mut self, mut f: impl FnMut(&GaussianMixture) -> GaussianMixture) {
        let mut mapped: HashMap<*const GaussianMixture, Arc<GaussianMixture>> = HashMap::new();
        for h in &mut self.hypotheses {
            for gm in &mut h.spatial {
                let out = mapped
                    .entry(Arc::as_ptr(gm))
                    .or_insert_with(|| Arc::new(f(gm)))
                    .clone();
                *gm = out;
            }
        }
    }

    /// Joint density of two independent δ-GLMB densities over disjoint
    /// label spaces: every pair of hypotheses is combined, weights multiply.
    pub fn product(&self, other: &DglmbDensity) -> Result<DglmbDensity> {
        let mut label_space = self.label_space.clone();
        label_space.extend_from_slice(&other.label_space);
        label_space.sort();
        if let Some(w) = label_space.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::LabelCollision(w[0]));
        }
        let mut hypotheses = Vec::with_capacity(self.hypotheses.len() * other.hypotheses.len());
        for a in &self.hypotheses {
            for b in &other.hypotheses {
                hypotheses.push(a.product(b)?);
            }
        }
        Ok(DglmbDensity {
            label_space,
            hypotheses,
        })
    }

    /// Marginal δ-GLMB over the labels in `keep`: every hypothesis is
    /// restricted to `keep`, hypotheses that become identical are summed and
    /// the result is renormalized.
    pub fn marginalize_to(&self, keep: &[Label]) -> DglmbDensity {
        let mut keep = keep.to_vec();
        keep.sort();
        let inside = |l: Label| keep.binary_search(&l).is_ok();
        let label_space = self.label_space.iter().copied().filter(|&l| inside(l)).collect();
        let hypotheses = self.hypotheses.iter().map(|h| h.restricted(inside)).collect();
        let mut out = DglmbDensity {
            label_space,
            hypotheses,
        };
        out.merge_duplicates();
        out.normalize();
        out
    }

    fn marginalize(&self, only: Option<Label>) -> LmbDensity {
        // per label: (existence, [(mixture, summed weight)])
        let mut acc: Vec<(Label, f64, Vec<(Arc<GaussianMixture>, f64)>)> = Vec::new();
        let mut index: HashMap<Label, usize> = HashMap::new();
        for h in &self.hypotheses {
            for (label, gm) in h.entries() {
                if only.is_some_and(|l| l != label) {
                    continue;
                }
                let i = *index.entry(label).or_insert_with(|| {
                    acc.push((label, 0.0, Vec::new()));
                    acc.len() - 1
                });
                let entry = &mut acc[i];
                entry.1 += h.weight;
                match entry.2.iter_mut().find(|(g, _)| Arc::ptr_eq(g, gm)) {
                    Some((_, w)) => *w += h.weight,
                    None => entry.2.push((gm.clone(), h.weight)),
                }
            }
        }
        let tracks = acc
            .into_iter()
            .filter(|(_, r, _)| *r > 0.0)
            .map(|(label, r, parts)| {
                let spatial = if parts.len() == 1 {
                    parts[0].0.clone()
                } else {
                    let mut gm = GaussianMixture::default();
                    for (g, w) in &parts {
                        gm.extend_from(&g.scaled(w / r));
                    }
                    Arc::new(gm.normalized())
                };
                Track {
                    label,
                    existence: r.min(1.0),
                    spatial,
                }
            })
            .collect();
        let mut lmb = LmbDensity { tracks };
        lmb.tracks.sort_by_key(|t| t.label);
        lmb
    }
}

impl MultiObjectDensity {
    pub fn is_lmb(&self) -> bool {
        matches!(self, MultiObjectDensity::Lmb(_))
    }

    /// All labels carried by the density.
    pub fn labels(&self) -> Vec<Label> {
        match self {
            MultiObjectDensity::Lmb(l) => l.labels(),
            MultiObjectDensity::Dglmb(d) => d.active_labels(),
        }
    }

    /// The density itself if it is an LMB, otherwise its LMB approximation.
    pub fn lmb_view(&self) -> std::borrow::Cow<'_, LmbDensity> {
        match self {
            MultiObjectDensity::Lmb(l) => std::borrow::Cow::Borrowed(l),
            MultiObjectDensity::Dglmb(d) => std::borrow::Cow::Owned(d.to_lmb()),
        }
    }

    pub fn mean_cardinality(&self) -> f64 {
        match self {
            MultiObjectDensity::Lmb(l) => l.mean_cardinality(),
            MultiObjectDensity::Dglmb(d) => d.mean_cardinality(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            MultiObjectDensity::Lmb(l) => l.is_empty(),
            MultiObjectDensity::Dglmb(d) => d.hypotheses.iter().all(Hypothesis::is_empty),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapKey {
    cost: f64,
    seq: usize,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then(self.seq.cmp(&other.seq))
    }
}

/// The `k` most probable subsets of independent binary choices, item `i`
/// contributing `log_in[i]` when chosen and `log_out[i]` otherwise.
///
/// Returns member indices (ascending) and the subset's log weight, in
/// nonincreasing weight order. Subsets of zero weight are never produced.
pub(crate) fn best_subsets(log_in: &[f64], log_out: &[f64], k: usize) -> Vec<(Vec<usize>, f64)> {
    debug_assert_eq!(log_in.len(), log_out.len());
    if k == 0 {
        return Vec::new();
    }
    let n = log_in.len();
    let mut base_in = vec![false; n];
    let mut base = 0.0;
    // items whose choice can be flipped at finite cost, sorted by that cost
    let mut flips: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let (a, b) = (log_in[i], log_out[i]);
        if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
            return Vec::new();
        }
        base_in[i] = a > b;
        base += a.max(b);
        let delta = (a - b).abs();
        if delta.is_finite() {
            flips.push((delta, i));
        }
    }
    flips.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let materialize = |flipped: &[usize], cost: f64| {
        let mut members: Vec<usize> = (0..n)
            .filter(|&i| base_in[i] ^ flipped.iter().any(|&f| flips[f].1 == i))
            .collect();
        members.sort_unstable();
        (members, base - cost)
    };

    let mut out = vec![materialize(&[], 0.0)];
    if flips.is_empty() {
        return out;
    }
    // Each heap entry is a set of flip positions whose largest element is its
    // last entry; successors either append the next position or advance the last.
    let mut sets: Vec<Vec<usize>> = vec![vec![0]];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(HeapKey {
        cost: flips[0].0,
        seq: 0,
    }));
    while out.len() < k {
        let Some(Reverse(key)) = heap.pop() else {
            break;
        };
        let set = sets[key.seq].clone();
        out.push(materialize(&set, key.cost));
        let last = *set.last().expect("non-empty");
        if last + 1 < flips.len() {
            let mut grow = set.clone();
            grow.push(last + 1);
            sets.push(grow);
            heap.push(Reverse(HeapKey {
                cost: key.cost + flips[last + 1].0,
                seq: sets.len() - 1,
            }));
            let mut shift = set;
            *shift.last_mut().expect("non-empty") = last + 1;
            sets.push(shift);
            heap.push(Reverse(HeapKey {
                cost: key.cost - flips[last].0 + flips[last + 1].0,
                seq: sets.len() - 1,
            }));
        }
    }
    out
}
