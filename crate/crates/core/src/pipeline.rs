//! The adaptive filter cycle over a set of independent density groups:
//! birth → predict → gate → merge → update (+switch) → prune → split → extract.
//!
//! Each group holds either an LMB or a δ-GLMB density. Groups that share a
//! gated measurement are merged before the update and split again afterwards
//! once their tracks stop interacting.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::criteria::{association_entropy, decide_switch, kl_criterion, CriteriaThresholds, Mode, RepresentationState, Trigger};
use crate::dglmb::{self, UpdateParams};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianMixture, MotionModel, ReductionParams, SensorModel};
use crate::labeled::{DglmbDensity, Label, LmbDensity, MultiObjectDensity, Track};
use crate::lmb;

/// Static birth model: one Bernoulli component per entry and scan.
#[derive(Debug, Clone, Default)]
pub struct BirthModel {
    pub entries: Vec<(f64, GaussianMixture)>,
}

impl BirthModel {
    pub fn new(entries: Vec<(f64, GaussianMixture)>) -> Result<Self> {
        for (r, gm) in &entries {
            if !(*r > 0.0 && *r < 1.0) {
                return Err(Error::Config(format!("birth existence must lie in (0, 1), got {r}")));
            }
            gm.validate()?;
        }
        Ok(Self { entries })
    }

    /// Birth groups of scan `k`, labelled `(k, index)`.
    pub fn groups(&self, k: u32) -> Vec<DensityGroup> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, (r, gm))| {
                let track = Track::new(Label::new(k, i as u32), *r, gm.clone());
                DensityGroup::lmb(LmbDensity::new(vec![track]).expect("single track"))
            })
            .collect()
    }
}

/// Which representation the filter may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepresentationPolicy {
    /// Switch according to the criteria.
    #[default]
    Adaptive,
    /// Always approximate the posterior by an LMB.
    PinnedLmb,
    /// Never approximate.
    PinnedDglmb,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Squared Mahalanobis gate γ_z.
    pub gate: f64,
    /// LMB track pruning threshold μ_r, also applied to δ-GLMB marginal existences.
    pub existence_prune: f64,
    /// δ-GLMB hypothesis pruning threshold μ_w.
    pub weight_prune: f64,
    /// Maximum number of δ-GLMB hypotheses per group.
    pub cap: usize,
    /// Maximum number of hypotheses when an LMB is converted for a merge.
    pub merge_cap: usize,
    /// Tracks with existence above this are reported.
    pub extraction_threshold: f64,
    pub thresholds: CriteriaThresholds,
    pub reduction: ReductionParams,
    pub policy: RepresentationPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gate: 9.21034037197618,
            existence_prune: 0.01,
            weight_prune: 1e-5,
            cap: 50,
            merge_cap: 50,
            extraction_threshold: 0.5,
            thresholds: CriteriaThresholds::default(),
            reduction: ReductionParams::default(),
            policy: RepresentationPolicy::Adaptive,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.gate > 0.0 && self.gate.is_finite()) {
            return bad("gate must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.existence_prune) {
            return bad("existence pruning threshold must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.weight_prune) {
            return bad("weight pruning threshold must lie in [0, 1)");
        }
        if self.cap == 0 || self.merge_cap == 0 {
            return bad("hypothesis caps must be positive");
        }
        if !(0.0..1.0).contains(&self.extraction_threshold) {
            return bad("extraction threshold must lie in [0, 1)");
        }
        if !(self.thresholds.kl_threshold >= 0.0 && self.thresholds.entropy_threshold >= 0.0) {
            return bad("criteria thresholds must be nonnegative");
        }
        Ok(())
    }

    fn update_params(&self) -> UpdateParams {
        UpdateParams {
            cap: self.cap,
            gate: Some(self.gate),
        }
    }
}

/// One independent multi-object density and its representation state.
#[derive(Debug, Clone)]
pub struct DensityGroup {
    pub density: MultiObjectDensity,
    pub state: RepresentationState,
    /// Indices of the measurements gated to this group in the current scan.
    pub gated: Vec<usize>,
    /// Criteria values of the latest update.
    pub kl: f64,
    pub entropy: f64,
}

impl DensityGroup {
    pub fn lmb(density: LmbDensity) -> Self {
        Self {
            density: MultiObjectDensity::Lmb(density),
            state: RepresentationState::Lmb,
            gated: Vec::new(),
            kl: 0.0,
            entropy: 0.0,
        }
    }

    pub fn dglmb(density: DglmbDensity, trigger: Trigger) -> Self {
        Self {
            density: MultiObjectDensity::Dglmb(density),
            state: RepresentationState::Dglmb(trigger),
            gated: Vec::new(),
            kl: 0.0,
            entropy: 0.0,
        }
    }

    fn min_label(&self) -> Option<Label> {
        match &self.density {
            MultiObjectDensity::Lmb(l) => l.tracks().first().map(|t| t.label),
            MultiObjectDensity::Dglmb(d) => d.label_space().first().copied(),
        }
    }

    /// Value of the triggering criterion relative to its threshold.
    fn outstanding(&self, thresholds: &CriteriaThresholds) -> f64 {
        match self.state {
            RepresentationState::Lmb => 0.0,
            RepresentationState::Dglmb(Trigger::Kl) => ratio(self.kl, thresholds.kl_threshold),
            RepresentationState::Dglmb(Trigger::Entropy) => ratio(self.entropy, thresholds.entropy_threshold),
        }
    }
}

fn ratio(value: f64, threshold: f64) -> f64 {
    if threshold > 0.0 {
        value / threshold
    } else if value > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// A reported track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackEstimate {
    pub label: Label,
    pub existence: f64,
    pub state: DVector<f64>,
}

/// Criteria and representation of one group after its update.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDiagnostics {
    pub labels: Vec<Label>,
    pub measurements: usize,
    pub kl: f64,
    pub entropy: f64,
    pub before: RepresentationState,
    pub after: RepresentationState,
    pub hypotheses: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepDiagnostics {
    pub updates: Vec<GroupDiagnostics>,
    /// Group counts at the end of the step.
    pub lmb_groups: usize,
    pub dglmb_groups: usize,
    pub max_kl: f64,
    pub max_entropy: f64,
    pub elapsed_s: f64,
}

/// Output of one filter cycle.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub groups: Vec<DensityGroup>,
    pub estimates: Vec<TrackEstimate>,
    pub diagnostics: StepDiagnostics,
}

/// Models shared by all groups.
#[derive(Debug, Clone)]
pub struct Models {
    pub motion: MotionModel,
    pub sensor: SensorModel,
    pub birth: BirthModel,
}

/// Runs one complete cycle for scan `k`.
pub fn step(
    groups: Vec<DensityGroup>,
    k: u32,
    measurements: &[DVector<f64>],
    models: &Models,
    config: &PipelineConfig,
) -> Result<StepOutput> {
    let started = Instant::now();
    let mut groups = groups;
    groups.extend(models.birth.groups(k));

    let mut predicted = Vec::with_capacity(groups.len());
    for g in groups {
        predicted.push(predict_group(g, &models.motion, config)?);
    }

    let gated = gate_measurements(&predicted, measurements, &models.sensor, config.gate)?;
    for (g, idx) in predicted.iter_mut().zip(gated) {
        g.gated = idx;
    }
    let merged = merge_groups(predicted, config)?;

    let mut diagnostics = StepDiagnostics::default();
    let mut survivors = Vec::with_capacity(merged.len());
    for g in merged {
        let z: Vec<DVector<f64>> = g.gated.iter().map(|&j| measurements[j].clone()).collect();
        let before = g.state;
        let n_z = z.len();
        let g = update_group(g, &z, &models.sensor, config)?;
        diagnostics.max_kl = diagnostics.max_kl.max(g.kl);
        diagnostics.max_entropy = diagnostics.max_entropy.max(g.entropy);
        diagnostics.updates.push(GroupDiagnostics {
            labels: g.density.labels(),
            measurements: n_z,
            kl: g.kl,
            entropy: g.entropy,
            before,
            after: g.state,
            hypotheses: match &g.density {
                MultiObjectDensity::Lmb(_) => 0,
                MultiObjectDensity::Dglmb(d) => d.hypotheses().len(),
            },
        });
        if let Some(g) = prune_group(g, config) {
            survivors.extend(split_group(g, &models.sensor, config.gate)?);
        }
    }
    survivors.sort_by_key(|g| g.min_label());

    let estimates = extract_tracks(&survivors, config.extraction_threshold)?;
    diagnostics.lmb_groups = survivors.iter().filter(|g| g.density.is_lmb()).count();
    diagnostics.dglmb_groups = survivors.len() - diagnostics.lmb_groups;
    diagnostics.elapsed_s = started.elapsed().as_secs_f64();
    Ok(StepOutput {
        groups: survivors,
        estimates,
        diagnostics,
    })
}

fn predict_group(g: DensityGroup, motion: &MotionModel, config: &PipelineConfig) -> Result<DensityGroup> {
    let density = match &g.density {
        MultiObjectDensity::Lmb(l) => MultiObjectDensity::Lmb(lmb::predict(l, motion, &LmbDensity::empty())?),
        MultiObjectDensity::Dglmb(d) => {
            MultiObjectDensity::Dglmb(dglmb::predict(d, motion, &LmbDensity::empty(), config.cap)?)
        }
    };
    Ok(DensityGroup { density, ..g })
}

/// Measurement indices per group: `z_j` belongs to a group when some track of
/// the group's LMB view has squared Mahalanobis distance below `gate`.
pub fn gate_measurements(
    groups: &[DensityGroup],
    measurements: &[DVector<f64>],
    sensor: &SensorModel,
    gate: f64,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let view = g.density.lmb_view();
        let innovations = view
            .tracks()
            .iter()
            .map(|t| t.spatial.innovation(sensor))
            .collect::<Result<Vec<_>>>()?;
        let mut idx = Vec::new();
        for (j, z) in measurements.iter().enumerate() {
            for inn in &innovations {
                if inn.gate_distance_sq(z)? < gate {
                    idx.push(j);
                    break;
                }
            }
        }
        out.push(idx);
    }
    Ok(out)
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut i = i;
    while parent[i] != r {
        let next = parent[i];
        parent[i] = r;
        i = next;
    }
    r
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Merges every class of groups connected through shared measurements.
/// Groups keep their relative order; a merged group takes the position of
/// its first member.
pub fn merge_groups(groups: Vec<DensityGroup>, config: &PipelineConfig) -> Result<Vec<DensityGroup>> {
    let n = groups.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut owner: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for (i, g) in groups.iter().enumerate() {
        for &j in &g.gated {
            match owner.get(&j) {
                Some(&o) => union(&mut parent, o, i),
                None => {
                    owner.insert(j, i);
                }
            }
        }
    }
    let mut classes: Vec<Vec<DensityGroup>> = Vec::new();
    let mut class_of = vec![usize::MAX; n];
    for (i, g) in groups.into_iter().enumerate() {
        let root = find(&mut parent, i);
        if class_of[root] == usize::MAX {
            class_of[root] = classes.len();
            classes.push(Vec::new());
        }
        classes[class_of[root]].push(g);
    }
    classes
        .into_iter()
        .map(|members| combine(members, config))
        .collect()
}

fn combine(mut members: Vec<DensityGroup>, config: &PipelineConfig) -> Result<DensityGroup> {
    if members.len() == 1 {
        return Ok(members.pop().expect("one member"));
    }
    let mut gated: Vec<usize> = members.iter().flat_map(|g| g.gated.iter().copied()).collect();
    gated.sort_unstable();
    gated.dedup();
    let kl = members.iter().map(|g| g.kl).fold(0.0, f64::max);
    let entropy = members.iter().map(|g| g.entropy).fold(0.0, f64::max);

    // trigger of the δ-GLMB member whose criterion is furthest above its threshold
    let trigger = members
        .iter()
        .filter_map(|g| g.state.trigger().map(|t| (t, g.outstanding(&config.thresholds))))
        .fold(None::<(Trigger, f64)>, |best, (t, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((t, v)),
        })
        .map(|(t, _)| t);

    let mut group = match trigger {
        None => {
            let mut lmb = LmbDensity::empty();
            for g in members {
                if let MultiObjectDensity::Lmb(l) = g.density {
                    lmb = lmb.union(l)?;
                }
            }
            DensityGroup::lmb(lmb)
        }
        Some(trigger) => {
            let mut acc: Option<DglmbDensity> = None;
            for g in members {
                let d = match g.density {
                    MultiObjectDensity::Lmb(l) => l.to_dglmb(config.merge_cap),
                    MultiObjectDensity::Dglmb(d) => d,
                };
                acc = Some(match acc {
                    None => d,
                    Some(a) => a.product(&d)?.prune(config.weight_prune, config.cap),
                });
            }
            DensityGroup::dglmb(acc.expect("at least two members"), trigger)
        }
    };
    group.gated = gated;
    group.kl = kl;
    group.entropy = entropy;
    Ok(group)
}

/// Update of one group with its gated measurements, followed by the switch
/// decision and mixture reduction.
pub fn update_group(
    g: DensityGroup,
    measurements: &[DVector<f64>],
    sensor: &SensorModel,
    config: &PipelineConfig,
) -> Result<DensityGroup> {
    let params = config.update_params();
    let (full, approx) = match &g.density {
        MultiObjectDensity::Lmb(l) => {
            let out = lmb::update(l, measurements, sensor, &params)?;
            (out.full, Some(out.approx))
        }
        MultiObjectDensity::Dglmb(d) => (dglmb::update(d, measurements, sensor, &params)?, None),
    };
    let kl = kl_criterion(&full.posterior);
    let entropy = association_entropy(&full.assoc_marginals);

    let state = match config.policy {
        RepresentationPolicy::Adaptive => decide_switch(g.state, kl, entropy, &config.thresholds),
        RepresentationPolicy::PinnedLmb => RepresentationState::Lmb,
        RepresentationPolicy::PinnedDglmb => RepresentationState::Dglmb(Trigger::Kl),
    };
    let density = match state.mode() {
        Mode::Lmb => {
            let mut l = approx.unwrap_or_else(|| full.posterior.to_lmb());
            l.map_spatial(|gm| gm.reduce(&config.reduction));
            MultiObjectDensity::Lmb(l)
        }
        Mode::Dglmb => {
            let mut d = full.posterior;
            d.map_spatial(|gm| gm.reduce(&config.reduction));
            MultiObjectDensity::Dglmb(d)
        }
    };
    Ok(DensityGroup {
        density,
        state,
        gated: g.gated,
        kl,
        entropy,
    })
}

/// Removes unlikely tracks and hypotheses; `None` when nothing is left.
pub fn prune_group(g: DensityGroup, config: &PipelineConfig) -> Option<DensityGroup> {
    let density = match g.density {
        MultiObjectDensity::Lmb(mut l) => {
            l.retain(|t| t.existence >= config.existence_prune);
            if l.is_empty() {
                return None;
            }
            MultiObjectDensity::Lmb(l)
        }
        MultiObjectDensity::Dglmb(d) => {
            let d = d.prune(config.weight_prune, config.cap);
            let keep: Vec<Label> = d
                .active_labels()
                .into_iter()
                .filter(|&l| d.existence(l) >= config.existence_prune)
                .collect();
            if keep.is_empty() {
                return None;
            }
            MultiObjectDensity::Dglmb(d.marginalize_to(&keep))
        }
    };
    Some(DensityGroup { density, ..g })
}

/// Predicted measurement and innovation covariance of a mixture's
/// heaviest component.
fn predicted_measurement(gm: &GaussianMixture, sensor: &SensorModel) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let c = gm.max_weight_component().ok_or(Error::EmptyMixture("split"))?;
    let h = sensor.observation();
    Ok((h * &c.mean, h * &c.covariance * h.transpose() + sensor.noise()))
}

/// Splits a group into the connected components of its track-interaction
/// graph. Two tracks interact when their predicted measurements are closer
/// than 2√γ under the pooled innovation covariance.
pub fn split_group(g: DensityGroup, sensor: &SensorModel, gate: f64) -> Result<Vec<DensityGroup>> {
    let view = g.density.lmb_view().into_owned();
    let n = view.len();
    if n <= 1 {
        return Ok(vec![g]);
    }
    let points = view
        .tracks()
        .iter()
        .map(|t| predicted_measurement(&t.spatial, sensor))
        .collect::<Result<Vec<_>>>()?;
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = &points[i].0 - &points[j].0;
            let pooled = (&points[i].1 + &points[j].1) * 0.5;
            let chol = pooled.cholesky().ok_or(Error::SingularInnovation)?;
            let d2 = d.dot(&chol.solve(&d));
            if d2 < 4.0 * gate {
                union(&mut parent, i, j);
            }
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = components.len();
            components.push(Vec::new());
        }
        components[slot[r]].push(i);
    }
    if components.len() == 1 {
        return Ok(vec![g]);
    }
    let mut out = Vec::with_capacity(components.len());
    for members in components {
        let labels: Vec<Label> = members.iter().map(|&i| view.tracks()[i].label).collect();
        let density = match &g.density {
            MultiObjectDensity::Lmb(_) => {
                let tracks = members.iter().map(|&i| view.tracks()[i].clone()).collect();
                MultiObjectDensity::Lmb(LmbDensity::new(tracks)?)
            }
            MultiObjectDensity::Dglmb(d) => MultiObjectDensity::Dglmb(d.marginalize_to(&labels)),
        };
        out.push(DensityGroup {
            density,
            state: g.state,
            gated: Vec::new(),
            kl: g.kl,
            entropy: g.entropy,
        });
    }
    Ok(out)
}

/// Tracks with existence strictly above `threshold`, at the mode of their
/// marginal mixture, ordered by label.
pub fn extract_tracks(groups: &[DensityGroup], threshold: f64) -> Result<Vec<TrackEstimate>> {
    let mut out = Vec::new();
    for g in groups {
        for t in g.density.lmb_view().tracks() {
            if t.existence > threshold {
                out.push(TrackEstimate {
                    label: t.label,
                    existence: t.existence,
                    state: t.spatial.map_point()?,
                });
            }
        }
    }
    out.sort_by_key(|e| e.label);
    Ok(out)
}

/// Stateful wrapper around [`step`] that numbers scans from one.
#[derive(Debug, Clone)]
pub struct AlmbFilter {
    models: Models,
    config: PipelineConfig,
    groups: Vec<DensityGroup>,
    k: u32,
}

impl AlmbFilter {
    pub fn new(models: Models, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            models,
            config,
            groups: Vec::new(),
            k: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn groups(&self) -> &[DensityGroup] {
        &self.groups
    }

    /// Index of the last processed scan; zero before the first.
    pub fn scan(&self) -> u32 {
        self.k
    }

    pub fn step(&mut self, measurements: &[DVector<f64>]) -> Result<(Vec<TrackEstimate>, StepDiagnostics)> {
        let k = self.k + 1;
        let out = step(std::mem::take(&mut self.groups), k, measurements, &self.models, &self.config)?;
        self.groups = out.groups;
        self.k = k;
        Ok((out.estimates, out.diagnostics))
    }
}
