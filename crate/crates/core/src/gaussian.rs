//! Linear-Gaussian single-object machinery.
//!
//! Every track's spatial density is a [`GaussianMixture`]. This module holds the
//! closed-form Kalman prediction and update of such mixtures, the mixture
//! likelihood of a measurement, moment-preserving mixture reduction and the
//! Mahalanobis gate distance.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// One weighted Gaussian term of a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self {
            weight,
            mean,
            covariance,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Checks the weight, shape, symmetry and positive-definiteness invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::Config(format!(
                "component weight must be finite and nonnegative, got {}",
                self.weight
            )));
        }
        let n = self.dim();
        if self.covariance.nrows() != n || self.covariance.ncols() != n {
            return Err(Error::dim("component covariance", n, self.covariance.nrows()));
        }
        let scale = self.covariance.amax().max(f64::MIN_POSITIVE);
        let asym = (&self.covariance - self.covariance.transpose()).amax();
        if asym > 1e-9 * scale {
            return Err(Error::Config("component covariance is not symmetric".into()));
        }
        if Cholesky::new(self.covariance.clone()).is_none() {
            return Err(Error::Config(
                "component covariance is not positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted sum of Gaussian components.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

/// Linear-Gaussian transition with a state-independent survival probability.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    transition: DMatrix<f64>,
    process_noise: DMatrix<f64>,
    survival: f64,
}

/// Linear-Gaussian sensor with constant detection probability and uniform
/// Poisson clutter.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    observation: DMatrix<f64>,
    noise: DMatrix<f64>,
    detection: f64,
    clutter_rate: f64,
    clutter_density: f64,
}

/// Thresholds for [`GaussianMixture::reduce`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionParams {
    /// Components lighter than this are dropped.
    pub prune_threshold: f64,
    /// Squared Mahalanobis distance below which components are merged.
    pub merge_threshold: f64,
    pub max_components: usize,
}

impl Default for ReductionParams {
    fn default() -> Self {
        Self {
            prune_threshold: 1e-5,
            merge_threshold: 4.0,
            max_components: 20,
        }
    }
}

impl ReductionParams {
    /// Parameters under which reduction leaves a normalized mixture untouched.
    pub fn identity() -> Self {
        Self {
            prune_threshold: 0.0,
            merge_threshold: 0.0,
            max_components: usize::MAX,
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl MotionModel {
    pub fn new(transition: DMatrix<f64>, process_noise: DMatrix<f64>, survival: f64) -> Result<Self> {
        let n = transition.nrows();
        if transition.ncols() != n {
            return Err(Error::dim("transition matrix columns", n, transition.ncols()));
        }
        if process_noise.shape() != (n, n) {
            return Err(Error::dim("process noise", n, process_noise.nrows()));
        }
        if !(0.0..=1.0).contains(&survival) {
            return Err(Error::Config(format!(
                "survival probability must lie in [0, 1], got {survival}"
            )));
        }
        Ok(Self {
            transition,
            process_noise,
            survival,
        })
    }

    /// Constant-velocity model with state `[p_1, v_1, p_2, v_2, ...]` and
    /// discrete white-noise acceleration of variance `accel_variance`.
    pub fn constant_velocity(
        axes: usize,
        dt: f64,
        accel_variance: f64,
        survival: f64,
    ) -> Result<Self> {
        let n = 2 * axes;
        let mut f = DMatrix::identity(n, n);
        let mut q = DMatrix::zeros(n, n);
        for a in 0..axes {
            let i = 2 * a;
            f[(i, i + 1)] = dt;
            q[(i, i)] = accel_variance * dt.powi(4) / 4.0;
            q[(i, i + 1)] = accel_variance * dt.powi(3) / 2.0;
            q[(i + 1, i)] = accel_variance * dt.powi(3) / 2.0;
            q[(i + 1, i + 1)] = accel_variance * dt.powi(2);
        }
        Self::new(f, q, survival)
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn survival(&self) -> f64 {
        self.survival
    }

    pub fn state_dim(&self) -> usize {
        self.transition.nrows()
    }

    /// Same dynamics with another survival probability.
    pub fn with_survival(&self, survival: f64) -> Result<Self> {
        Self::new(self.transition.clone(), self.process_noise.clone(), survival)
    }
}

impl SensorModel {
    pub fn new(
        observation: DMatrix<f64>,
        noise: DMatrix<f64>,
        detection: f64,
        clutter_rate: f64,
        clutter_density: f64,
    ) -> Result<Self> {
        let m = observation.nrows();
        if noise.shape() != (m, m) {
            return Err(Error::dim("measurement noise", m, noise.nrows()));
        }
        if !(0.0..=1.0).contains(&detection) {
            return Err(Error::Config(format!(
                "detection probability must lie in [0, 1], got {detection}"
            )));
        }
        if !(clutter_rate >= 0.0) || !clutter_rate.is_finite() {
            return Err(Error::Config(format!(
                "clutter rate must be finite and nonnegative, got {clutter_rate}"
            )));
        }
        if !(clutter_density > 0.0) || !clutter_density.is_finite() {
            return Err(Error::Config(format!(
                "clutter density must be positive, got {clutter_density}"
            )));
        }
        Ok(Self {
            observation,
            noise,
            detection,
            clutter_rate,
            clutter_density,
        })
    }

    /// Sensor observing the position entries of a constant-velocity state,
    /// with isotropic noise `sigma` and clutter uniform over `area`.
    pub fn position_only(
        axes: usize,
        sigma: f64,
        detection: f64,
        clutter_rate: f64,
        area: f64,
    ) -> Result<Self> {
        let mut h = DMatrix::zeros(axes, 2 * axes);
        for a in 0..axes {
            h[(a, 2 * a)] = 1.0;
        }
        let r = DMatrix::identity(axes, axes) * (sigma * sigma);
        Self::new(h, r, detection, clutter_rate, 1.0 / area)
    }

    pub fn observation(&self) -> &DMatrix<f64> {
        &self.observation
    }

    pub fn noise(&self) -> &DMatrix<f64> {
        &self.noise
    }

    pub fn detection(&self) -> f64 {
        self.detection
    }

    pub fn clutter_rate(&self) -> f64 {
        self.clutter_rate
    }

    pub fn clutter_density(&self) -> f64 {
        self.clutter_density
    }

    pub fn measurement_dim(&self) -> usize {
        self.observation.nrows()
    }

    /// Clutter intensity κ(z) = λ_c c(z).
    pub fn clutter_intensity(&self) -> f64 {
        self.clutter_rate * self.clutter_density
    }

    /// ln κ(z), floored at the smallest positive double so that a clutter-free
    /// sensor still yields finite association costs.
    pub fn log_clutter_intensity(&self) -> f64 {
        self.clutter_intensity().max(f64::MIN_POSITIVE).ln()
    }

    /// Same sensor with another detection probability or clutter rate.
    pub fn with_detection_and_clutter(&self, detection: f64, clutter_rate: f64) -> Result<Self> {
        Self::new(
            self.observation.clone(),
            self.noise.clone(),
            detection,
            clutter_rate,
            self.clutter_density,
        )
    }
}

/// Measurement-independent part of a Kalman update for one component.
#[derive(Debug, Clone)]
struct ComponentInnovation {
    log_weight: f64,
    mean: DVector<f64>,
    predicted: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
    gain: DMatrix<f64>,
    posterior_cov: DMatrix<f64>,
}

impl ComponentInnovation {
    fn new(c: &GaussianComponent, sensor: &SensorModel) -> Result<Self> {
        let h = sensor.observation();
        if h.ncols() != c.dim() {
            return Err(Error::dim("observation matrix columns", c.dim(), h.ncols()));
        }
        let ph_t = &c.covariance * h.transpose();
        let mut s = h * &ph_t + sensor.noise();
        symmetrize(&mut s);
        let chol = Cholesky::new(s).ok_or(Error::SingularInnovation)?;
        let d = h.nrows() as f64;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P.
        let gain = chol.solve(&ph_t.transpose()).transpose();
        let mut posterior_cov = &c.covariance - &gain * h * &c.covariance;
        symmetrize(&mut posterior_cov);
        Ok(Self {
            log_weight: c.weight.ln(),
            mean: c.mean.clone(),
            predicted: h * &c.mean,
            chol,
            log_norm: -0.5 * (d * (2.0 * PI).ln() + log_det),
            gain,
            posterior_cov,
        })
    }

    fn mahalanobis_sq(&self, z: &DVector<f64>) -> f64 {
        let nu = z - &self.predicted;
        let solved = self.chol.solve(&nu);
        nu.dot(&solved).max(0.0)
    }

    fn log_density(&self, z: &DVector<f64>) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(z)
    }
}

/// Precomputed Kalman gains and innovation covariances of a whole mixture
/// against one sensor; reusable across measurements.
#[derive(Debug, Clone)]
pub struct MixtureInnovation {
    terms: Vec<ComponentInnovation>,
    best: usize,
}

/// Result of a mixture Kalman update.
#[derive(Debug, Clone)]
pub struct KalmanUpdate {
    pub mixture: GaussianMixture,
    /// ln Σᵢ wᵢ N(z; H mᵢ, H Pᵢ Hᵀ + R).
    pub log_likelihood: f64,
}

impl KalmanUpdate {
    pub fn likelihood(&self) -> f64 {
        self.log_likelihood.exp()
    }
}

impl MixtureInnovation {
    fn check_dim(&self, z: &DVector<f64>) -> Result<()> {
        let expected = self.terms[0].predicted.len();
        if z.len() != expected {
            return Err(Error::dim("measurement", expected, z.len()));
        }
        Ok(())
    }

    /// ln of the mixture's measurement likelihood at `z`.
    pub fn log_likelihood(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_dim(z)?;
        Ok(log_sum_exp(
            self.terms.iter().map(|t| t.log_weight + t.log_density(z)),
        ))
    }

    /// Squared Mahalanobis distance of `z` to the predicted measurement of the
    /// highest-weight component.
    pub fn gate_distance_sq(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.terms[self.best].mahalanobis_sq(z))
    }

    pub fn update(&self, z: &DVector<f64>) -> Result<KalmanUpdate> {
        self.check_dim(z)?;
        let log_w: Vec<f64> = self
            .terms
            .iter()
            .map(|t| t.log_weight + t.log_density(z))
            .collect();
        let total = log_sum_exp(log_w.iter().copied());
        if !total.is_finite() {
            return Err(Error::Numerical(
                "measurement has zero likelihood under every component".into(),
            ));
        }
        let components = self
            .terms
            .iter()
            .zip(&log_w)
            .map(|(t, lw)| {
                let mean = &t.mean + &t.gain * (z - &t.predicted);
                GaussianComponent::new((lw - total).exp(), mean, t.posterior_cov.clone())
            })
            .collect();
        Ok(KalmanUpdate {
            mixture: GaussianMixture { components },
            log_likelihood: total,
        })
    }
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    /// Single unit-weight component.
    pub fn single(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self::new(vec![GaussianComponent::new(1.0, mean, covariance)])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<GaussianComponent> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.components.first().map(GaussianComponent::dim)
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Copy with weights divided by their sum. Empty or zero-weight mixtures
    /// are returned unchanged.
    pub fn normalized(&self) -> Self {
        let total = self.total_weight();
        if !(total > 0.0) {
            return self.clone();
        }
        let mut out = self.clone();
        for c in &mut out.components {
            c.weight /= total;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let Some(dim) = self.dim() else {
            return Ok(());
        };
        for c in &self.components {
            if c.dim() != dim {
                return Err(Error::dim("mixture component", dim, c.dim()));
            }
            c.validate()?;
        }
        Ok(())
    }

    /// Weight-averaged mean of the mixture.
    pub fn mean(&self) -> Option<DVector<f64>> {
        let dim = self.dim()?;
        let total = self.total_weight();
        let mut m = DVector::zeros(dim);
        for c in &self.components {
            m += &c.mean * (c.weight / total);
        }
        Some(m)
    }

    /// Second central moment of the mixture.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let mean = self.mean()?;
        let total = self.total_weight();
        let mut p = DMatrix::zeros(mean.len(), mean.len());
        for c in &self.components {
            let d = &c.mean - &mean;
            p += (&c.covariance + &d * d.transpose()) * (c.weight / total);
        }
        Some(p)
    }

    fn index_of_max_weight(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in self.components.iter().enumerate() {
            match best {
                Some(b) if self.components[b].weight >= c.weight => {}
                _ => best = Some(i),
            }
        }
        best
    }

    /// Heaviest component; the first one wins ties.
    pub fn max_weight_component(&self) -> Option<&GaussianComponent> {
        self.index_of_max_weight().map(|i| &self.components[i])
    }

    /// Point estimate: the mean of the heaviest component.
    pub fn map_point(&self) -> Result<DVector<f64>> {
        self.max_weight_component()
            .map(|c| c.mean.clone())
            .ok_or(Error::EmptyMixture("map_point"))
    }

    /// Chapman-Kolmogorov prediction through a linear-Gaussian transition.
    pub fn predict(&self, model: &MotionModel) -> Result<Self> {
        let f = model.transition();
        let components = self
            .components
            .iter()
            .map(|c| {
                if c.dim() != f.ncols() {
                    return Err(Error::dim("mixture state", f.ncols(), c.dim()));
                }
                let mut cov = f * &c.covariance * f.transpose() + model.process_noise();
                symmetrize(&mut cov);
                Ok(GaussianComponent::new(c.weight, f * &c.mean, cov))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// Gains and innovation covariances for repeated updates against `sensor`.
    pub fn innovation(&self, sensor: &SensorModel) -> Result<MixtureInnovation> {
        if self.is_empty() {
            return Err(Error::EmptyMixture("innovation"));
        }
        let terms = self
            .components
            .iter()
            .map(|c| ComponentInnovation::new(c, sensor))
            .collect::<Result<Vec<_>>>()?;
        Ok(MixtureInnovation {
            terms,
            best: self.index_of_max_weight().unwrap_or(0),
        })
    }

    /// Per-component Kalman update against `z`; weights are rescaled by each
    /// component's measurement likelihood and renormalized.
    pub fn kalman_update(&self, z: &DVector<f64>, sensor: &SensorModel) -> Result<KalmanUpdate> {
        self.innovation(sensor)?.update(z)
    }

    /// Squared Mahalanobis distance of `z` to the heaviest component's
    /// predicted measurement.
    pub fn mahalanobis_sq(&self, z: &DVector<f64>, sensor: &SensorModel) -> Result<f64> {
        let c = self
            .max_weight_component()
            .ok_or(Error::EmptyMixture("mahalanobis_sq"))?;
        let term = ComponentInnovation::new(c, sensor)?;
        if z.len() != term.predicted.len() {
            return Err(Error::dim("measurement", term.predicted.len(), z.len()));
        }
        Ok(term.mahalanobis_sq(z))
    }

    /// Prunes light components, merges close ones by moment matching, caps the
    /// count and renormalizes.
    pub fn reduce(&self, params: &ReductionParams) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        let kept: Vec<usize> = (0..self.len())
            .filter(|&i| self.components[i].weight >= params.prune_threshold)
            .collect();
        if kept.is_empty() {
            let best = self.max_weight_component().cloned().expect("non-empty");
            return Self::new(vec![GaussianComponent { weight: 1.0, ..best }]);
        }

        let mut order = kept;
        order.sort_by(|&a, &b| {
            self.components[b]
                .weight
                .total_cmp(&self.components[a].weight)
                .then(a.cmp(&b))
        });

        // (original index of the cluster lead, merged component)
        let mut merged: Vec<(usize, GaussianComponent)> = Vec::new();
        let mut used = vec![false; self.len()];
        for &lead in &order {
            if used[lead] {
                continue;
            }
            used[lead] = true;
            let lead_c = &self.components[lead];
            let mut cluster = vec![lead];
            if params.merge_threshold > 0.0 {
                if let Some(chol) = Cholesky::new(lead_c.covariance.clone()) {
                    for &j in &order {
                        if used[j] {
                            continue;
                        }
                        let d = &self.components[j].mean - &lead_c.mean;
                        if d.dot(&chol.solve(&d)) < params.merge_threshold {
                            used[j] = true;
                            cluster.push(j);
                        }
                    }
                }
            }
            let component = if cluster.len() == 1 {
                lead_c.clone()
            } else {
                Self::moment_match(cluster.iter().map(|&j| &self.components[j]))
            };
            merged.push((lead, component));
        }

        if merged.len() > params.max_components {
            merged.sort_by(|a, b| b.1.weight.total_cmp(&a.1.weight).then(a.0.cmp(&b.0)));
            merged.truncate(params.max_components);
        }
        merged.sort_by_key(|(i, _)| *i);
        Self::new(merged.into_iter().map(|(_, c)| c).collect()).normalized()
    }

    fn moment_match<'a>(components: impl Iterator<Item = &'a GaussianComponent> + Clone) -> GaussianComponent {
        let weight: f64 = components.clone().map(|c| c.weight).sum();
        let dim = components.clone().next().expect("non-empty cluster").dim();
        let mut mean = DVector::zeros(dim);
        for c in components.clone() {
            mean += &c.mean * (c.weight / weight);
        }
        let mut cov = DMatrix::zeros(dim, dim);
        for c in components {
            let d = &c.mean - &mean;
            cov += (&c.covariance + &d * d.transpose()) * (c.weight / weight);
        }
        symmetrize(&mut cov);
        GaussianComponent::new(weight, mean, cov)
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.components {
            c.weight *= factor;
        }
        out
    }

    pub(crate) fn extend_from(&mut self, other: &GaussianMixture) {
        self.components.extend(other.components.iter().cloned());
    }
}

pub(crate) fn logsumexp(values: impl IntoIterator<Item = f64>) -> f64 {
    log_sum_exp(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn scalar_sensor(r: f64) -> SensorModel {
        SensorModel::new(dmatrix![1.0], dmatrix![r], 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn identity_dynamics_leave_mixture_unchanged() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.4, dvector![1.0, 2.0], dmatrix![2.0, 0.5; 0.5, 1.0]),
            GaussianComponent::new(0.6, dvector![-3.0, 0.5], dmatrix![1.0, 0.0; 0.0, 3.0]),
        ]);
        let model = MotionModel::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), 1.0).unwrap();
        assert_eq!(gm.predict(&model).unwrap(), gm);
    }

    #[test]
    fn constant_velocity_step_moves_position() {
        let gm = GaussianMixture::single(dvector![0.0, 1.0], DMatrix::identity(2, 2));
        let model = MotionModel::constant_velocity(1, 1.0, 0.0, 0.99).unwrap();
        let out = gm.predict(&model).unwrap();
        assert_eq!(out.components()[0].mean, dvector![1.0, 1.0]);
    }

    #[test]
    fn predicted_covariances_match_hand_product() {
        // F = [[1,1],[0,1]], Q = diag(0.5, 0.25)
        let f = dmatrix![1.0, 1.0; 0.0, 1.0];
        let q = dmatrix![0.5, 0.0; 0.0, 0.25];
        let model = MotionModel::new(f, q, 0.99).unwrap();
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.3, dvector![0.0, 0.0], dmatrix![2.0, 1.0; 1.0, 3.0]),
            GaussianComponent::new(0.7, dvector![5.0, -1.0], dmatrix![1.0, 0.0; 0.0, 1.0]),
        ]);
        let out = gm.predict(&model).unwrap();
        // [[1,1],[0,1]] [[2,1],[1,3]] [[1,0],[1,1]] = [[7,4],[4,3]]; + Q
        let expected0 = dmatrix![7.5, 4.0; 4.0, 3.25];
        // [[1,1],[0,1]] I [[1,0],[1,1]] = [[2,1],[1,1]]; + Q
        let expected1 = dmatrix![2.5, 1.0; 1.0, 1.25];
        assert_eq!(out.components()[0].covariance, expected0);
        assert_eq!(out.components()[1].covariance, expected1);
        assert_eq!(out.total_weight(), gm.total_weight());
    }

    #[test]
    fn zero_innovation_keeps_measured_coordinate() {
        let gm = GaussianMixture::single(dvector![3.0, 1.0], dmatrix![4.0, 1.0; 1.0, 2.0]);
        let sensor = SensorModel::new(dmatrix![1.0, 0.0], dmatrix![1.0], 0.9, 1.0, 1.0).unwrap();
        let up = gm.kalman_update(&dvector![3.0], &sensor).unwrap();
        assert!(close(up.mixture.components()[0].mean[0], 3.0, 1e-12));
        let s = 5.0;
        assert!(close(up.likelihood(), 1.0 / (2.0 * PI * s).sqrt(), 1e-12));
    }

    #[test]
    fn scalar_kalman_update() {
        let gm = GaussianMixture::single(dvector![0.0], dmatrix![1.0]);
        let up = gm.kalman_update(&dvector![2.0], &scalar_sensor(1.0)).unwrap();
        let c = &up.mixture.components()[0];
        assert!(close(c.mean[0], 1.0, 1e-12));
        assert!(close(c.covariance[(0, 0)], 0.5, 1e-12));
        // N(2; 0, 2)
        let expected = (-(4.0) / 4.0f64).exp() / (2.0 * PI * 2.0).sqrt();
        assert!(close(up.likelihood(), expected, 1e-14));
    }

    #[test]
    fn mixture_likelihood_is_componentwise_sum() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.25, dvector![-1.0], dmatrix![0.5]),
            GaussianComponent::new(0.75, dvector![2.0], dmatrix![2.0]),
        ]);
        let r = 0.3;
        let z = 0.7;
        let up = gm.kalman_update(&dvector![z], &scalar_sensor(r)).unwrap();
        let normal = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
        let expected = 0.25 * normal(z, -1.0, 0.5 + r) + 0.75 * normal(z, 2.0, 2.0 + r);
        assert!(close(up.likelihood(), expected, 1e-14));
        assert!(close(up.mixture.total_weight(), 1.0, 1e-12));
    }

    #[test]
    fn singular_innovation_is_reported() {
        let gm = GaussianMixture::single(dvector![0.0], dmatrix![0.0]);
        let sensor = SensorModel::new(dmatrix![1.0], dmatrix![0.0], 1.0, 0.0, 1.0).unwrap();
        assert_eq!(
            gm.kalman_update(&dvector![1.0], &sensor).unwrap_err(),
            Error::SingularInnovation
        );
    }

    #[test]
    fn duplicate_components_merge() {
        let c = GaussianComponent::new(0.5, dvector![1.0, 2.0], dmatrix![1.0, 0.0; 0.0, 1.0]);
        let gm = GaussianMixture::new(vec![c.clone(), c.clone()]);
        let out = gm.reduce(&ReductionParams::default());
        assert_eq!(out.len(), 1);
        assert!(close(out.components()[0].weight, 1.0, 1e-15));
        assert_eq!(out.components()[0].mean, c.mean);
        assert_eq!(out.components()[0].covariance, c.covariance);
    }

    #[test]
    fn light_component_is_pruned() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.999, dvector![0.0], dmatrix![1.0]),
            GaussianComponent::new(0.001, dvector![100.0], dmatrix![1.0]),
        ]);
        let params = ReductionParams {
            prune_threshold: 0.01,
            ..Default::default()
        };
        let out = gm.reduce(&params);
        assert_eq!(out.len(), 1);
        assert_eq!(out.components()[0].weight, 1.0);
    }

    #[test]
    fn everything_pruned_keeps_heaviest() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.2, dvector![0.0], dmatrix![1.0]),
            GaussianComponent::new(0.3, dvector![9.0], dmatrix![1.0]),
        ]);
        let params = ReductionParams {
            prune_threshold: 0.5,
            ..Default::default()
        };
        let out = gm.reduce(&params);
        assert_eq!(out.len(), 1);
        assert_eq!(out.components()[0].mean, dvector![9.0]);
        assert_eq!(out.components()[0].weight, 1.0);
    }

    #[test]
    fn merged_pair_matches_brute_force_moments() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.3, dvector![0.0, 1.0], dmatrix![2.0, 0.3; 0.3, 1.0]),
            GaussianComponent::new(0.7, dvector![0.5, 0.8], dmatrix![1.5, -0.2; -0.2, 2.0]),
        ]);
        let out = gm.reduce(&ReductionParams::default());
        assert_eq!(out.len(), 1);
        // brute force: E[x] = Σ w m, E[xxᵀ] = Σ w (P + m mᵀ), Cov = E[xxᵀ] - E[x]E[x]ᵀ
        let mut ex = DVector::zeros(2);
        let mut exx = DMatrix::zeros(2, 2);
        for c in gm.components() {
            ex += &c.mean * c.weight;
            exx += (&c.covariance + &c.mean * c.mean.transpose()) * c.weight;
        }
        let cov = exx - &ex * ex.transpose();
        let m = &out.components()[0];
        assert!((&m.mean - ex).amax() < 1e-12);
        assert!((&m.covariance - cov).amax() < 1e-12);
    }

    #[test]
    fn reduction_cap_keeps_heaviest() {
        let gm = GaussianMixture::new(
            (0..5)
                .map(|i| GaussianComponent::new((i + 1) as f64 / 15.0, dvector![100.0 * i as f64], dmatrix![1.0]))
                .collect(),
        );
        let params = ReductionParams {
            max_components: 2,
            ..Default::default()
        };
        let out = gm.reduce(&params);
        assert_eq!(out.len(), 2);
        assert_eq!(out.components()[0].mean, dvector![300.0]);
        assert_eq!(out.components()[1].mean, dvector![400.0]);
        assert!(close(out.total_weight(), 1.0, 1e-15));
    }

    #[test]
    fn mahalanobis_values() {
        let gm = GaussianMixture::single(dvector![1.0], dmatrix![3.0]);
        let sensor = scalar_sensor(1.0);
        assert_eq!(gm.mahalanobis_sq(&dvector![1.0], &sensor).unwrap(), 0.0);
        // S = 4, innovation 2
        assert!(close(gm.mahalanobis_sq(&dvector![3.0], &sensor).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn mahalanobis_uses_heaviest_component() {
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.2, dvector![0.0], dmatrix![3.0]),
            GaussianComponent::new(0.8, dvector![10.0], dmatrix![3.0]),
        ]);
        let d = gm.mahalanobis_sq(&dvector![10.0], &scalar_sensor(1.0)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn mahalanobis_invariant_under_joint_rotation() {
        let gm = GaussianMixture::single(dvector![1.0, -2.0], dmatrix![4.0, 1.0; 1.0, 2.0]);
        let h = dmatrix![1.0, 0.0; 0.0, 1.0];
        let r = dmatrix![1.0, 0.2; 0.2, 0.5];
        let z = dvector![3.0, 0.5];
        let base = SensorModel::new(h.clone(), r.clone(), 1.0, 0.0, 1.0).unwrap();
        let d0 = gm.mahalanobis_sq(&z, &base).unwrap();
        let t: f64 = 0.7;
        let rot = dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()];
        let rotated = SensorModel::new(&rot * h, &rot * r * rot.transpose(), 1.0, 0.0, 1.0).unwrap();
        let d1 = gm.mahalanobis_sq(&(&rot * z), &rotated).unwrap();
        assert!(close(d0, d1, 1e-12));
    }

    #[test]
    fn map_point_rules() {
        let a = dvector![1.0];
        let b = dvector![2.0];
        let single = GaussianMixture::single(a.clone(), dmatrix![1.0]);
        assert_eq!(single.map_point().unwrap(), a);
        let gm = GaussianMixture::new(vec![
            GaussianComponent::new(0.3, a.clone(), dmatrix![1.0]),
            GaussianComponent::new(0.7, b.clone(), dmatrix![1.0]),
        ]);
        assert_eq!(gm.map_point().unwrap(), b);
        let tie = GaussianMixture::new(vec![
            GaussianComponent::new(0.5, a.clone(), dmatrix![1.0]),
            GaussianComponent::new(0.5, b, dmatrix![1.0]),
        ]);
        assert_eq!(tie.map_point().unwrap(), a);
        assert_eq!(
            GaussianMixture::default().map_point().unwrap_err(),
            Error::EmptyMixture("map_point")
        );
    }

    #[test]
    fn dimension_mismatch_is_configuration_error() {
        let gm = GaussianMixture::single(dvector![0.0, 0.0, 0.0], DMatrix::identity(3, 3));
        let model = MotionModel::constant_velocity(1, 1.0, 1.0, 0.9).unwrap();
        assert!(matches!(gm.predict(&model), Err(Error::Dimension { .. })));
    }

    #[test]
    fn constant_velocity_noise_structure() {
        let m = MotionModel::constant_velocity(2, 1.0, 5.0, 0.99).unwrap();
        let q = m.process_noise();
        assert_eq!(q[(1, 1)], 5.0);
        assert_eq!(q[(0, 0)], 1.25);
        assert_eq!(q[(0, 1)], 2.5);
        assert_eq!(q[(0, 2)], 0.0);
        assert_eq!(m.transition()[(2, 3)], 1.0);
    }
}
