//! LMB recursion. Prediction is closed-form per track; the update runs the
//! δ-GLMB update on the equivalent δ-GLMB and collapses the result back to an
//! LMB. The intermediate δ-GLMB posterior is returned as well, since the
//! switching criteria are evaluated on it.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DVector;

use crate::dglmb::{self, UpdateOutput, UpdateParams};
use crate::error::{Error, Result};
use crate::gaussian::{GaussianMixture, MotionModel, SensorModel};
use crate::labeled::{LmbDensity, Track};

/// Result of an LMB update.
#[derive(Debug, Clone)]
pub struct LmbUpdate {
    /// LMB approximation of the posterior.
    pub approx: LmbDensity,
    /// Full δ-GLMB posterior with its association statistics.
    pub full: UpdateOutput,
}

/// Survivors get r p_S and a predicted mixture; birth tracks are appended.
pub fn predict(prior: &LmbDensity, motion: &MotionModel, birth: &LmbDensity) -> Result<LmbDensity> {
    let ps = motion.survival();
    let mut cache: HashMap<*const GaussianMixture, Arc<GaussianMixture>> = HashMap::new();
    let mut tracks = Vec::with_capacity(prior.len() + birth.len());
    for t in prior.tracks() {
        let key = Arc::as_ptr(&t.spatial);
        let spatial = match cache.get(&key) {
            Some(p) => p.clone(),
            None => {
                let p = Arc::new(t.spatial.predict(motion)?);
                cache.insert(key, p.clone());
                p
            }
        };
        tracks.push(Track {
            label: t.label,
            existence: t.existence * ps,
            spatial,
        });
    }
    for b in birth.tracks() {
        if prior.get(b.label).is_some() {
            return Err(Error::LabelCollision(b.label));
        }
        tracks.push(b.clone());
    }
    LmbDensity::new(tracks)
}

/// Measurement update through the δ-GLMB form with `params.cap` hypotheses.
pub fn update(
    predicted: &LmbDensity,
    measurements: &[DVector<f64>],
    sensor: &SensorModel,
    params: &UpdateParams,
) -> Result<LmbUpdate> {
    let full = dglmb::update(&predicted.to_dglmb(params.cap), measurements, sensor, params)?;
    Ok(LmbUpdate {
        approx: full.posterior.to_lmb(),
        full,
    })
}
