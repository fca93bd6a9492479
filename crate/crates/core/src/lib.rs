//! Labeled multi-object tracking with LMB, δ-GLMB and adaptive LMB filters
//! over Gaussian-mixture spatial densities, plus OSPA / OSPA-T metrics.

pub mod assignment;
pub mod criteria;
pub mod dglmb;
pub mod error;
pub mod gaussian;
pub mod labeled;
pub mod lmb;
pub mod ospa;
pub mod pipeline;

pub use criteria::{CriteriaThresholds, Mode, RepresentationState, Trigger};
pub use error::{Error, Result};
pub use gaussian::{GaussianComponent, GaussianMixture, MotionModel, ReductionParams, SensorModel};
pub use labeled::{CardinalityDistribution, DglmbDensity, Hypothesis, Label, LmbDensity, MultiObjectDensity, Track};
pub use pipeline::{AlmbFilter, BirthModel, DensityGroup, Models, PipelineConfig, RepresentationPolicy, TrackEstimate};
