//! Switching criteria: KL divergence between the δ-GLMB cardinality
//! distribution and that of its LMB approximation, the column entropy of the
//! track-to-measurement association matrix, and the switch automaton.
//!
//! Logarithms are natural throughout; thresholds are in nats.

use nalgebra::DMatrix;

use crate::labeled::{CardinalityDistribution, DglmbDensity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaThresholds {
    pub kl_threshold: f64,
    pub entropy_threshold: f64,
}

impl Default for CriteriaThresholds {
    fn default() -> Self {
        Self {
            kl_threshold: 1e-4,
            entropy_threshold: 0.5,
        }
    }
}

/// Criterion that moved a group to δ-GLMB form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    Kl,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Lmb,
    Dglmb,
}

/// Representation of a density group. A δ-GLMB group remembers the
/// criterion that triggered it; only that criterion can switch it back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RepresentationState {
    #[default]
    Lmb,
    Dglmb(Trigger),
}

impl RepresentationState {
    pub fn mode(self) -> Mode {
        match self {
            RepresentationState::Lmb => Mode::Lmb,
            RepresentationState::Dglmb(_) => Mode::Dglmb,
        }
    }

    pub fn trigger(self) -> Option<Trigger> {
        match self {
            RepresentationState::Lmb => None,
            RepresentationState::Dglmb(t) => Some(t),
        }
    }
}

/// D_KL(P ‖ Q) over distributions padded with zeros to a common length.
/// Terms with P(i) = 0 vanish; P(i) > 0 with Q(i) = 0 gives +∞.
pub fn kl_divergence(p: &CardinalityDistribution, q: &CardinalityDistribution) -> f64 {
    let n = p.len().max(q.len());
    let mut kl = 0.0;
    for i in 0..n {
        let (pi, qi) = (p.get(i), q.get(i));
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        kl += pi * (pi / qi).ln();
    }
    // rounding can leave tiny negative sums for identical inputs
    kl.max(0.0)
}

/// KL divergence between the cardinality of `full` and that of its LMB
/// approximation.
pub fn kl_criterion(full: &DglmbDensity) -> f64 {
    kl_divergence(&full.cardinality(), &full.to_lmb().cardinality())
}

/// Σ over columns and rows of -r ln r with 0 ln 0 = 0.
pub fn association_entropy(marginals: &DMatrix<f64>) -> f64 {
    marginals
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| -r * r.ln())
        .sum::<f64>()
        .max(0.0)
}

/// One transition of the representation automaton. KL is checked before
/// entropy when switching to δ-GLMB.
pub fn decide_switch(
    state: RepresentationState,
    kl: f64,
    entropy: f64,
    thresholds: &CriteriaThresholds,
) -> RepresentationState {
    match state {
        RepresentationState::Lmb => {
            if kl > thresholds.kl_threshold {
                RepresentationState::Dglmb(Trigger::Kl)
            } else if entropy > thresholds.entropy_threshold {
                RepresentationState::Dglmb(Trigger::Entropy)
            } else {
                RepresentationState::Lmb
            }
        }
        RepresentationState::Dglmb(Trigger::Kl) if kl <= thresholds.kl_threshold => RepresentationState::Lmb,
        RepresentationState::Dglmb(Trigger::Entropy) if entropy <= thresholds.entropy_threshold => {
            RepresentationState::Lmb
        }
        s => s,
    }
}
