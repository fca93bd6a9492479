//! Noise-free ground truth and simulated sensor scans.

use almb_core::ospa::LabeledPoint;
use nalgebra::{dvector, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::config::ScenarioConfig;

/// One scripted object: states for every step it is alive.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrajectory {
    pub id: usize,
    pub birth_step: u32,
    /// `states[i]` is the state at step `birth_step + i`.
    pub states: Vec<[f64; 4]>,
}

impl TruthTrajectory {
    pub fn death_step(&self) -> u32 {
        self.birth_step + self.states.len() as u32 - 1
    }

    pub fn state_at(&self, k: u32) -> Option<[f64; 4]> {
        k.checked_sub(self.birth_step)
            .and_then(|i| self.states.get(i as usize).copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub steps: u32,
    pub tracks: Vec<TruthTrajectory>,
}

impl GroundTruth {
    /// Objects alive at step `k` (1-based), as `(id, state)`.
    pub fn alive(&self, k: u32) -> impl Iterator<Item = (usize, [f64; 4])> + '_ {
        self.tracks.iter().filter_map(move |t| t.state_at(k).map(|s| (t.id, s)))
    }

    pub fn cardinality(&self, k: u32) -> usize {
        self.alive(k).count()
    }

    /// Labeled positions per step, indexed from step 1.
    pub fn positions(&self) -> Vec<Vec<LabeledPoint<usize>>> {
        (1..=self.steps)
            .map(|k| {
                self.alive(k)
                    .map(|(id, s)| LabeledPoint::new(id, dvector![s[0], s[2]]))
                    .collect()
            })
            .collect()
    }
}

/// Constant-velocity trajectories from the scripted initial states, with
/// velocity ramps applied during their maneuvers. Objects are clipped to the
/// scenario duration.
pub fn generate_truth(config: &ScenarioConfig) -> GroundTruth {
    let dt = config.cycle_time;
    let tracks = config
        .truth
        .iter()
        .enumerate()
        .filter(|(_, t)| t.birth_step <= config.steps)
        .map(|(id, t)| {
            let last = t.death_step.min(config.steps);
            let mut state = t.initial_state;
            let mut states = vec![state];
            let mut from = [state[1], state[3]];
            for k in t.birth_step + 1..=last {
                if let Some(m) = t.maneuvers.iter().find(|m| (m.step..m.step + m.duration).contains(&k)) {
                    if k == m.step {
                        from = [state[1], state[3]];
                    }
                    let f = (k - m.step + 1) as f64 / m.duration as f64;
                    state[1] = from[0] + f * (m.velocity[0] - from[0]);
                    state[3] = from[1] + f * (m.velocity[1] - from[1]);
                }
                state[0] += dt * state[1];
                state[2] += dt * state[3];
                states.push(state);
            }
            TruthTrajectory {
                id,
                birth_step: t.birth_step,
                states,
            }
        })
        .collect();
    GroundTruth {
        steps: config.steps,
        tracks,
    }
}

/// Measurement scans for steps 1..=K: detections with probability p_D and
/// Gaussian position noise, plus Poisson clutter uniform over the region,
/// in random order.
pub fn generate_measurements<R: Rng + ?Sized>(
    truth: &GroundTruth,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Vec<Vec<DVector<f64>>> {
    let noise = Normal::new(0.0, config.sensor.noise_std).expect("validated noise std");
    let clutter = (config.sensor.clutter_rate > 0.0)
        .then(|| Poisson::new(config.sensor.clutter_rate).expect("validated clutter rate"));
    let [x0, x1] = config.region.x;
    let [y0, y1] = config.region.y;
    (1..=truth.steps)
        .map(|k| {
            let mut scan = Vec::new();
            for (_, s) in truth.alive(k) {
                if rng.random::<f64>() < config.sensor.detection {
                    scan.push(dvector![s[0] + noise.sample(rng), s[2] + noise.sample(rng)]);
                }
            }
            let n_clutter = clutter.map_or(0, |p| p.sample(rng) as usize);
            for _ in 0..n_clutter {
                scan.push(dvector![rng.random_range(x0..x1), rng.random_range(y0..y1)]);
            }
            scan.shuffle(rng);
            scan
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Maneuver, TruthTrack};

    fn config() -> ScenarioConfig {
        ScenarioConfig {
            steps: 10,
            truth: vec![TruthTrack {
                birth_step: 2,
                death_step: 6,
                initial_state: [0.0, 1.0, 0.0, 2.0],
                maneuvers: vec![Maneuver {
                    step: 4,
                    velocity: [-1.0, 0.0],
                    duration: 1,
                }],
            }],
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn scripted_trajectory() {
        let t = generate_truth(&config());
        let tr = &t.tracks[0];
        assert_eq!(tr.death_step(), 6);
        assert_eq!(tr.state_at(1), None);
        assert_eq!(tr.state_at(2), Some([0.0, 1.0, 0.0, 2.0]));
        assert_eq!(tr.state_at(3), Some([1.0, 1.0, 2.0, 2.0]));
        assert_eq!(tr.state_at(4), Some([0.0, -1.0, 2.0, 0.0]));
        assert_eq!(tr.state_at(7), None);
        assert_eq!(t.cardinality(5), 1);
        assert_eq!(t.positions()[0].len(), 0);
    }

    #[test]
    fn ramped_maneuver() {
        let mut c = config();
        c.truth[0].maneuvers[0] = Maneuver {
            step: 3,
            velocity: [3.0, 0.0],
            duration: 2,
        };
        let t = generate_truth(&c);
        let tr = &t.tracks[0];
        // velocity (1, 2) -> (2, 1) at step 3 -> (3, 0) at step 4
        assert_eq!(tr.state_at(3), Some([2.0, 2.0, 1.0, 1.0]));
        assert_eq!(tr.state_at(4), Some([5.0, 3.0, 1.0, 0.0]));
        assert_eq!(tr.state_at(5), Some([8.0, 3.0, 1.0, 0.0]));
    }
}
