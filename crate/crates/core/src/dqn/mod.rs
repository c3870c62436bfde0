//! Deep Q-learning generator of C&C velocities at the BS.

mod io;
mod network;
mod optim;
mod replay;
mod trainer;

use rand::Rng;
use thiserror::Error;

use crate::kinematics::{Position, SimClock, Velocity, VelocitySets};
use crate::SimRng;

pub use io::{load_network, read_network, save_network, write_network, MODEL_MAGIC, MODEL_VERSION};
pub use network::{argmax, QNetwork, Scratch};
pub use optim::RmsProp;
pub use replay::ReplayMemory;
pub use trainer::{td_gradient, train, CurvePoint, Environment, StepOutcome, TdGradient, Trainer, TrainerConfig, TrainingOutcome};

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("network shape: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("replay memory holds {have} transitions, needs {need} before sampling")]
    NotWarm { have: usize, need: usize },
    #[error("training diverged in episode {episode}: non-finite parameter")]
    Diverged { episode: usize },
    #[error("invalid trainer setting {name}: {reason}")]
    InvalidConfig { name: &'static str, reason: String },
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What the agent sees when deciding TTI `i`: the last uplinked position
/// `p_{i-1}`, the decision instant `t_{i-1}`, and the next waypoint `g_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Position,
    pub t: f64,
    pub goal: Position,
}

/// Index-addressed action list; index order is the lexicographic grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    actions: Vec<Velocity>,
}

impl ActionSpace {
    pub fn new(vel_sets: &VelocitySets) -> Self {
        Self {
            actions: vel_sets.grid(),
        }
    }

    pub fn from_actions(actions: Vec<Velocity>) -> Result<Self, DqnError> {
        if actions.is_empty() {
            return Err(DqnError::Shape("empty action space".into()));
        }
        Ok(Self { actions })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn velocity(&self, index: usize) -> Velocity {
        self.actions[index]
    }

    pub fn index_of(&self, v: Velocity) -> Option<usize> {
        self.actions.iter().position(|&a| a == v)
    }

    pub fn actions(&self) -> &[Velocity] {
        &self.actions
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: AgentState,
    pub a: usize,
    /// `-||p_i - g_i||`.
    pub r: f64,
    pub s_next: AgentState,
    /// No bootstrap from `s_next`.
    pub terminal: bool,
}

/// Normalization of an [`AgentState`] into network inputs.
///
/// Inputs: position over `scene_scale_m`, time over the horizon and, when
/// `goal_offset` is set, `g_i - p_{i-1}` over the largest one-TTI move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMap {
    pub scene_scale_m: f64,
    pub horizon_s: f64,
    pub step_scale_m: f64,
    pub goal_offset: bool,
}

impl FeatureMap {
    pub fn new(scene_scale_m: f64, clock: &SimClock, vel_sets: &VelocitySets, goal_offset: bool) -> Self {
        let step = vel_sets.max_abs() * clock.tti_s;
        Self {
            scene_scale_m,
            horizon_s: clock.horizon(),
            step_scale_m: if step > 0.0 { step } else { 1.0 },
            goal_offset,
        }
    }

    pub fn len(&self) -> usize {
        if self.goal_offset {
            7
        } else {
            4
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode_into(&self, s: &AgentState, out: &mut Vec<f64>) {
        out.clear();
        let p = s.position;
        out.extend([
            p.x / self.scene_scale_m,
            p.y / self.scene_scale_m,
            p.z / self.scene_scale_m,
            s.t / self.horizon_s,
        ]);
        if self.goal_offset {
            let d = s.goal - p;
            out.extend([d.dx / self.step_scale_m, d.dy / self.step_scale_m, d.dz / self.step_scale_m]);
        }
    }

    pub fn encode(&self, s: &AgentState) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.encode_into(s, &mut out);
        out
    }
}

/// ε-greedy choice: uniform with probability `epsilon`, else the argmax (lowest index on ties).
pub fn select_action(net: &QNetwork, features: &[f64], epsilon: f64, rng: &mut SimRng) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..net.output_len())
    } else {
        argmax(&net.forward(features))
    }
}

/// A trained, immutable greedy policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub net: QNetwork,
    pub features: FeatureMap,
    pub actions: ActionSpace,
}

impl Agent {
    pub fn new(net: QNetwork, features: FeatureMap, actions: ActionSpace) -> Result<Self, DqnError> {
        if net.input_len() != features.len() || net.output_len() != actions.len() {
            return Err(DqnError::Shape(format!(
                "network {:?} does not fit {} features and {} actions",
                net.sizes(),
                features.len(),
                actions.len()
            )));
        }
        Ok(Self { net, features, actions })
    }

    pub fn greedy_index(&self, s: &AgentState) -> usize {
        argmax(&self.net.forward(&self.features.encode(s)))
    }

    pub fn greedy(&self, s: &AgentState) -> Velocity {
        self.actions.velocity(self.greedy_index(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn biased_net(bias: &[f64]) -> QNetwork {
        // one linear layer with zero weights: outputs equal the biases
        let mut params = vec![0.0; 4 * bias.len()];
        params.extend_from_slice(bias);
        QNetwork::from_params(&[4, bias.len()], params).unwrap()
    }

    #[test]
    fn greedy_is_deterministic_argmax() {
        let net = biased_net(&[0.1, 0.7, -0.3]);
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(select_action(&net, &[0.0; 4], 0.0, &mut rng), 1);
        }
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        let q = [0.2, 0.9, 0.9, 0.9, -1.0];
        // every permutation that keeps the maxima at indices 1..=3 picks index 1
        let net = biased_net(&q);
        assert_eq!(select_action(&net, &[0.0; 4], 0.0, &mut SimRng::seed_from_u64(0)), 1);
        let shifted: Vec<f64> = q.iter().map(|v| v + 17.5).collect();
        assert_eq!(argmax(&shifted), argmax(&q));
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = biased_net(&[0.0; 121]);
        let mut rng = SimRng::seed_from_u64(42);
        let draws = 100_000;
        let mut counts = vec![0usize; 121];
        for _ in 0..draws {
            counts[select_action(&net, &[0.0; 4], 1.0, &mut rng)] += 1;
        }
        let p = 1.0 / 121.0;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!((c as f64 - mean).abs() < 4.0 * sigma, "action {i}: {c}");
        }
    }

    #[test]
    fn feature_layout() {
        let clock = SimClock::default();
        let fm = FeatureMap::new(100.0, &clock, &VelocitySets::planar_default(), true);
        let s = AgentState {
            position: Position::new(80.0, 40.0, 20.0),
            t: clock.boundary(33),
            goal: Position::new(82.5, 40.0, 20.0),
        };
        let x = fm.encode(&s);
        assert_eq!(x.len(), 7);
        assert_eq!(&x[..3], &[0.8, 0.4, 0.2]);
        assert!((x[3] - 33.0 / 99.0).abs() < 1e-12);
        assert_eq!(&x[4..], &[0.5, 0.0, 0.0]);
        let plain = FeatureMap { goal_offset: false, ..fm };
        assert_eq!(plain.encode(&s).len(), 4);
    }

    #[test]
    fn action_space_matches_grid() {
        let a = ActionSpace::new(&VelocitySets::planar_default());
        assert_eq!(a.len(), 121);
        assert_eq!(a.velocity(0), Velocity::new(-5000.0, -5000.0, 0.0));
        assert_eq!(a.index_of(Velocity::ZERO), Some(60));
    }
}
