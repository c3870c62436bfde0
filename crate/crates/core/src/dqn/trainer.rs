//! Experience-replay Q-learning with a periodically synced target network.

use super::{select_action, AgentState, DqnError, FeatureMap, QNetwork, ReplayMemory, RmsProp, Scratch, Transition};
use crate::{Error, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the episodes over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    pub lr: f64,
    pub rms_rho: f64,
    pub rms_eps: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub warmup: usize,
    /// `N^theta`, in episodes.
    pub target_sync_episodes: usize,
    /// `N^I`.
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub scene_scale_m: f64,
    pub goal_offset: bool,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.8,
            lr: 1e-4,
            rms_rho: 0.99,
            rms_eps: 1e-8,
            replay_capacity: 10_000,
            batch_size: 64,
            warmup: 500,
            target_sync_episodes: 10,
            episodes: 2000,
            hidden: vec![64, 64],
            scene_scale_m: 100.0,
            goal_offset: true,
            seed: 7,
        }
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> DqnError {
    DqnError::InvalidConfig {
        name,
        reason: reason.into(),
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1]"));
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return Err(invalid("epsilon_decay_fraction", "must lie in (0, 1]"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.rms_rho) {
            return Err(invalid("rms_rho", "must lie in [0, 1)"));
        }
        if !(self.rms_eps > 0.0) {
            return Err(invalid("rms_eps", "must be positive"));
        }
        if self.replay_capacity == 0 {
            return Err(invalid("replay_capacity", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        if self.warmup > self.replay_capacity {
            return Err(invalid("warmup", "cannot exceed replay_capacity"));
        }
        if self.target_sync_episodes == 0 {
            return Err(invalid("target_sync_episodes", "must be positive"));
        }
        if self.episodes == 0 {
            return Err(invalid("episodes", "must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("hidden", "layer widths must be positive"));
        }
        if !(self.scene_scale_m > 0.0) {
            return Err(invalid("scene_scale_m", "must be positive"));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, episode: usize) -> f64 {
        let span = self.epsilon_decay_fraction * self.episodes as f64;
        let e = episode as f64;
        if e >= span {
            self.epsilon_end
        } else {
            self.epsilon_start + (self.epsilon_end - self.epsilon_start) * e / span
        }
    }

    pub fn layer_sizes(&self, inputs: usize, actions: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(inputs);
        sizes.extend(&self.hidden);
        sizes.push(actions);
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdGradient {
    /// Gradient of `0.5 * mean((y - Q)^2)` with `y` held constant.
    pub grad: Vec<f64>,
    pub loss: f64,
}

/// TD targets come from `target`; `Q(s, a)` and its gradient from `net`.
pub fn td_gradient(
    net: &QNetwork,
    target: &QNetwork,
    batch: &[&Transition],
    gamma: f64,
    features: &FeatureMap,
) -> Result<TdGradient, DqnError> {
    if batch.is_empty() {
        return Err(DqnError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grad = vec![0.0; net.param_count()];
    let mut loss = 0.0;
    let mut scratch = Scratch::default();
    let mut x = Vec::with_capacity(features.len());
    for t in batch {
        let y = if t.terminal {
            t.r
        } else {
            features.encode_into(&t.s_next, &mut x);
            t.r + gamma * target.max_value(&x, &mut scratch)
        };
        features.encode_into(&t.s, &mut x);
        net.value_and_grad(
            &x,
            t.a,
            &mut grad,
            |q| {
                loss += 0.5 * (y - q) * (y - q) / n;
                -(y - q) / n
            },
            &mut scratch,
        );
    }
    Ok(TdGradient { grad, loss })
}

pub struct StepOutcome {
    pub reward: f64,
    pub next: AgentState,
    pub done: bool,
}

/// An episodic environment with an index-addressed action space.
pub trait Environment {
    fn reset(&mut self, episode: usize) -> Result<AgentState, Error>;
    fn step(&mut self, action: usize) -> Result<StepOutcome, Error>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub cum_reward: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub net: QNetwork,
    pub curve: Vec<CurvePoint>,
}

pub struct Trainer {
    pub cfg: TrainerConfig,
    pub features: FeatureMap,
    pub online: QNetwork,
    pub target: QNetwork,
    pub opt: RmsProp,
    pub replay: ReplayMemory,
    episodes_since_sync: usize,
}

impl Trainer {
    pub fn new(cfg: TrainerConfig, features: FeatureMap, actions: usize, rng: &mut SimRng) -> Result<Self, DqnError> {
        cfg.validate()?;
        let online = QNetwork::new(&cfg.layer_sizes(features.len(), actions), rng)?;
        let opt = RmsProp::new(online.param_count(), cfg.lr, cfg.rms_rho, cfg.rms_eps);
        let replay = ReplayMemory::new(cfg.replay_capacity, cfg.warmup.max(cfg.batch_size.min(cfg.replay_capacity)))?;
        Ok(Self {
            target: online.clone(),
            online,
            opt,
            replay,
            cfg,
            features,
            episodes_since_sync: 0,
        })
    }

    pub fn episodes_since_sync(&self) -> usize {
        self.episodes_since_sync
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
        self.episodes_since_sync = 0;
    }

    /// Counts a finished episode and syncs every `N^theta` of them.
    pub fn end_episode(&mut self) -> bool {
        self.episodes_since_sync += 1;
        if self.episodes_since_sync >= self.cfg.target_sync_episodes {
            self.sync_target();
            true
        } else {
            false
        }
    }

    /// One minibatch update once the replay memory is warm.
    pub fn learn(&mut self, rng: &mut SimRng) -> Result<Option<f64>, DqnError> {
        if !self.replay.is_warm() {
            return Ok(None);
        }
        let batch = self.replay.sample(self.cfg.batch_size, rng)?;
        let td = td_gradient(&self.online, &self.target, &batch, self.cfg.gamma, &self.features)?;
        self.opt.step(self.online.params_mut(), &td.grad);
        Ok(Some(td.loss))
    }
}

/// Alg. 2-style loop: act ε-greedily, store, replay-update every step, sync on episode boundaries.
pub fn train<E: Environment + ?Sized>(
    env: &mut E,
    cfg: &TrainerConfig,
    features: FeatureMap,
    actions: usize,
    rng: &mut SimRng,
) -> Result<TrainingOutcome, Error> {
    let mut trainer = Trainer::new(cfg.clone(), features, actions, rng)?;
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut x = Vec::with_capacity(features.len());
    for episode in 0..cfg.episodes {
        let epsilon = cfg.epsilon_at(episode);
        let mut s = env.reset(episode)?;
        let mut cum_reward = 0.0;
        loop {
            features.encode_into(&s, &mut x);
            let a = select_action(&trainer.online, &x, epsilon, rng);
            let out = env.step(a)?;
            cum_reward += out.reward;
            trainer.replay.push(Transition {
                s,
                a,
                r: out.reward,
                s_next: out.next,
                terminal: out.done,
            });
            trainer.learn(rng)?;
            if !trainer.online.is_finite() {
                return Err(DqnError::Diverged { episode }.into());
            }
            s = out.next;
            if out.done {
                break;
            }
        }
        trainer.end_episode();
        curve.push(CurvePoint {
            episode,
            cum_reward,
            epsilon,
        });
    }
    Ok(TrainingOutcome {
        net: trainer.online,
        curve,
    })
}
