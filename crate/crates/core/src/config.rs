//! Experiment configuration as flat `section.key = value` text.
//!
//! Absent keys keep their defaults. `#` starts a comment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use crate::channel::{db_to_linear, ChannelParams};
use crate::dqn::TrainerConfig;
use crate::engine::{make_trajectory, Scenario, SchemeId, TrajectoryKind, TrajectoryOptions};
use crate::kinematics::{Position, SimClock, TargetTrajectory, VelocitySets};
use crate::repetition::RepetitionParams;
use crate::{Error, SimRng};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: unknown key `{key}`")]
    UnknownKey { origin: String, line: usize, key: String },
    #[error("{origin}:{line}: expected `key = value`")]
    Syntax { origin: String, line: usize },
    #[error("{origin}:{line}: invalid value for `{key}`: {message}")]
    Value {
        origin: String,
        line: usize,
        key: String,
        message: String,
    },
    #[error("{origin}: `{key}`: {message}")]
    Invariant { origin: String, key: String, message: String },
    #[error("{origin}: {source}")]
    Io {
        origin: String,
        #[source]
        source: std::io::Error,
    },
}

/// Everything one `train` / `eval` / `sweep` run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub clock: SimClock,
    pub channel: ChannelParams,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub bs: Position,
    pub repetition: RepetitionParams,
    pub vel_sets: VelocitySets,
    pub q_max: usize,
    pub arrival_q_max: usize,
    pub trainer: TrainerConfig,
    pub schemes: Vec<SchemeId>,
    pub episodes: usize,
    pub base_seed: u64,
    pub trajectory: TrajectoryKind,
    pub trajectory_seed: u64,
    pub trajectory_opts: TrajectoryOptions,
    pub output_dir: PathBuf,
    /// Worker threads for batches; 0 lets the pool decide.
    pub threads: usize,
    /// Episodes written to trajectory.csv per scheme.
    pub trajectory_episodes: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let eta_los_db = 1.0;
        let eta_nlos_db = 20.0;
        Self {
            clock: SimClock::default(),
            channel: ChannelParams {
                eta_los: db_to_linear(eta_los_db),
                eta_nlos: db_to_linear(eta_nlos_db),
                ..ChannelParams::default()
            },
            eta_los_db,
            eta_nlos_db,
            bs: Position::new(0.0, 0.0, 0.0),
            repetition: RepetitionParams::default(),
            vel_sets: VelocitySets::planar_default(),
            q_max: 10,
            arrival_q_max: 1,
            trainer: TrainerConfig::default(),
            schemes: SchemeId::ALL.to_vec(),
            episodes: 1000,
            base_seed: 1,
            trajectory: TrajectoryKind::RandomWalk,
            trajectory_seed: 2024,
            trajectory_opts: TrajectoryOptions::default(),
            output_dir: PathBuf::from("out"),
            threads: 0,
            trajectory_episodes: 1,
        }
    }
}

/// Every recognised key, in dump order.
pub const KEYS: &[&str] = &[
    "clock.tti_s",
    "clock.n_tti",
    "clock.n_m",
    "channel.a",
    "channel.b",
    "channel.fc_hz",
    "channel.alpha",
    "channel.eta_los_db",
    "channel.eta_nlos_db",
    "channel.noise_dbm",
    "channel.tx_power_dbm",
    "channel.bandwidth_hz",
    "channel.snr_threshold_db",
    "channel.cnc_bytes",
    "channel.bs_x",
    "channel.bs_y",
    "channel.bs_z",
    "repetition.k_max",
    "repetition.t_rep_s",
    "velocity.x",
    "velocity.y",
    "velocity.z",
    "queue.q_max",
    "queue.arrival_q_max",
    "trainer.gamma",
    "trainer.epsilon_start",
    "trainer.epsilon_end",
    "trainer.epsilon_decay_fraction",
    "trainer.lr",
    "trainer.rms_rho",
    "trainer.rms_eps",
    "trainer.replay_capacity",
    "trainer.batch_size",
    "trainer.warmup",
    "trainer.target_sync_episodes",
    "trainer.episodes",
    "trainer.hidden",
    "trainer.scene_scale_m",
    "trainer.goal_offset",
    "trainer.seed",
    "experiment.schemes",
    "experiment.episodes",
    "experiment.base_seed",
    "experiment.trajectory",
    "experiment.trajectory_seed",
    "experiment.start_x",
    "experiment.start_y",
    "experiment.start_z",
    "experiment.disk_radius_m",
    "experiment.persistence",
    "experiment.output_dir",
    "experiment.threads",
    "experiment.trajectory_episodes",
];

fn parse<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| e.to_string())
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Assign one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Option<String>> {
        let v = value;
        let r: Result<(), String> = (|| {
            match key {
                "clock.tti_s" => self.clock.tti_s = parse(v)?,
                "clock.n_tti" => self.clock.n_tti = parse(v)?,
                "clock.n_m" => self.clock.n_m = parse(v)?,
                "channel.a" => self.channel.a = parse(v)?,
                "channel.b" => self.channel.b = parse(v)?,
                "channel.fc_hz" => self.channel.fc_hz = parse(v)?,
                "channel.alpha" => self.channel.alpha = parse(v)?,
                "channel.eta_los_db" => {
                    self.eta_los_db = parse(v)?;
                    self.channel.eta_los = db_to_linear(self.eta_los_db);
                }
                "channel.eta_nlos_db" => {
                    self.eta_nlos_db = parse(v)?;
                    self.channel.eta_nlos = db_to_linear(self.eta_nlos_db);
                }
                "channel.noise_dbm" => self.channel.noise_dbm = parse(v)?,
                "channel.tx_power_dbm" => self.channel.tx_power_dbm = parse(v)?,
                "channel.bandwidth_hz" => self.channel.bandwidth_hz = parse(v)?,
                "channel.snr_threshold_db" => self.channel.snr_threshold_db = parse(v)?,
                "channel.cnc_bytes" => {
                    let bytes: u32 = parse(v)?;
                    self.channel.cnc_bits = bytes.checked_mul(8).ok_or("too large")?;
                }
                "channel.bs_x" => self.bs.x = parse(v)?,
                "channel.bs_y" => self.bs.y = parse(v)?,
                "channel.bs_z" => self.bs.z = parse(v)?,
                "repetition.k_max" => self.repetition.k_max = parse(v)?,
                "repetition.t_rep_s" => self.repetition.t_rep_s = parse(v)?,
                "velocity.x" => self.vel_sets.x = parse_list(v)?,
                "velocity.y" => self.vel_sets.y = parse_list(v)?,
                "velocity.z" => self.vel_sets.z = parse_list(v)?,
                "queue.q_max" => self.q_max = parse(v)?,
                "queue.arrival_q_max" => self.arrival_q_max = parse(v)?,
                "trainer.gamma" => self.trainer.gamma = parse(v)?,
                "trainer.epsilon_start" => self.trainer.epsilon_start = parse(v)?,
                "trainer.epsilon_end" => self.trainer.epsilon_end = parse(v)?,
                "trainer.epsilon_decay_fraction" => self.trainer.epsilon_decay_fraction = parse(v)?,
                "trainer.lr" => self.trainer.lr = parse(v)?,
                "trainer.rms_rho" => self.trainer.rms_rho = parse(v)?,
                "trainer.rms_eps" => self.trainer.rms_eps = parse(v)?,
                "trainer.replay_capacity" => self.trainer.replay_capacity = parse(v)?,
                "trainer.batch_size" => self.trainer.batch_size = parse(v)?,
                "trainer.warmup" => self.trainer.warmup = parse(v)?,
                "trainer.target_sync_episodes" => self.trainer.target_sync_episodes = parse(v)?,
                "trainer.episodes" => self.trainer.episodes = parse(v)?,
                "trainer.hidden" => self.trainer.hidden = parse_list(v)?,
                "trainer.scene_scale_m" => self.trainer.scene_scale_m = parse(v)?,
                "trainer.goal_offset" => self.trainer.goal_offset = parse(v)?,
                "trainer.seed" => self.trainer.seed = parse(v)?,
                "experiment.schemes" => self.schemes = parse_list(v)?,
                "experiment.episodes" => self.episodes = parse(v)?,
                "experiment.base_seed" => self.base_seed = parse(v)?,
                "experiment.trajectory" => self.trajectory = parse(v)?,
                "experiment.trajectory_seed" => self.trajectory_seed = parse(v)?,
                "experiment.start_x" => self.trajectory_opts.start.x = parse(v)?,
                "experiment.start_y" => self.trajectory_opts.start.y = parse(v)?,
                "experiment.start_z" => self.trajectory_opts.start.z = parse(v)?,
                "experiment.disk_radius_m" => self.trajectory_opts.disk_radius_m = parse(v)?,
                "experiment.persistence" => self.trajectory_opts.persistence = parse(v)?,
                "experiment.output_dir" => self.output_dir = PathBuf::from(v),
                "experiment.threads" => self.threads = parse(v)?,
                "experiment.trajectory_episodes" => self.trajectory_episodes = parse(v)?,
                _ => return Err(String::new()),
            }
            Ok(())
        })();
        match r {
            Ok(()) => Ok(()),
            Err(msg) if msg.is_empty() && !KEYS.contains(&key) => Err(None),
            Err(msg) => Err(Some(msg)),
        }
    }

    /// Textual value of `key`, parseable back by [`Self::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "clock.tti_s" => self.clock.tti_s.to_string(),
            "clock.n_tti" => self.clock.n_tti.to_string(),
            "clock.n_m" => self.clock.n_m.to_string(),
            "channel.a" => self.channel.a.to_string(),
            "channel.b" => self.channel.b.to_string(),
            "channel.fc_hz" => self.channel.fc_hz.to_string(),
            "channel.alpha" => self.channel.alpha.to_string(),
            "channel.eta_los_db" => self.eta_los_db.to_string(),
            "channel.eta_nlos_db" => self.eta_nlos_db.to_string(),
            "channel.noise_dbm" => self.channel.noise_dbm.to_string(),
            "channel.tx_power_dbm" => self.channel.tx_power_dbm.to_string(),
            "channel.bandwidth_hz" => self.channel.bandwidth_hz.to_string(),
            "channel.snr_threshold_db" => self.channel.snr_threshold_db.to_string(),
            "channel.cnc_bytes" => (self.channel.cnc_bits / 8).to_string(),
            "channel.bs_x" => self.bs.x.to_string(),
            "channel.bs_y" => self.bs.y.to_string(),
            "channel.bs_z" => self.bs.z.to_string(),
            "repetition.k_max" => self.repetition.k_max.to_string(),
            "repetition.t_rep_s" => self.repetition.t_rep_s.to_string(),
            "velocity.x" => join(&self.vel_sets.x),
            "velocity.y" => join(&self.vel_sets.y),
            "velocity.z" => join(&self.vel_sets.z),
            "queue.q_max" => self.q_max.to_string(),
            "queue.arrival_q_max" => self.arrival_q_max.to_string(),
            "trainer.gamma" => self.trainer.gamma.to_string(),
            "trainer.epsilon_start" => self.trainer.epsilon_start.to_string(),
            "trainer.epsilon_end" => self.trainer.epsilon_end.to_string(),
            "trainer.epsilon_decay_fraction" => self.trainer.epsilon_decay_fraction.to_string(),
            "trainer.lr" => self.trainer.lr.to_string(),
            "trainer.rms_rho" => self.trainer.rms_rho.to_string(),
            "trainer.rms_eps" => self.trainer.rms_eps.to_string(),
            "trainer.replay_capacity" => self.trainer.replay_capacity.to_string(),
            "trainer.batch_size" => self.trainer.batch_size.to_string(),
            "trainer.warmup" => self.trainer.warmup.to_string(),
            "trainer.target_sync_episodes" => self.trainer.target_sync_episodes.to_string(),
            "trainer.episodes" => self.trainer.episodes.to_string(),
            "trainer.hidden" => join(&self.trainer.hidden),
            "trainer.scene_scale_m" => self.trainer.scene_scale_m.to_string(),
            "trainer.goal_offset" => self.trainer.goal_offset.to_string(),
            "trainer.seed" => self.trainer.seed.to_string(),
            "experiment.schemes" => join(&self.schemes),
            "experiment.episodes" => self.episodes.to_string(),
            "experiment.base_seed" => self.base_seed.to_string(),
            "experiment.trajectory" => self.trajectory.to_string(),
            "experiment.trajectory_seed" => self.trajectory_seed.to_string(),
            "experiment.start_x" => self.trajectory_opts.start.x.to_string(),
            "experiment.start_y" => self.trajectory_opts.start.y.to_string(),
            "experiment.start_z" => self.trajectory_opts.start.z.to_string(),
            "experiment.disk_radius_m" => self.trajectory_opts.disk_radius_m.to_string(),
            "experiment.persistence" => self.trajectory_opts.persistence.to_string(),
            "experiment.output_dir" => self.output_dir.display().to_string(),
            "experiment.threads" => self.threads.to_string(),
            "experiment.trajectory_episodes" => self.trajectory_episodes.to_string(),
            _ => return None,
        })
    }

    /// Parse `text` over the defaults; `origin` names the source in diagnostics.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                origin: origin.to_string(),
                line,
            })?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|e| match e {
                None => ConfigError::UnknownKey {
                    origin: origin.to_string(),
                    line,
                    key: key.to_string(),
                },
                Some(message) => ConfigError::Value {
                    origin: origin.to_string(),
                    line,
                    key: key.to_string(),
                    message,
                },
            })?;
        }
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            origin: origin.clone(),
            source,
        })?;
        Self::parse_str(&text, &origin)
    }

    /// Every key with its current value, one per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for key in KEYS {
            let head = key.split('.').next().unwrap_or("");
            if head != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = head;
            }
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }

    /// Cross-module invariants; `origin` names the source in diagnostics.
    pub fn validate(&self, origin: &str) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| ConfigError::Invariant {
            origin: origin.to_string(),
            key: key.to_string(),
            message,
        };
        self.clock.validate().map_err(|e| bad("clock", e.to_string()))?;
        self.channel.validate().map_err(|e| bad("channel", e.to_string()))?;
        self.repetition
            .validate(self.clock.tti_s)
            .map_err(|e| bad("repetition", e.to_string()))?;
        self.trainer.validate().map_err(|e| bad("trainer", e.to_string()))?;
        if self.vel_sets.is_empty() {
            return Err(bad("velocity", "every axis needs at least one value".into()));
        }
        if self.vel_sets.x.iter().chain(&self.vel_sets.y).chain(&self.vel_sets.z).any(|v| !v.is_finite()) {
            return Err(bad("velocity", "values must be finite".into()));
        }
        if self.q_max == 0 {
            return Err(bad("queue.q_max", "must be at least 1".into()));
        }
        if self.arrival_q_max == 0 {
            return Err(bad("queue.arrival_q_max", "must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(bad("experiment.schemes", "list at least one scheme".into()));
        }
        if self.episodes == 0 {
            return Err(bad("experiment.episodes", "must be at least 1".into()));
        }
        if !(self.trajectory_opts.disk_radius_m > 0.0) {
            return Err(bad("experiment.disk_radius_m", "must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.trajectory_opts.persistence) {
            return Err(bad("experiment.persistence", "must lie in [0, 1]".into()));
        }
        let start = self.trajectory_opts.start;
        if start.z <= self.bs.z {
            return Err(bad("experiment.start_z", "the UAV must fly above the base station".into()));
        }
        let (dx, dy) = (start.x - self.bs.x, start.y - self.bs.y);
        if dx.hypot(dy) > self.trajectory_opts.disk_radius_m {
            return Err(bad("experiment.disk_radius_m", "the start point lies outside the flight disk".into()));
        }
        Ok(())
    }

    pub fn trajectory_options(&self) -> TrajectoryOptions {
        TrajectoryOptions {
            disk_center: (self.bs.x, self.bs.y),
            ..self.trajectory_opts
        }
    }

    /// The experiment's target trajectory; random walks draw from `trajectory_seed`.
    pub fn target_trajectory(&self) -> Result<TargetTrajectory, Error> {
        let mut rng = SimRng::seed_from_u64(self.trajectory_seed);
        make_trajectory(
            self.trajectory,
            &self.clock,
            &self.vel_sets,
            &self.trajectory_options(),
            Some(&mut rng),
        )
    }

    pub fn scenario(&self) -> Result<Scenario, Error> {
        let mut sc = Scenario::new(
            self.clock,
            self.target_trajectory()?,
            self.channel,
            self.bs,
            self.vel_sets.clone(),
            self.repetition,
            self.q_max,
        )?;
        sc.arrival_q_max = self.arrival_q_max;
        Ok(sc)
    }
}
