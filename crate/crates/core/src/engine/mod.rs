//! Episode orchestration for the four control schemes.

mod batch;
mod env;
mod episode;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use crate::channel::{ChannelDraw, ChannelError, ChannelParams, DeadLink, Downlink, IdealLink, RadioLink};
use crate::dqn::{ActionSpace, Agent};
use crate::kinematics::{
    error_samples, mse_of, ErrorSample, MotionLog, Position, SimClock, TargetTrajectory, Velocity, VelocitySets,
};
use crate::repetition::RepetitionParams;
use crate::vaqom::Ranking;
use crate::{Error, SimRng};

pub use batch::{episode_rng, run_batch, BatchResult, EpisodeStats, Summary};
pub use env::{train_agent, SchemeEnv};
pub use episode::{Episode, StepReport};
pub use trajectory::{make_trajectory, TrajectoryKind, TrajectoryOptions};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("scheme {0} needs a trained agent")]
    MissingAgent(SchemeId),
    #[error("scheme {0} does not use an agent")]
    UnexpectedAgent(SchemeId),
    #[error("agent action space does not match the scenario's velocity grid")]
    AgentMismatch,
    #[error("trajectory has {got} TTIs, clock has {want}")]
    TrajectoryLength { got: usize, want: usize },
    #[error("episode count must be at least 1")]
    NoEpisodes,
    #[error("episode already finished")]
    Finished,
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("unknown trajectory kind {0:?}")]
    UnknownTrajectory(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Tucf,
    Vaqom,
    DeepPro,
    Gsrc,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Tucf, SchemeId::Vaqom, SchemeId::DeepPro, SchemeId::Gsrc];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Tucf => "TUCF",
            SchemeId::Vaqom => "VAQOM",
            SchemeId::DeepPro => "DEEPPRO",
            SchemeId::Gsrc => "GSRC",
        }
    }

    pub fn uses_agent(self) -> bool {
        matches!(self, SchemeId::DeepPro | SchemeId::Gsrc)
    }

    pub fn uses_repetition(self) -> bool {
        self.uses_agent()
    }

    pub fn uses_semantic_queue(self) -> bool {
        matches!(self, SchemeId::Vaqom | SchemeId::Gsrc)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match key.to_ascii_uppercase().as_str() {
            "TUCF" => Ok(SchemeId::Tucf),
            "VAQOM" => Ok(SchemeId::Vaqom),
            "DEEPPRO" => Ok(SchemeId::DeepPro),
            "GSRC" => Ok(SchemeId::Gsrc),
            _ => Err(EngineError::UnknownScheme(s.to_string())),
        }
    }
}

/// Where each TTI's velocity comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// Nearest grid velocity from the last uplinked position.
    Nearest,
    /// Greedy action of a trained agent.
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmission {
    SingleShot,
    Proactive(RepetitionParams),
}

/// How long the UAV keeps executing the queue head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    /// One TTI from the moment it starts, then hover.
    TtiLimited,
    /// Until a reorder puts another entry at the head.
    UntilReplaced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSpec {
    pub q_max: usize,
    pub ranking: Ranking,
    pub execution: Execution,
}

impl QueueSpec {
    /// Single slot, newest arrival first, one-TTI execution.
    pub fn arrival_slot() -> Self {
        Self {
            q_max: 1,
            ranking: Ranking::Arrival,
            execution: Execution::TtiLimited,
        }
    }

    pub fn semantic(q_max: usize) -> Self {
        Self {
            q_max,
            ranking: Ranking::Semantic,
            execution: Execution::UntilReplaced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pipeline {
    pub generator: Generator,
    pub transmission: Transmission,
    pub queue: QueueSpec,
}

/// Channel model driving an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkModel {
    Radio,
    /// Every copy decodes after a fixed delay.
    Ideal { tx_time_s: f64 },
    /// Nothing decodes.
    Dead,
}

/// Concrete link chosen by [`LinkModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioLink {
    Radio(RadioLink),
    Ideal(IdealLink),
    Dead(DeadLink),
}

impl Downlink for ScenarioLink {
    fn transmit(&mut self, uav: Position, rng: &mut SimRng) -> Result<ChannelDraw, ChannelError> {
        match self {
            ScenarioLink::Radio(l) => l.transmit(uav, rng),
            ScenarioLink::Ideal(l) => l.transmit(uav, rng),
            ScenarioLink::Dead(l) => l.transmit(uav, rng),
        }
    }
}

/// Everything an episode needs apart from the scheme and the randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub clock: SimClock,
    pub traj: TargetTrajectory,
    pub channel: ChannelParams,
    pub bs: Position,
    pub link: LinkModel,
    pub vel_sets: VelocitySets,
    pub repetition: RepetitionParams,
    /// Capacity of the semantic queue.
    pub q_max: usize,
    /// Capacity of the arrival-ordered queue.
    pub arrival_q_max: usize,
    grid: Vec<Velocity>,
}

impl Scenario {
    pub fn new(
        clock: SimClock,
        traj: TargetTrajectory,
        channel: ChannelParams,
        bs: Position,
        vel_sets: VelocitySets,
        repetition: RepetitionParams,
        q_max: usize,
    ) -> Result<Self, Error> {
        clock.validate()?;
        channel.validate()?;
        repetition.validate(clock.tti_s)?;
        if traj.n_tti() != clock.n_tti {
            return Err(EngineError::TrajectoryLength {
                got: traj.n_tti(),
                want: clock.n_tti,
            }
            .into());
        }
        if (traj.tti_s() - clock.tti_s).abs() > 1e-15 * clock.tti_s {
            return Err(EngineError::Invalid("trajectory and clock disagree on the TTI".into()).into());
        }
        if vel_sets.is_empty() {
            return Err(EngineError::Invalid("empty velocity set".into()).into());
        }
        if q_max == 0 {
            return Err(EngineError::Invalid("q_max must be at least 1".into()).into());
        }
        let grid = vel_sets.grid();
        Ok(Self {
            clock,
            traj,
            channel,
            bs,
            link: LinkModel::Radio,
            vel_sets,
            repetition,
            q_max,
            arrival_q_max: 1,
            grid,
        })
    }

    pub fn with_link(mut self, link: LinkModel) -> Self {
        self.link = link;
        self
    }

    pub fn with_repetition(mut self, repetition: RepetitionParams) -> Result<Self, Error> {
        repetition.validate(self.clock.tti_s)?;
        self.repetition = repetition;
        Ok(self)
    }

    pub fn grid(&self) -> &[Velocity] {
        &self.grid
    }

    pub fn make_link(&self) -> ScenarioLink {
        match self.link {
            LinkModel::Radio => ScenarioLink::Radio(RadioLink {
                bs: self.bs,
                params: self.channel,
            }),
            LinkModel::Ideal { tx_time_s } => ScenarioLink::Ideal(IdealLink { tx_time_s }),
            LinkModel::Dead => ScenarioLink::Dead(DeadLink),
        }
    }

    /// The preset pipeline of `scheme` under this scenario's parameters.
    pub fn pipeline(&self, scheme: SchemeId) -> Pipeline {
        let generator = if scheme.uses_agent() {
            Generator::Agent
        } else {
            Generator::Nearest
        };
        let transmission = if scheme.uses_repetition() {
            Transmission::Proactive(self.repetition)
        } else {
            Transmission::SingleShot
        };
        let queue = if scheme.uses_semantic_queue() {
            QueueSpec::semantic(self.q_max)
        } else {
            QueueSpec {
                q_max: self.arrival_q_max,
                ..QueueSpec::arrival_slot()
            }
        };
        Pipeline {
            generator,
            transmission,
            queue,
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace::new(&self.vel_sets)
    }
}

/// Outcome of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub log: MotionLog,
    pub samples: Vec<ErrorSample>,
    pub mse: f64,
    /// Every copy sent, repetitions included.
    pub transmissions: usize,
    /// Delay from generation to first decode, per TTI.
    pub latencies: Vec<Option<f64>>,
}

impl EpisodeResult {
    pub fn assemble(
        log: MotionLog,
        traj: &TargetTrajectory,
        clock: &SimClock,
        transmissions: usize,
        latencies: Vec<Option<f64>>,
    ) -> Result<Self, Error> {
        let samples = error_samples(&log, traj, clock)?;
        let mse = mse_of(&samples);
        Ok(Self {
            log,
            samples,
            mse,
            transmissions,
            latencies,
        })
    }

    /// TTIs whose C&C reached the UAV at least once.
    pub fn decode_count(&self) -> usize {
        self.latencies.iter().filter(|l| l.is_some()).count()
    }
}

fn check_agent(scheme: SchemeId, scenario: &Scenario, agent: Option<&Agent>) -> Result<(), EngineError> {
    match (scheme.uses_agent(), agent) {
        (true, None) => Err(EngineError::MissingAgent(scheme)),
        (false, Some(_)) => Err(EngineError::UnexpectedAgent(scheme)),
        (true, Some(a)) if a.actions.actions() != scenario.grid() => Err(EngineError::AgentMismatch),
        _ => Ok(()),
    }
}

/// One episode of `scheme` over the scenario's own channel.
pub fn run_episode(
    scheme: SchemeId,
    scenario: &Scenario,
    agent: Option<&Agent>,
    rng: &mut SimRng,
) -> Result<EpisodeResult, Error> {
    check_agent(scheme, scenario, agent)?;
    run_pipeline(scenario.pipeline(scheme), scenario, scenario.make_link(), agent, rng)
}

/// One episode of an arbitrary pipeline over an arbitrary link.
pub fn run_pipeline<L: Downlink>(
    pipeline: Pipeline,
    scenario: &Scenario,
    link: L,
    agent: Option<&Agent>,
    rng: &mut SimRng,
) -> Result<EpisodeResult, Error> {
    let mut ep = Episode::new(scenario, pipeline, link);
    while !ep.is_done() {
        let payload = match (pipeline.generator, agent) {
            (Generator::Agent, Some(a)) => a.greedy(&ep.state()),
            (Generator::Agent, None) => return Err(EngineError::Invalid("agent generator without agent".into()).into()),
            (Generator::Nearest, _) => ep.nearest_payload(),
        };
        ep.step(payload, rng)?;
    }
    ep.finish()
}
