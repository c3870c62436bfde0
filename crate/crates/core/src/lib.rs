//! Simulator of goal-oriented C&C delivery to a UAV: air-to-ground channel,
//! baseline and learned command generation, proactive repetition, and
//! semantic queue ordering at the receiver.

pub mod channel;
pub mod config;
pub mod dqn;
pub mod engine;
pub mod kinematics;
pub mod report;
pub mod repetition;
pub mod tucf;
pub mod vaqom;

use thiserror::Error;

/// Every random draw in the crate comes from this generator.
pub type SimRng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Kinematics(#[from] kinematics::KinematicsError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Repetition(#[from] repetition::RepetitionError),
    #[error(transparent)]
    Queue(#[from] vaqom::QueueError),
    #[error(transparent)]
    Dqn(#[from] dqn::DqnError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
