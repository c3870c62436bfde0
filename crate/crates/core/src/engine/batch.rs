use rand::SeedableRng;
use rayon::prelude::*;

use super::{run_episode, EngineError, EpisodeResult, Scenario, SchemeId};
use crate::dqn::Agent;
use crate::{Error, SimRng};

/// RNG of episode `e`: the base seed selects the key, the episode index the stream.
pub fn episode_rng(base_seed: u64, episode: usize) -> SimRng {
    let mut rng = SimRng::seed_from_u64(base_seed);
    rng.set_stream(episode as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mse: f64,
    pub transmissions: usize,
    pub decode_count: usize,
}

impl EpisodeStats {
    pub fn of(episode: usize, r: &EpisodeResult) -> Self {
        Self {
            episode,
            mse: r.mse,
            transmissions: r.transmissions,
            decode_count: r.decode_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub episodes: usize,
    pub mse_mean: f64,
    /// Sample standard deviation; 0 for a single episode.
    pub mse_std: f64,
    /// Copies sent per TTI.
    pub tx_mean: f64,
    /// Share of TTIs whose C&C decoded at least once.
    pub decode_rate: f64,
}

impl Summary {
    /// Aggregates in episode-index order, so any permutation of `stats` gives the same bits.
    pub fn from_stats(stats: &[EpisodeStats], n_tti: usize) -> Result<Self, EngineError> {
        if stats.is_empty() {
            return Err(EngineError::NoEpisodes);
        }
        let mut sorted = stats.to_vec();
        sorted.sort_by_key(|s| s.episode);
        let n = sorted.len() as f64;
        let mse_mean = sorted.iter().map(|s| s.mse).sum::<f64>() / n;
        let mse_std = if sorted.len() > 1 {
            (sorted.iter().map(|s| (s.mse - mse_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let per_tti = (n * n_tti as f64).max(1.0);
        Ok(Self {
            episodes: sorted.len(),
            mse_mean,
            mse_std,
            tx_mean: sorted.iter().map(|s| s.transmissions as f64).sum::<f64>() / per_tti,
            decode_rate: sorted.iter().map(|s| s.decode_count as f64).sum::<f64>() / per_tti,
        })
    }

    /// Standard error of the mean MSE.
    pub fn std_error(&self) -> f64 {
        self.mse_std / (self.episodes as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub scheme: SchemeId,
    pub stats: Vec<EpisodeStats>,
    pub summary: Summary,
}

/// `episodes` independent episodes on a pool of `threads` workers (0: rayon's default).
pub fn run_batch(
    scheme: SchemeId,
    scenario: &Scenario,
    agent: Option<&Agent>,
    episodes: usize,
    base_seed: u64,
    threads: usize,
) -> Result<BatchResult, Error> {
    if episodes == 0 {
        return Err(EngineError::NoEpisodes.into());
    }
    let one = |e: usize| -> Result<EpisodeStats, Error> {
        let r = run_episode(scheme, scenario, agent, &mut episode_rng(base_seed, e))?;
        Ok(EpisodeStats::of(e, &r))
    };
    let stats: Vec<EpisodeStats> = if threads == 1 {
        (0..episodes).map(one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| EngineError::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..episodes).into_par_iter().map(one).collect::<Result<_, _>>())?
    };
    let summary = Summary::from_stats(&stats, scenario.clock.n_tti)?;
    Ok(BatchResult { scheme, stats, summary })
}
