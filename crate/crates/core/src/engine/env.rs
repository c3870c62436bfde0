use super::{episode_rng, EngineError, Episode, Pipeline, Scenario, ScenarioLink, SchemeId};
use crate::dqn::{train, ActionSpace, Agent, AgentState, CurvePoint, Environment, FeatureMap, StepOutcome, TrainerConfig};
use crate::{Error, SimRng};

/// Training environment running a scheme's full transmission and queue path.
pub struct SchemeEnv<'a> {
    scenario: &'a Scenario,
    pipeline: Pipeline,
    actions: ActionSpace,
    seed: u64,
    episode: Option<Episode<'a, ScenarioLink>>,
    rng: SimRng,
}

impl<'a> SchemeEnv<'a> {
    /// Episode `e` draws its channel from [`episode_rng`]`(seed, e)`.
    pub fn new(scheme: SchemeId, scenario: &'a Scenario, seed: u64) -> Result<Self, EngineError> {
        if !scheme.uses_agent() {
            return Err(EngineError::UnexpectedAgent(scheme));
        }
        Ok(Self::with_pipeline(scenario.pipeline(scheme), scenario, seed))
    }

    pub fn with_pipeline(pipeline: Pipeline, scenario: &'a Scenario, seed: u64) -> Self {
        Self {
            scenario,
            pipeline,
            actions: scenario.action_space(),
            seed,
            episode: None,
            rng: episode_rng(seed, 0),
        }
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }
}

impl Environment for SchemeEnv<'_> {
    fn reset(&mut self, episode: usize) -> Result<AgentState, Error> {
        self.rng = episode_rng(self.seed, episode);
        let ep = Episode::new(self.scenario, self.pipeline, self.scenario.make_link());
        let s = ep.state();
        self.episode = Some(ep);
        Ok(s)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, Error> {
        let ep = self.episode.as_mut().ok_or(EngineError::Finished)?;
        let report = ep.step(self.actions.velocity(action), &mut self.rng)?;
        Ok(StepOutcome {
            reward: report.reward,
            next: ep.state(),
            done: ep.is_done(),
        })
    }
}

/// Train an agent in `scheme`'s environment; training episodes use seeds disjoint from evaluation via `cfg.seed`.
pub fn train_agent(
    scheme: SchemeId,
    scenario: &Scenario,
    cfg: &TrainerConfig,
) -> Result<(Agent, Vec<CurvePoint>), Error> {
    let mut env = SchemeEnv::new(scheme, scenario, cfg.seed)?;
    train_in(&mut env, scenario, cfg)
}

pub(crate) fn train_in(
    env: &mut SchemeEnv<'_>,
    scenario: &Scenario,
    cfg: &TrainerConfig,
) -> Result<(Agent, Vec<CurvePoint>), Error> {
    let features = FeatureMap::new(cfg.scene_scale_m, &scenario.clock, &scenario.vel_sets, cfg.goal_offset);
    // the trainer's own randomness (init, exploration, replay) lives on a separate stream
    let mut rng = episode_rng(cfg.seed, usize::MAX);
    let actions = env.actions().clone();
    let out = train(env, cfg, features, actions.len(), &mut rng)?;
    Ok((Agent::new(out.net, features, actions)?, out.curve))
}
