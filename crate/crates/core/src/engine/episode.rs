//! Event-driven state machine for one episode.

use super::{EngineError, EpisodeResult, Execution, Pipeline, Scenario, Transmission};
use crate::channel::Downlink;
use crate::dqn::AgentState;
use crate::kinematics::{MotionLog, Position, SimClock, Velocity};
use crate::repetition::{run_proactive, run_single_shot, MotionContext, RepetitionOutcome};
use crate::tucf::{nearest_grid_velocity, CncRecord};
use crate::vaqom::SemanticQueue;
use crate::{Error, SimRng};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Executing {
    index: usize,
    velocity: Velocity,
    expires: Option<f64>,
    expired: bool,
}

/// The UAV side: motion, queue and the packets still in flight.
#[derive(Debug)]
struct Receiver<'a> {
    clock: &'a SimClock,
    execution: Execution,
    log: MotionLog,
    /// `history[k]` is the position at boundary `t_k`.
    history: Vec<Position>,
    queue: SemanticQueue,
    executing: Option<Executing>,
    /// Decoded copies whose arrival instant is still ahead.
    in_flight: Vec<CncRecord>,
}

impl Receiver<'_> {
    fn velocity(&self) -> Velocity {
        match self.executing {
            Some(e) if !e.expired => e.velocity,
            _ => Velocity::ZERO,
        }
    }

    fn fly_to(&mut self, t: f64) {
        if let Some(e) = self.executing.as_mut() {
            if let Some(at) = e.expires {
                if !e.expired && at < t {
                    self.log.extend_to(e.velocity, at);
                    e.expired = true;
                }
            }
        }
        self.log.extend_to(self.velocity(), t);
    }

    /// Reorder at `now` and start executing the head if it changed.
    fn refresh(&mut self, now: f64) -> Result<(), Error> {
        self.queue
            .reorder(now, self.log.end_position(), &self.history, self.clock)?;
        if let Some(head) = self.queue.head() {
            if self.executing.is_none_or(|e| e.index != head.cnc.index) {
                self.executing = Some(Executing {
                    index: head.cnc.index,
                    velocity: head.cnc.payload,
                    expires: match self.execution {
                        Execution::TtiLimited => Some(now + self.clock.tti_s),
                        Execution::UntilReplaced => None,
                    },
                    expired: false,
                });
            }
        }
        Ok(())
    }

    fn next_arrival_before(&self, t: f64) -> Option<usize> {
        self.in_flight
            .iter()
            .enumerate()
            .filter(|(_, c)| c.arrival.is_some_and(|a| a < t))
            .min_by(|(_, a), (_, b)| {
                a.arrival
                    .unwrap()
                    .total_cmp(&b.arrival.unwrap())
                    .then(a.index.cmp(&b.index))
            })
            .map(|(k, _)| k)
    }
}

impl MotionContext for Receiver<'_> {
    fn advance_to(&mut self, t: f64) -> Result<(), Error> {
        while let Some(k) = self.next_arrival_before(t) {
            let cnc = self.in_flight.swap_remove(k);
            let at = cnc.arrival.unwrap();
            self.fly_to(at);
            self.queue.push(cnc);
            self.refresh(at)?;
        }
        self.fly_to(t);
        Ok(())
    }

    fn position(&self) -> Position {
        self.log.end_position()
    }

    fn deliver(&mut self, cnc: CncRecord) {
        match self.in_flight.iter_mut().find(|c| c.index == cnc.index) {
            Some(prev) => *prev = cnc,
            None => self.in_flight.push(cnc),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub tti: usize,
    /// `-||p_i - g_i||`.
    pub reward: f64,
    pub outcome: RepetitionOutcome,
}

/// One episode, advanced one TTI at a time by an external generator.
pub struct Episode<'a, L> {
    scenario: &'a Scenario,
    pipeline: Pipeline,
    link: L,
    rx: Receiver<'a>,
    next_tti: usize,
    transmissions: usize,
    latencies: Vec<Option<f64>>,
}

impl<'a, L: Downlink> Episode<'a, L> {
    pub fn new(scenario: &'a Scenario, pipeline: Pipeline, link: L) -> Self {
        let start = scenario.traj.waypoint(0);
        let clock = &scenario.clock;
        Self {
            scenario,
            pipeline,
            link,
            rx: Receiver {
                clock,
                execution: pipeline.queue.execution,
                log: MotionLog::new(start),
                history: {
                    let mut h = Vec::with_capacity(clock.n_tti + 1);
                    h.push(start);
                    h
                },
                queue: SemanticQueue::with_ranking(pipeline.queue.q_max, pipeline.queue.ranking),
                executing: None,
                in_flight: Vec::new(),
            },
            next_tti: 1,
            transmissions: 0,
            latencies: vec![None; clock.n_tti],
        }
    }

    pub fn is_done(&self) -> bool {
        self.next_tti > self.scenario.clock.n_tti
    }

    /// 1-based index of the TTI the next [`Self::step`] runs.
    pub fn next_tti(&self) -> usize {
        self.next_tti
    }

    /// Positions at the boundaries reached so far.
    pub fn history(&self) -> &[Position] {
        &self.rx.history
    }

    pub fn log(&self) -> &MotionLog {
        &self.rx.log
    }

    /// The BS's view before deciding the next TTI.
    pub fn state(&self) -> AgentState {
        let i = self.next_tti.min(self.scenario.clock.n_tti + 1);
        AgentState {
            position: self.rx.history[i - 1],
            t: self.scenario.clock.boundary(i - 1),
            goal: self.scenario.traj.waypoint(i.min(self.scenario.clock.n_tti)),
        }
    }

    /// Nearest-grid velocity toward the next waypoint.
    pub fn nearest_payload(&self) -> Velocity {
        let s = self.state();
        nearest_grid_velocity(s.position, s.goal, self.scenario.clock.tti_s, self.scenario.grid())
    }

    /// Generate, transmit and fly through the next TTI.
    pub fn step(&mut self, payload: Velocity, rng: &mut SimRng) -> Result<StepReport, Error> {
        if self.is_done() {
            return Err(EngineError::Finished.into());
        }
        let clock = &self.scenario.clock;
        let i = self.next_tti;
        let t_start = clock.boundary(i - 1);
        self.rx.refresh(t_start)?;
        let cnc = CncRecord::new(i, payload, clock);
        let outcome = match self.pipeline.transmission {
            Transmission::SingleShot => run_single_shot(&cnc, &mut self.link, &mut self.rx, rng)?,
            Transmission::Proactive(params) => {
                run_proactive(&cnc, clock, &mut self.link, &mut self.rx, &params, rng)?
            }
        };
        self.transmissions += outcome.attempts_made();
        self.latencies[i - 1] = outcome.earliest_arrival.map(|a| a - t_start);

        self.rx.advance_to(clock.boundary(i))?;
        let p = self.rx.log.end_position();
        self.rx.history.push(p);
        self.next_tti += 1;
        Ok(StepReport {
            tti: i,
            reward: -p.distance(self.scenario.traj.waypoint(i)),
            outcome,
        })
    }

    pub fn finish(self) -> Result<EpisodeResult, Error> {
        if !self.is_done() {
            return Err(EngineError::Invalid(format!("episode stopped before TTI {}", self.next_tti)).into());
        }
        EpisodeResult::assemble(
            self.rx.log,
            &self.scenario.traj,
            &self.scenario.clock,
            self.transmissions,
            self.latencies,
        )
    }
}
