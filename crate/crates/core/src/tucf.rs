//! Baseline control loop: periodic nearest-grid commands from the last
//! uplinked position, a single-slot arrival-ordered queue, and preemptive
//! execution with hovering once a command's execution time runs out.

use std::cmp::Ordering;

use crate::channel::Downlink;
use crate::engine::EpisodeResult;
use crate::kinematics::{MotionLog, Position, SimClock, TargetTrajectory, Velocity, VelocitySets};
use crate::{Error, SimRng};

/// One C&C datum `m_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CncRecord {
    /// 1-based TTI index `i`.
    pub index: usize,
    pub payload: Velocity,
    /// `t_{i-1}`.
    pub gen_time: f64,
    /// Earliest decode instant, if any repetition got through.
    pub arrival: Option<f64>,
}

impl CncRecord {
    pub fn new(index: usize, payload: Velocity, clock: &SimClock) -> Self {
        Self {
            index,
            payload,
            gen_time: clock.boundary(index - 1),
            arrival: None,
        }
    }

    pub fn arrived_at(mut self, t: f64) -> Self {
        self.arrival = Some(t);
        self
    }

    pub fn decoded(&self) -> bool {
        self.arrival.is_some()
    }
}

/// Grid velocity whose one-TTI move from `last_known` lands closest to `target_next`.
///
/// Ties go to the slower velocity, then to the lexicographically smaller one.
pub fn tucf_generate(
    last_known: Position,
    target_next: Position,
    clock: &SimClock,
    vel_sets: &VelocitySets,
) -> Velocity {
    nearest_grid_velocity(last_known, target_next, clock.tti_s, &vel_sets.grid())
}

pub(crate) fn nearest_grid_velocity(from: Position, to: Position, dt: f64, grid: &[Velocity]) -> Velocity {
    let mut best: Option<(f64, Velocity)> = None;
    for &v in grid {
        let miss = from.advanced(v, dt).distance_sq(to);
        let better = match best {
            None => true,
            Some((best_miss, best_v)) => {
                let tol = 1e-12 * best_miss.max(miss).max(1e-18);
                if (miss - best_miss).abs() <= tol {
                    match v.speed().total_cmp(&best_v.speed()) {
                        Ordering::Less => true,
                        Ordering::Equal => v.lex_cmp(&best_v).is_lt(),
                        Ordering::Greater => false,
                    }
                } else {
                    miss < best_miss
                }
            }
        };
        if better {
            best = Some((miss, v));
        }
    }
    best.map_or(Velocity::ZERO, |(_, v)| v)
}

/// Move along the log until `to`, honoring the active command's expiry.
fn fly(log: &mut MotionLog, active: &mut Option<(Velocity, f64)>, to: f64) {
    if let Some((v, expires)) = *active {
        if expires < to {
            log.extend_to(v, expires);
            *active = None;
            log.extend_to(Velocity::ZERO, to);
        } else {
            log.extend_to(v, to);
        }
    } else {
        log.extend_to(Velocity::ZERO, to);
    }
}

/// Run one baseline episode. The UAV starts at `g_0`.
pub fn tucf_episode<L: Downlink>(
    traj: &TargetTrajectory,
    clock: &SimClock,
    vel_sets: &VelocitySets,
    link: &mut L,
    rng: &mut SimRng,
) -> Result<EpisodeResult, Error> {
    clock.validate()?;
    let grid = vel_sets.grid();
    let mut log = MotionLog::new(traj.waypoint(0));
    // every decoded C&C with its arrival instant
    let mut received: Vec<CncRecord> = Vec::new();
    let mut active: Option<(Velocity, f64)> = None;
    let mut transmissions = 0;
    let mut latencies = vec![None; clock.n_tti];

    for i in 1..=clock.n_tti {
        let t_start = clock.boundary(i - 1);
        let t_end = clock.boundary(i);
        let last_known = log.end_position();
        let payload = nearest_grid_velocity(last_known, traj.waypoint(i), clock.tti_s, &grid);
        let cnc = CncRecord::new(i, payload, clock);

        let draw = link.transmit(last_known, rng)?;
        transmissions += 1;
        if let Some(delay) = draw.arrival_delay() {
            received.push(cnc.arrived_at(t_start + delay));
            latencies[i - 1] = Some(delay);
        }

        let mut window: Vec<CncRecord> = received
            .iter()
            .filter(|c| c.arrival.is_some_and(|a| a >= t_start && a < t_end))
            .copied()
            .collect();
        window.sort_by(|a, b| {
            a.arrival
                .unwrap()
                .total_cmp(&b.arrival.unwrap())
                .then(a.index.cmp(&b.index))
        });
        for c in window {
            let at = c.arrival.unwrap();
            fly(&mut log, &mut active, at);
            active = Some((c.payload, at + clock.tti_s));
        }
        fly(&mut log, &mut active, t_end);
    }

    EpisodeResult::assemble(log, traj, clock, transmissions, latencies)
}
