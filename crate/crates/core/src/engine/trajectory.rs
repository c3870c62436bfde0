use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::EngineError;
use crate::kinematics::{Position, SimClock, TargetTrajectory, Velocity, VelocitySets};
use crate::{Error, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// Square loop of 25-TTI legs at 3 m per TTI.
    WaypointDemo,
    /// Grid steps that repeat the previous one with probability `persistence`,
    /// otherwise drawn uniformly among those staying inside the flight disk.
    RandomWalk,
    /// Every waypoint equals the start.
    Stationary,
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrajectoryKind::WaypointDemo => "waypoint-demo",
            TrajectoryKind::RandomWalk => "random-walk",
            TrajectoryKind::Stationary => "stationary",
        })
    }
}

impl FromStr for TrajectoryKind {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "waypoint-demo" => Ok(TrajectoryKind::WaypointDemo),
            "random-walk" => Ok(TrajectoryKind::RandomWalk),
            "stationary" => Ok(TrajectoryKind::Stationary),
            _ => Err(EngineError::UnknownTrajectory(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub start: Position,
    /// Horizontal centre of the flight disk.
    pub disk_center: (f64, f64),
    pub disk_radius_m: f64,
    /// Probability that a random-walk step repeats the previous one.
    pub persistence: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            start: Position::new(80.0, 80.0, 20.0),
            disk_center: (0.0, 0.0),
            disk_radius_m: 250.0,
            persistence: 0.95,
        }
    }
}

impl TrajectoryOptions {
    fn inside(&self, p: Position) -> bool {
        let (cx, cy) = self.disk_center;
        (p.x - cx).hypot(p.y - cy) <= self.disk_radius_m
    }
}

const DEMO_LEG_TTIS: usize = 25;
const DEMO_SPEED: f64 = 3000.0;

pub fn make_trajectory(
    kind: TrajectoryKind,
    clock: &SimClock,
    vel_sets: &VelocitySets,
    opts: &TrajectoryOptions,
    rng: Option<&mut SimRng>,
) -> Result<TargetTrajectory, Error> {
    clock.validate()?;
    let dt = clock.tti_s;
    let mut points = Vec::with_capacity(clock.n_tti + 1);
    points.push(opts.start);
    match kind {
        TrajectoryKind::Stationary => points.resize(clock.n_tti + 1, opts.start),
        TrajectoryKind::WaypointDemo => {
            let legs = [
                Velocity::new(DEMO_SPEED, 0.0, 0.0),
                Velocity::new(0.0, DEMO_SPEED, 0.0),
                Velocity::new(-DEMO_SPEED, 0.0, 0.0),
                Velocity::new(0.0, -DEMO_SPEED, 0.0),
            ];
            if !legs.iter().all(|&v| vel_sets.contains(v)) {
                return Err(EngineError::Invalid("waypoint-demo needs +-3000 on the x and y velocity sets".into()).into());
            }
            for k in 0..clock.n_tti {
                let v = legs[(k / DEMO_LEG_TTIS) % legs.len()];
                points.push(points[k].advanced(v, dt));
            }
        }
        TrajectoryKind::RandomWalk => {
            let rng = rng.ok_or_else(|| EngineError::Invalid("random-walk needs an RNG".into()))?;
            if !(0.0..=1.0).contains(&opts.persistence) {
                return Err(EngineError::Invalid("persistence must lie in [0, 1]".into()).into());
            }
            if !opts.inside(opts.start) {
                return Err(EngineError::Invalid("start lies outside the flight disk".into()).into());
            }
            let grid = vel_sets.grid();
            let mut prev: Option<Velocity> = None;
            for k in 0..clock.n_tti {
                let here = points[k];
                let keep = prev.filter(|&v| rng.random::<f64>() < opts.persistence && opts.inside(here.advanced(v, dt)));
                let v = match keep {
                    Some(v) => v,
                    None => {
                        let admissible: Vec<Velocity> =
                            grid.iter().copied().filter(|&v| opts.inside(here.advanced(v, dt))).collect();
                        admissible[rng.random_range(0..admissible.len())]
                    }
                };
                prev = Some(v);
                points.push(here.advanced(v, dt));
            }
        }
    }
    Ok(TargetTrajectory::new(points, dt)?)
}
