//! UAV motion as a piecewise-constant-velocity log, target trajectories and
//! the time-sampled tracking error.

use std::fmt;
use std::ops::{Add, Sub};

use thiserror::Error;

/// Relative slack allowed when a query lands a rounding error outside a log.
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("time {t} s is outside the covered range [{start}, {end}] s")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("segment must start at the log end {expected} s, got {got} s")]
    Discontinuous { expected: f64, got: f64 },
    #[error("segment [{from}, {to}] s has non-positive duration")]
    EmptySegment { from: f64, to: f64 },
    #[error("motion log ends at {end} s but the horizon is {horizon} s")]
    IncompleteLog { end: f64, horizon: f64 },
    #[error("invalid clock: {0}")]
    InvalidClock(&'static str),
    #[error("trajectory needs at least two waypoints")]
    ShortTrajectory,
}

/// A point in the scene, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// A planned or executed velocity, meters per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

/// Difference between two positions, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Position after moving with `v` for `dt` seconds.
    pub fn advanced(self, v: Velocity, dt: f64) -> Self {
        Self {
            x: self.x + v.vx * dt,
            y: self.y + v.vy * dt,
            z: self.z + v.vz * dt,
        }
    }

    pub fn distance_sq(self, other: Position) -> f64 {
        (self - other).norm_sq()
    }

    pub fn distance(self, other: Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, other: Position, frac: f64) -> Self {
        Self {
            x: self.x + (other.x - self.x) * frac,
            y: self.y + (other.y - self.y) * frac,
            z: self.z + (other.z - self.z) * frac,
        }
    }
}

impl Sub for Position {
    type Output = Displacement;

    fn sub(self, rhs: Position) -> Displacement {
        Displacement {
            dx: self.x - rhs.x,
            dy: self.y - rhs.y,
            dz: self.z - rhs.z,
        }
    }
}

impl Add<Displacement> for Position {
    type Output = Position;

    fn add(self, d: Displacement) -> Position {
        Position::new(self.x + d.dx, self.y + d.dy, self.z + d.dz)
    }
}

impl Displacement {
    pub fn norm_sq(self) -> f64 {
        self.dx * self.dx + self.dy * self.dy + self.dz * self.dz
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl Velocity {
    pub const ZERO: Velocity = Velocity::new(0.0, 0.0, 0.0);

    pub const fn new(vx: f64, vy: f64, vz: f64) -> Self {
        Self { vx, vy, vz }
    }

    pub fn speed(self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + self.vz * self.vz).sqrt()
    }

    pub fn is_zero(self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.vz == 0.0
    }

    /// Lexicographic comparison on (vx, vy, vz).
    pub fn lex_cmp(&self, other: &Velocity) -> std::cmp::Ordering {
        self.vx
            .total_cmp(&other.vx)
            .then(self.vy.total_cmp(&other.vy))
            .then(self.vz.total_cmp(&other.vz))
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.vx, self.vy, self.vz)
    }
}

/// Per-axis admissible velocity components.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySets {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl VelocitySets {
    /// `{-5000, -4000, ..., 5000}` on x and y, `{0}` on z.
    pub fn planar_default() -> Self {
        let axis: Vec<f64> = (-5..=5).map(|k| f64::from(k) * 1000.0).collect();
        Self {
            x: axis.clone(),
            y: axis,
            z: vec![0.0],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty() || self.y.is_empty() || self.z.is_empty()
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.y.len() * self.z.len()
    }

    /// Every grid velocity, ordered lexicographically by (vx, vy, vz).
    pub fn grid(&self) -> Vec<Velocity> {
        let mut xs = self.x.clone();
        let mut ys = self.y.clone();
        let mut zs = self.z.clone();
        for axis in [&mut xs, &mut ys, &mut zs] {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &vx in &xs {
            for &vy in &ys {
                for &vz in &zs {
                    out.push(Velocity::new(vx, vy, vz));
                }
            }
        }
        out
    }

    pub fn contains(&self, v: Velocity) -> bool {
        self.x.contains(&v.vx) && self.y.contains(&v.vy) && self.z.contains(&v.vz)
    }

    /// Largest absolute component on any axis.
    pub fn max_abs(&self) -> f64 {
        self.x
            .iter()
            .chain(&self.y)
            .chain(&self.z)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// TTI duration, TTI count and error-sampling density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub tti_s: f64,
    pub n_tti: usize,
    pub n_m: usize,
}

impl SimClock {
    pub fn new(tti_s: f64, n_tti: usize, n_m: usize) -> Result<Self, KinematicsError> {
        let clock = Self { tti_s, n_tti, n_m };
        clock.validate()?;
        Ok(clock)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.tti_s > 0.0 && self.tti_s.is_finite()) {
            return Err(KinematicsError::InvalidClock("TTI duration must be positive"));
        }
        if self.n_tti == 0 {
            return Err(KinematicsError::InvalidClock("TTI count must be at least 1"));
        }
        if self.n_m == 0 {
            return Err(KinematicsError::InvalidClock("samples per TTI must be at least 1"));
        }
        Ok(())
    }

    /// Boundary `t_k = k * T`; `t_{i-1}` is the start of TTI `i`.
    pub fn boundary(&self, k: usize) -> f64 {
        k as f64 * self.tti_s
    }

    pub fn horizon(&self) -> f64 {
        self.boundary(self.n_tti)
    }

    /// Sample instant `(i - 1 + j / N_M) T` for TTI `i` (1-based) and `j` in `1..=N_M`.
    pub fn sample_time(&self, i: usize, j: usize) -> f64 {
        let ticks = ((i - 1) * self.n_m + j) as f64;
        ticks / self.n_m as f64 * self.tti_s
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self {
            tti_s: 1e-3,
            n_tti: 99,
            n_m: 9,
        }
    }
}

/// One constant-velocity piece of the motion log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub start: Position,
    pub velocity: Velocity,
}

impl Segment {
    pub fn position_at(&self, t: f64) -> Position {
        self.start.advanced(self.velocity, t - self.t_start)
    }

    pub fn end_position(&self) -> Position {
        self.position_at(self.t_end)
    }
}

/// Contiguous, single-writer record of where the UAV was.
///
/// Adjacent segments with identical velocity are merged, so two runs that
/// issue the same velocities produce identical logs regardless of how many
/// no-op controller updates happened in between.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionLog {
    origin: Position,
    t0: f64,
    segments: Vec<Segment>,
}

impl MotionLog {
    pub fn new(origin: Position) -> Self {
        Self::starting_at(origin, 0.0)
    }

    pub fn starting_at(origin: Position, t0: f64) -> Self {
        Self {
            origin,
            t0,
            segments: Vec::new(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(self.t0, |s| s.t_end)
    }

    pub fn end_position(&self) -> Position {
        self.segments
            .last()
            .map_or(self.origin, Segment::end_position)
    }

    /// Extend the log with `velocity` over `[from_t, to_t]`.
    pub fn append(&mut self, velocity: Velocity, from_t: f64, to_t: f64) -> Result<(), KinematicsError> {
        let end = self.end_time();
        if from_t != end {
            return Err(KinematicsError::Discontinuous {
                expected: end,
                got: from_t,
            });
        }
        if !(to_t > from_t) {
            return Err(KinematicsError::EmptySegment { from: from_t, to: to_t });
        }
        match self.segments.last_mut() {
            Some(last) if last.velocity == velocity => last.t_end = to_t,
            _ => {
                let start = self.end_position();
                self.segments.push(Segment {
                    t_start: from_t,
                    t_end: to_t,
                    start,
                    velocity,
                });
            }
        }
        Ok(())
    }

    /// Extend from the current end to `to_t`; a no-op when `to_t` is not later.
    pub fn extend_to(&mut self, velocity: Velocity, to_t: f64) {
        let end = self.end_time();
        if to_t > end {
            // cannot fail: contiguous and non-empty by construction
            let _ = self.append(velocity, end, to_t);
        }
    }

    pub fn position_at(&self, t: f64) -> Result<Position, KinematicsError> {
        let end = self.end_time();
        let slack = TIME_SLACK * end.abs().max(1.0);
        if !(t >= self.t0 - slack && t <= end + slack) {
            return Err(KinematicsError::OutOfRange {
                t,
                start: self.t0,
                end,
            });
        }
        if self.segments.is_empty() {
            return Ok(self.origin);
        }
        let idx = self.segments.partition_point(|s| s.t_end < t);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        Ok(seg.position_at(t.clamp(seg.t_start, seg.t_end)))
    }

    pub fn velocities(&self) -> impl Iterator<Item = Velocity> + '_ {
        self.segments.iter().map(|s| s.velocity)
    }
}

/// Waypoints `g_0 .. g_N` on TTI boundaries, linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTrajectory {
    waypoints: Vec<Position>,
    tti_s: f64,
}

impl TargetTrajectory {
    pub fn new(waypoints: Vec<Position>, tti_s: f64) -> Result<Self, KinematicsError> {
        if waypoints.len() < 2 {
            return Err(KinematicsError::ShortTrajectory);
        }
        if !(tti_s > 0.0) {
            return Err(KinematicsError::InvalidClock("TTI duration must be positive"));
        }
        Ok(Self { waypoints, tti_s })
    }

    pub fn waypoints(&self) -> &[Position] {
        &self.waypoints
    }

    /// `g_k`.
    pub fn waypoint(&self, k: usize) -> Position {
        self.waypoints[k]
    }

    pub fn n_tti(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn tti_s(&self) -> f64 {
        self.tti_s
    }

    pub fn end_time(&self) -> f64 {
        self.n_tti() as f64 * self.tti_s
    }

    /// Largest per-axis step between consecutive waypoints, meters.
    pub fn max_axis_step(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                d.dx.abs().max(d.dy.abs()).max(d.dz.abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn target_at(&self, t: f64) -> Result<Position, KinematicsError> {
        let end = self.end_time();
        let slack = TIME_SLACK * end.max(1.0);
        if !(t >= -slack && t <= end + slack) {
            return Err(KinematicsError::OutOfRange { t, start: 0.0, end });
        }
        let ticks = (t / self.tti_s).max(0.0);
        let nearest = ticks.round();
        if (ticks - nearest).abs() <= 1e-9 {
            let k = (nearest as usize).min(self.n_tti());
            return Ok(self.waypoints[k]);
        }
        let k = (ticks.floor() as usize).min(self.n_tti() - 1);
        let frac = ticks - k as f64;
        Ok(self.waypoints[k].lerp(self.waypoints[k + 1], frac))
    }
}

/// One point of the tracking-error grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub tti: usize,
    pub j: usize,
    pub t: f64,
    pub actual: Position,
    pub target: Position,
    pub error: f64,
}

/// Actual vs target positions on the `(i - 1 + j / N_M) T` grid.
pub fn error_samples(
    log: &MotionLog,
    traj: &TargetTrajectory,
    clock: &SimClock,
) -> Result<Vec<ErrorSample>, KinematicsError> {
    let horizon = clock.horizon();
    if log.end_time() < horizon * (1.0 - TIME_SLACK) {
        return Err(KinematicsError::IncompleteLog {
            end: log.end_time(),
            horizon,
        });
    }
    let mut out = Vec::with_capacity(clock.n_tti * clock.n_m);
    for i in 1..=clock.n_tti {
        for j in 1..=clock.n_m {
            let t = clock.sample_time(i, j);
            let actual = log.position_at(t)?;
            let target = traj.target_at(t)?;
            out.push(ErrorSample {
                tti: i,
                j,
                t,
                actual,
                target,
                error: actual.distance(target),
            });
        }
    }
    Ok(out)
}

/// Mean squared Euclidean tracking error over the sampling grid, m^2.
pub fn mse(log: &MotionLog, traj: &TargetTrajectory, clock: &SimClock) -> Result<f64, KinematicsError> {
    Ok(mse_of(&error_samples(log, traj, clock)?))
}

pub(crate) fn mse_of(samples: &[ErrorSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .map(|s| s.actual.distance_sq(s.target))
        .sum();
    total / samples.len() as f64
}
