//! Proactive repetition of one TTI's C&C packet: up to `k_max` copies spaced
//! `t_rep` apart, with unsent copies suppressed once the ACK of an earlier
//! decoded copy is back at the BS.


use crate::channel::{ChannelDraw, Downlink};
use crate::kinematics::{Position, SimClock};
use crate::tucf::CncRecord;
use crate::{Error, SimRng};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RepetitionError {
    #[error("k_max must be at least 1")]
    ZeroRepetitions,
    #[error("t_rep must be positive, got {0} s")]
    NonPositiveSpacing(f64),
    #[error("repetitions span {span} s, which must stay below one TTI ({tti} s)")]
    SpansTti { span: f64, tti: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepetitionParams {
    pub k_max: u32,
    pub t_rep_s: f64,
}

impl Default for RepetitionParams {
    fn default() -> Self {
        Self {
            k_max: 3,
            t_rep_s: 5e-5,
        }
    }
}

impl RepetitionParams {
    pub fn new(k_max: u32, t_rep_s: f64, tti_s: f64) -> Result<Self, RepetitionError> {
        let params = Self { k_max, t_rep_s };
        params.validate(tti_s)?;
        Ok(params)
    }

    /// `(k_max - 1) * t_rep < T`.
    pub fn validate(&self, tti_s: f64) -> Result<(), RepetitionError> {
        if self.k_max == 0 {
            return Err(RepetitionError::ZeroRepetitions);
        }
        if !(self.t_rep_s > 0.0 && self.t_rep_s.is_finite()) {
            return Err(RepetitionError::NonPositiveSpacing(self.t_rep_s));
        }
        let span = f64::from(self.k_max - 1) * self.t_rep_s;
        if !(span < tti_s) {
            return Err(RepetitionError::SpansTti { span, tti: tti_s });
        }
        Ok(())
    }

    /// Send instant `t_{i,k}` of repetition `k` (1-based) after `gen_time`.
    pub fn send_time(&self, gen_time: f64, k: u32) -> f64 {
        gen_time + f64::from(k - 1) * self.t_rep_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionOutcome {
    pub draws: Vec<ChannelDraw>,
    pub earliest_arrival: Option<f64>,
    pub terminated_early: bool,
}

impl RepetitionOutcome {
    pub fn attempts_made(&self) -> usize {
        self.draws.len()
    }
}

/// The receiving side as seen from the transmitter during one TTI.
pub trait MotionContext {
    /// Let the UAV fly (and react to arrivals) up to `t`.
    fn advance_to(&mut self, t: f64) -> Result<(), Error>;

    /// UAV position at the current instant.
    fn position(&self) -> Position;

    /// `cnc` decodes at `cnc.arrival`. Called again with an earlier arrival
    /// when a later repetition overtakes a pending one.
    fn deliver(&mut self, cnc: CncRecord);
}

/// Send `cnc` once at its generation instant.
pub fn run_single_shot<L, M>(
    cnc: &CncRecord,
    link: &mut L,
    ctx: &mut M,
    rng: &mut SimRng,
) -> Result<RepetitionOutcome, Error>
where
    L: Downlink + ?Sized,
    M: MotionContext + ?Sized,
{
    ctx.advance_to(cnc.gen_time)?;
    let draw = link.transmit(ctx.position(), rng)?;
    let earliest_arrival = draw.arrival_delay().map(|d| cnc.gen_time + d);
    if let Some(at) = earliest_arrival {
        ctx.deliver(cnc.arrived_at(at));
    }
    Ok(RepetitionOutcome {
        draws: vec![draw],
        earliest_arrival,
        terminated_early: false,
    })
}

/// Proactive repetition of `cnc` within TTI `cnc.index`.
pub fn run_proactive<L, M>(
    cnc: &CncRecord,
    clock: &SimClock,
    link: &mut L,
    ctx: &mut M,
    params: &RepetitionParams,
    rng: &mut SimRng,
) -> Result<RepetitionOutcome, Error>
where
    L: Downlink + ?Sized,
    M: MotionContext + ?Sized,
{
    params.validate(clock.tti_s)?;
    debug_assert_eq!(cnc.gen_time, clock.boundary(cnc.index - 1));
    let mut draws = Vec::with_capacity(params.k_max as usize);
    let mut earliest: Option<f64> = None;
    let mut terminated_early = false;

    for k in 1..=params.k_max {
        let send_at = params.send_time(cnc.gen_time, k);
        // the ACK of the earliest decoded copy is back before this send
        if earliest.is_some_and(|a| a <= send_at) {
            terminated_early = true;
            break;
        }
        ctx.advance_to(send_at)?;
        let draw = link.transmit(ctx.position(), rng)?;
        draws.push(draw);
        if let Some(delay) = draw.arrival_delay() {
            let at = send_at + delay;
            if earliest.is_none_or(|e| at < e) {
                earliest = Some(at);
                ctx.deliver(cnc.arrived_at(at));
            }
        }
    }

    Ok(RepetitionOutcome {
        draws,
        earliest_arrival: earliest,
        terminated_early,
    })
}
