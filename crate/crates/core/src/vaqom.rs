//! Receiver-side queue ordering by semantic information: each queued C&C is
//! scored from its age and from how close it would bring the UAV to the
//! estimated target at the end of the current TTI.

use std::cmp::Ordering;

use thiserror::Error;

use crate::kinematics::{Position, SimClock, Velocity};
use crate::tucf::CncRecord;

/// Relative tolerance for snapping times onto TTI boundaries.
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("no estimate available: the queue is empty")]
    EmptyQueue,
    #[error("time {t} s is outside the episode [0, {horizon}) s")]
    OutsideHorizon { t: f64, horizon: f64 },
    #[error("no recorded UAV position for boundary {0}")]
    MissingHistory(usize),
}

/// Age of `cnc` at `now`.
pub fn aoi(cnc: &CncRecord, now: f64) -> f64 {
    now - cnc.gen_time
}

/// `floor(t / T) + 1`, with times within rounding error of a boundary snapped onto it.
pub fn execution_tti_index(now: f64, clock: &SimClock) -> Result<usize, QueueError> {
    let horizon = clock.horizon();
    let ticks = now / clock.tti_s;
    let nearest = ticks.round();
    let whole = if (ticks - nearest).abs() <= BOUNDARY_TOL {
        nearest
    } else {
        ticks.floor()
    };
    if whole < 0.0 || whole >= clock.n_tti as f64 {
        return Err(QueueError::OutsideHorizon { t: now, horizon });
    }
    Ok(whole as usize + 1)
}

/// An age strictly below one TTI, robust to boundary rounding.
pub fn is_fresh(aoi_s: f64, clock: &SimClock) -> bool {
    aoi_s < clock.tti_s * (1.0 - BOUNDARY_TOL)
}

/// Target estimate `p_{gen} + T m` from the freshest record (ties: lowest TTI index).
///
/// `history[k]` is the UAV's own position at boundary `t_k`.
pub fn estimate_target<'a>(
    records: impl IntoIterator<Item = &'a CncRecord>,
    history: &[Position],
    now: f64,
    clock: &SimClock,
) -> Result<Position, QueueError> {
    let freshest = records
        .into_iter()
        .min_by(|a, b| aoi(a, now).total_cmp(&aoi(b, now)).then(a.index.cmp(&b.index)))
        .ok_or(QueueError::EmptyQueue)?;
    let base = *history
        .get(freshest.index - 1)
        .ok_or(QueueError::MissingHistory(freshest.index - 1))?;
    Ok(base.advanced(freshest.payload, clock.tti_s))
}

/// Where executing `payload` from `now` would put the UAV at the end of the current TTI.
pub fn estimate_actual(payload: Velocity, current: Position, now: f64, clock: &SimClock) -> Result<Position, QueueError> {
    let i_e = execution_tti_index(now, clock)?;
    let remaining = (clock.boundary(i_e) - now).max(0.0);
    Ok(current.advanced(payload, remaining))
}

/// Negative estimated miss distance.
pub fn voi(actual_estimate: Position, target_estimate: Position) -> f64 {
    -actual_estimate.distance(target_estimate)
}

/// 1 for a fresh record, `e^VoI` otherwise (an age of exactly one TTI counts as stale).
pub fn semantic_info(aoi_s: f64, voi: f64, clock: &SimClock) -> f64 {
    if is_fresh(aoi_s, clock) {
        1.0
    } else {
        voi.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEntry {
    pub cnc: CncRecord,
    pub aoi_s: f64,
    pub voi: f64,
    pub si: f64,
}

impl QueueEntry {
    fn unscored(cnc: CncRecord) -> Self {
        Self {
            cnc,
            aoi_s: 0.0,
            voi: 0.0,
            si: 1.0,
        }
    }
}

/// How the queue ranks its entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ranking {
    /// Descending semantic information.
    #[default]
    Semantic,
    /// Most recent arrival first.
    Arrival,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticQueue {
    entries: Vec<QueueEntry>,
    q_max: usize,
    ranking: Ranking,
}

impl SemanticQueue {
    pub fn new(q_max: usize) -> Self {
        Self::with_ranking(q_max, Ranking::Semantic)
    }

    pub fn with_ranking(q_max: usize, ranking: Ranking) -> Self {
        assert!(q_max >= 1, "queue capacity must be positive");
        Self {
            entries: Vec::with_capacity(q_max + 1),
            q_max,
            ranking,
        }
    }

    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.q_max
    }

    pub fn head(&self) -> Option<&QueueEntry> {
        self.entries.first()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.entries.iter().any(|e| e.cnc.index == index)
    }

    /// Add a decoded record; duplicates of a TTI already queued are ignored.
    /// The caller reorders afterwards, which also enforces capacity.
    pub fn push(&mut self, cnc: CncRecord) -> bool {
        if self.contains(cnc.index) {
            return false;
        }
        self.entries.push(QueueEntry::unscored(cnc));
        true
    }

    /// Rescore every entry at `now`, sort, and drop the lowest-ranked overflow.
    pub fn reorder(
        &mut self,
        now: f64,
        current: Position,
        history: &[Position],
        clock: &SimClock,
    ) -> Result<(), QueueError> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let target = estimate_target(self.entries.iter().map(|e| &e.cnc), history, now, clock)?;
        for entry in &mut self.entries {
            let age = aoi(&entry.cnc, now);
            let value = voi(estimate_actual(entry.cnc.payload, current, now, clock)?, target);
            *entry = QueueEntry {
                cnc: entry.cnc,
                aoi_s: age,
                voi: value,
                si: semantic_info(age, value, clock),
            };
        }
        match self.ranking {
            Ranking::Semantic => self.entries.sort_by(rank_semantic),
            Ranking::Arrival => self.entries.sort_by(rank_arrival),
        }
        self.entries.truncate(self.q_max);
        Ok(())
    }
}

/// Descending SI, then smaller AoI, then smaller TTI index.
fn rank_semantic(a: &QueueEntry, b: &QueueEntry) -> Ordering {
    b.si
        .total_cmp(&a.si)
        .then(a.aoi_s.total_cmp(&b.aoi_s))
        .then(a.cnc.index.cmp(&b.cnc.index))
}

fn rank_arrival(a: &QueueEntry, b: &QueueEntry) -> Ordering {
    let arrival = |e: &QueueEntry| e.cnc.arrival.unwrap_or(f64::NEG_INFINITY);
    arrival(b)
        .total_cmp(&arrival(a))
        .then(b.cnc.index.cmp(&a.cnc.index))
}
