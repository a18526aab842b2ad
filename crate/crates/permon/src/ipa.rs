//! Event-driven propagation of the uncertainty gradient state and assembly
//! of the objective gradient.
//!
//! The only gradient state with jumps in this problem is the per-target
//! uncertainty sensitivity: it resets to zero when the uncertainty hits
//! its floor and is continuous when it leaves it. All other events are
//! no-ops on the gradient state.

use crate::kinematics::{Partials, TrajectoryParams};
use crate::sensing::DetectionPartials;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

/// The event types that can occur during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A target's uncertainty hits zero.
    UncertaintyHitsZero { target: usize },
    /// A target's uncertainty leaves zero.
    UncertaintyLeavesZero { target: usize },
    /// An agent reaches its maximum velocity; acceleration control ends.
    MaxVelocityReached { agent: usize },
    /// An agent pair's clearance deficit returns to zero.
    PairDeficitHitsZero { p: usize, q: usize },
    /// An agent pair's clearance deficit becomes negative.
    PairDeficitLeavesZero { p: usize, q: usize },
    /// An obstacle clearance deficit returns to zero.
    ObstacleDeficitHitsZero { obstacle: usize, agent: usize },
    /// An obstacle clearance deficit becomes negative.
    ObstacleDeficitLeavesZero { obstacle: usize, agent: usize },
}

impl EventKind {
    /// Short wire name of the event kind.
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::UncertaintyHitsZero { .. } => "xi0",
            EventKind::UncertaintyLeavesZero { .. } => "xi+",
            EventKind::MaxVelocityReached { .. } => "u0",
            EventKind::PairDeficitHitsZero { .. } => "zeta0",
            EventKind::PairDeficitLeavesZero { .. } => "zeta-",
            EventKind::ObstacleDeficitHitsZero { .. } => "delta0",
            EventKind::ObstacleDeficitLeavesZero { .. } => "delta-",
        }
    }

    /// Tie-break rank for events at equal times (event-table row order).
    fn row(&self) -> u8 {
        match self {
            EventKind::UncertaintyHitsZero { .. } => 1,
            EventKind::UncertaintyLeavesZero { .. } => 2,
            EventKind::MaxVelocityReached { .. } => 3,
            EventKind::PairDeficitHitsZero { .. } => 4,
            EventKind::PairDeficitLeavesZero { .. } => 5,
            EventKind::ObstacleDeficitHitsZero { .. } => 6,
            EventKind::ObstacleDeficitLeavesZero { .. } => 7,
        }
    }

    fn indices(&self) -> (usize, usize) {
        match *self {
            EventKind::UncertaintyHitsZero { target } => (target, 0),
            EventKind::UncertaintyLeavesZero { target } => (target, 0),
            EventKind::MaxVelocityReached { agent } => (agent, 0),
            EventKind::PairDeficitHitsZero { p, q } => (p, q),
            EventKind::PairDeficitLeavesZero { p, q } => (p, q),
            EventKind::ObstacleDeficitHitsZero { obstacle, agent } => (obstacle, agent),
            EventKind::ObstacleDeficitLeavesZero { obstacle, agent } => (obstacle, agent),
        }
    }
}

/// A time-stamped event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
}

impl Event {
    /// Deterministic ordering: time, then event-table row, then indices.
    pub fn sort_key(&self) -> (f64, u8, usize, usize) {
        let (i, j) = self.kind.indices();
        (self.time, self.kind.row(), i, j)
    }
}

/// Sorts events of one step into their application order.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| a.sort_key().partial_cmp(&b.sort_key()).unwrap());
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("kind", self.kind.name())?;
        map.serialize_entry("time", &self.time)?;
        match self.kind {
            EventKind::UncertaintyHitsZero { target } | EventKind::UncertaintyLeavesZero { target } => {
                map.serialize_entry("indices", &serde_json::json!({ "target": target }))?
            }
            EventKind::MaxVelocityReached { agent } => {
                map.serialize_entry("indices", &serde_json::json!({ "agent": agent }))?
            }
            EventKind::PairDeficitHitsZero { p, q } | EventKind::PairDeficitLeavesZero { p, q } => {
                map.serialize_entry("indices", &serde_json::json!({ "p": p, "q": q }))?
            }
            EventKind::ObstacleDeficitHitsZero { obstacle, agent }
            | EventKind::ObstacleDeficitLeavesZero { obstacle, agent } => {
                map.serialize_entry("indices", &serde_json::json!({ "obstacle": obstacle, "agent": agent }))?
            }
        }
        map.end()
    }
}

/// Block layout of the stacked parameter vector across agents.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    offsets: Vec<usize>,
    total: usize,
}

impl ParamLayout {
    pub fn new(params: &[TrajectoryParams]) -> Self {
        let mut offsets = Vec::with_capacity(params.len());
        let mut total = 0;
        for p in params {
            offsets.push(total);
            total += p.param_count();
        }
        ParamLayout { offsets, total }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn offset(&self, agent: usize) -> usize {
        self.offsets[agent]
    }

    pub fn num_agents(&self) -> usize {
        self.offsets.len()
    }

    pub fn block_len(&self, agent: usize) -> usize {
        let end = if agent + 1 < self.offsets.len() {
            self.offsets[agent + 1]
        } else {
            self.total
        };
        end - self.offsets[agent]
    }
}

/// Gradient propagation state: per-target uncertainty sensitivities over
/// the stacked parameter vector plus the running objective-term
/// accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientState {
    layout: ParamLayout,
    /// One row per target, each of stacked length `P_total`.
    dr: Vec<Vec<f64>>,
    dj1: Vec<f64>,
    dj2: Vec<f64>,
    dj3: Vec<f64>,
}

/// Inputs to one propagation step for a single target.
pub struct TargetSensitivity<'a> {
    /// Per-agent joint-probability partials at this sample.
    pub partials: &'a [DetectionPartials],
    /// True when the target is pinned at the uncertainty floor (value zero
    /// and enough sensing pressure to hold it there).
    pub pinned: bool,
}

impl GradientState {
    pub fn new(num_targets: usize, params: &[TrajectoryParams]) -> Self {
        let layout = ParamLayout::new(params);
        let total = layout.total();
        GradientState {
            layout,
            dr: vec![vec![0.0; total]; num_targets],
            dj1: vec![0.0; total],
            dj2: vec![0.0; total],
            dj3: vec![0.0; total],
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn dr_row(&self, target: usize) -> &[f64] {
        &self.dr[target]
    }

    pub fn num_targets(&self) -> usize {
        self.dr.len()
    }
}

/// Advances every non-pinned target's uncertainty sensitivity by one
/// rectangle step of `d(dR)/dt = -B * grad P`, with the joint-probability
/// gradient assembled by the chain rule through each agent's kinematic
/// partials. Pinned targets hold at zero.
pub fn propagate_dr(
    state: &mut GradientState,
    targets: &[TargetSensitivity<'_>],
    kin_partials: &[(Partials, Partials)],
    decay: f64,
    dt: f64,
) {
    debug_assert_eq!(targets.len(), state.dr.len());
    let factor = -decay * dt;
    for (row, target) in state.dr.iter_mut().zip(targets) {
        if target.pinned {
            // Held exactly at zero while pinned.
            for v in row.iter_mut() {
                *v = 0.0;
            }
            continue;
        }
        for (n, dp) in target.partials.iter().enumerate() {
            if dp.is_zero() {
                continue;
            }
            let (ds, dv) = &kin_partials[n];
            let off = state.layout.offset(n);
            for j in 0..ds.param_count() {
                let grad_p = dp.dp_ds.x * ds.x[j]
                    + dp.dp_ds.y * ds.y[j]
                    + dp.dp_dv.x * dv.x[j]
                    + dp.dp_dv.y * dv.y[j];
                row[off + j] += factor * grad_p;
            }
        }
    }
}

/// Applies one event to the gradient state. Only the uncertainty floor
/// events touch it: hitting zero resets that target's row, leaving zero
/// keeps it (continuity). Everything else is a no-op.
pub fn apply_event(state: &mut GradientState, event: &Event) {
    if let EventKind::UncertaintyHitsZero { target } = event.kind {
        for v in state.dr[target].iter_mut() {
            *v = 0.0;
        }
    }
}

/// Accumulates one rectangle step of the three gradient integrals from the
/// current sensitivities and the active-deficit blocks.
pub fn accumulate(
    state: &mut GradientState,
    pair_blocks: &[Vec<f64>],
    obstacle_blocks: &[Vec<f64>],
    sigmas: &[f64],
    dt: f64,
) {
    for (row, sigma) in state.dr.iter().zip(sigmas) {
        let w = sigma * dt;
        for (acc, v) in state.dj1.iter_mut().zip(row) {
            *acc += w * v;
        }
    }
    for (n, block) in pair_blocks.iter().enumerate() {
        let off = state.layout.offset(n);
        for (j, v) in block.iter().enumerate() {
            state.dj2[off + j] += dt * v;
        }
    }
    for (n, block) in obstacle_blocks.iter().enumerate() {
        let off = state.layout.offset(n);
        for (j, v) in block.iter().enumerate() {
            state.dj3[off + j] += dt * v;
        }
    }
}

/// Assembles the full objective gradient from the accumulators:
/// `(dJ1 + M2*dJ2 + M3*dJ3) / T`.
pub fn assemble(state: &GradientState, horizon: f64, m2: f64, m3: f64) -> Vec<f64> {
    state
        .dj1
        .iter()
        .zip(&state.dj2)
        .zip(&state.dj3)
        .map(|((a, b), c)| (a + m2 * b + m3 * c) / horizon)
        .collect()
}
