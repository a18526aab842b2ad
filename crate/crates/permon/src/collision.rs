//! Clearance deficits for agent pairs and agent-obstacle pairs, the
//! penalty integrands built from them, their parameter gradients, and the
//! zero-crossing events.

use crate::ipa::{Event, EventKind};
use crate::kinematics::Partials;
use crate::scenario::Scenario;
use crate::vec2::Vec2;

/// Clearance deficit between two agents: zero when safely separated,
/// negative in violation.
pub fn pair_deficit(s_p: Vec2, s_q: Vec2, rho_p: f64, rho_q: f64, margin: f64) -> f64 {
    (s_p.distance(s_q) - rho_p - rho_q - margin).min(0.0)
}

/// Clearance deficit between an obstacle and an agent.
pub fn obstacle_deficit(center: Vec2, s_n: Vec2, r_l: f64, rho_n: f64, margin: f64) -> f64 {
    (center.distance(s_n) - r_l - rho_n - margin).min(0.0)
}

/// Deficit values for every pair at one sample, with activity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearanceReport {
    /// One entry per unordered agent pair, ordered `(p, q)` with `p < q`.
    pub pair_deficits: Vec<f64>,
    /// One entry per `(obstacle, agent)` pair, obstacle-major.
    pub obstacle_deficits: Vec<f64>,
    pub min_pair_distance: f64,
    pub min_obstacle_distance: f64,
}

impl ClearanceReport {
    pub fn j2_instant(&self) -> f64 {
        self.pair_deficits.iter().sum()
    }

    pub fn j3_instant(&self) -> f64 {
        self.obstacle_deficits.iter().sum()
    }
}

/// Edge detector for deficit zero crossings across consecutive samples.
/// Owned by a single simulation pass.
#[derive(Debug, Clone)]
pub struct CollisionTracker {
    /// Raw clearances (distance minus threshold, unclamped) at the
    /// previous sample.
    prev_pair: Vec<f64>,
    prev_obstacle: Vec<f64>,
    prev_time: f64,
    primed: bool,
}

impl CollisionTracker {
    pub fn new(num_agents: usize, num_obstacles: usize) -> Self {
        let pairs = num_agents * num_agents.saturating_sub(1) / 2;
        CollisionTracker {
            prev_pair: vec![0.0; pairs],
            prev_obstacle: vec![0.0; num_obstacles * num_agents],
            prev_time: 0.0,
            primed: false,
        }
    }

    /// Evaluates all deficits at one sample and emits crossing events
    /// against the previous sample.
    pub fn evaluate(
        &mut self,
        positions: &[Vec2],
        scenario: &Scenario,
        t: f64,
        events: &mut Vec<Event>,
    ) -> ClearanceReport {
        let margin = scenario.penalties.margin;
        let n = positions.len();
        let mut pair_deficits = Vec::with_capacity(self.prev_pair.len());
        let mut min_pair = f64::INFINITY;
        let mut k = 0;
        for p in 0..n {
            for q in (p + 1)..n {
                let dist = positions[p].distance(positions[q]);
                min_pair = min_pair.min(dist);
                let raw = dist - scenario.agents[p].rho - scenario.agents[q].rho - margin;
                if self.primed {
                    self.emit_crossing(
                        self.prev_pair[k],
                        raw,
                        t,
                        EventKind::PairDeficitHitsZero { p, q },
                        EventKind::PairDeficitLeavesZero { p, q },
                        events,
                    );
                }
                self.prev_pair[k] = raw;
                pair_deficits.push(raw.min(0.0));
                k += 1;
            }
        }

        let mut obstacle_deficits = Vec::with_capacity(self.prev_obstacle.len());
        let mut min_obstacle = f64::INFINITY;
        let mut k = 0;
        for (l, ob) in scenario.obstacles.iter().enumerate() {
            let center = ob.center();
            for (a, pos) in positions.iter().enumerate() {
                let dist = center.distance(*pos);
                min_obstacle = min_obstacle.min(dist);
                let raw = dist - ob.r - scenario.agents[a].rho - margin;
                if self.primed {
                    self.emit_crossing(
                        self.prev_obstacle[k],
                        raw,
                        t,
                        EventKind::ObstacleDeficitHitsZero { obstacle: l, agent: a },
                        EventKind::ObstacleDeficitLeavesZero { obstacle: l, agent: a },
                        events,
                    );
                }
                self.prev_obstacle[k] = raw;
                obstacle_deficits.push(raw.min(0.0));
                k += 1;
            }
        }

        self.prev_time = t;
        self.primed = true;
        ClearanceReport {
            pair_deficits,
            obstacle_deficits,
            min_pair_distance: min_pair,
            min_obstacle_distance: min_obstacle,
        }
    }

    fn emit_crossing(
        &self,
        prev: f64,
        now: f64,
        t: f64,
        hits_zero: EventKind,
        leaves_zero: EventKind,
        events: &mut Vec<Event>,
    ) {
        let kind = if prev < 0.0 && now >= 0.0 {
            hits_zero
        } else if prev >= 0.0 && now < 0.0 {
            leaves_zero
        } else {
            return;
        };
        let span = t - self.prev_time;
        let frac = if (now - prev).abs() > 0.0 {
            (prev / (prev - now)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        events.push(Event {
            kind,
            time: self.prev_time + frac * span,
        });
    }
}

/// Gradient contributions of the active deficits, accumulated per agent
/// over that agent's own parameter block. Returns `(pair_blocks,
/// obstacle_blocks)` and counts coincident-point skips.
pub fn deficit_gradients(
    positions: &[Vec2],
    pos_partials: &[&Partials],
    report: &ClearanceReport,
    scenario: &Scenario,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, usize) {
    let n = positions.len();
    let mut pair_blocks: Vec<Vec<f64>> = pos_partials
        .iter()
        .map(|p| vec![0.0; p.param_count()])
        .collect();
    let mut obstacle_blocks = pair_blocks.clone();
    let mut coincident = 0;

    let mut k = 0;
    for p in 0..n {
        for q in (p + 1)..n {
            let deficit = report.pair_deficits[k];
            k += 1;
            if deficit >= 0.0 {
                continue;
            }
            let delta = positions[q] - positions[p];
            let dist = delta.norm();
            if dist == 0.0 {
                coincident += 1;
                continue;
            }
            let dir = delta * (1.0 / dist);
            accumulate_direction(&mut pair_blocks[p], dir, pos_partials[p]);
            accumulate_direction(&mut pair_blocks[q], -dir, pos_partials[q]);
        }
    }

    let mut k = 0;
    for ob in scenario.obstacles.iter() {
        let center = ob.center();
        for a in 0..n {
            let deficit = report.obstacle_deficits[k];
            k += 1;
            if deficit >= 0.0 {
                continue;
            }
            let delta = center - positions[a];
            let dist = delta.norm();
            if dist == 0.0 {
                coincident += 1;
                continue;
            }
            let dir = delta * (1.0 / dist);
            accumulate_direction(&mut obstacle_blocks[a], dir, pos_partials[a]);
        }
    }

    (pair_blocks, obstacle_blocks, coincident)
}

/// Adds `-(dir . ds/dtheta_j)` to each block entry: the derivative of the
/// distance to a partner in direction `dir` from this agent.
fn accumulate_direction(block: &mut [f64], dir: Vec2, partials: &Partials) {
    for j in 0..block.len() {
        block[j] -= dir.x * partials.x[j] + dir.y * partials.y[j];
    }
}
