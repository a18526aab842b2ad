//! Detection probability model and its derivatives.
//!
//! An agent senses a target with probability that decays linearly in both
//! its distance to the target and its own speed, vanishing outside the
//! sensing range or above the speed threshold. A distance-only variant
//! (no speed factor) is available for model-comparison sweeps.

use crate::scenario::AgentSpec;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Which sensing model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SensingModel {
    /// Distance- and speed-dependent detection (the default).
    Velocity,
    /// Detection depends on distance only.
    #[clap(name = "distance-only")]
    DistanceOnly,
}

impl std::fmt::Display for SensingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SensingModel::Velocity => write!(f, "velocity"),
            SensingModel::DistanceOnly => write!(f, "distance-only"),
        }
    }
}

/// Partial derivatives of the joint detection probability with respect to
/// one agent's position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectionPartials {
    pub dp_ds: Vec2,
    pub dp_dv: Vec2,
}

impl DetectionPartials {
    pub fn is_zero(&self) -> bool {
        self.dp_ds == Vec2::ZERO && self.dp_dv == Vec2::ZERO
    }
}

/// Probability that one agent detects an event at `target`.
pub fn detection_prob(
    pos: Vec2,
    vel: Vec2,
    target: Vec2,
    spec: &AgentSpec,
    model: SensingModel,
) -> f64 {
    let d_sq = (pos - target).norm_sq();
    if d_sq > spec.r_sense * spec.r_sense {
        return 0.0;
    }
    let range_factor = 1.0 - d_sq.sqrt() / spec.r_sense;
    match model {
        SensingModel::DistanceOnly => range_factor,
        SensingModel::Velocity => {
            let v = vel.norm();
            if v > spec.beta {
                0.0
            } else {
                range_factor * (1.0 - v / spec.beta)
            }
        }
    }
}

/// Probability that at least one agent detects the event:
/// `1 - prod(1 - p_n)`.
pub fn joint_detection(probs: &[f64]) -> f64 {
    1.0 - probs.iter().map(|p| 1.0 - p).product::<f64>()
}

/// Per-agent gradients of the joint detection probability. `states` holds
/// each agent's `(position, velocity)`; `probs` must be the matching
/// single-agent probabilities.
///
/// On the boundary of the sensing support the one-sided interior value is
/// used; at the singular points `D = 0` and `|v| = 0` the corresponding
/// partial is the zero vector.
pub fn detection_partials(
    states: &[(Vec2, Vec2)],
    probs: &[f64],
    target: Vec2,
    specs: &[AgentSpec],
    model: SensingModel,
) -> Vec<DetectionPartials> {
    let mut out = vec![DetectionPartials::default(); states.len()];
    detection_partials_into(&mut out, states, probs, target, specs, model);
    out
}

/// Allocation-free form of [`detection_partials`] for tight loops.
pub fn detection_partials_into(
    out: &mut [DetectionPartials],
    states: &[(Vec2, Vec2)],
    probs: &[f64],
    target: Vec2,
    specs: &[AgentSpec],
    model: SensingModel,
) {
    debug_assert_eq!(states.len(), probs.len());
    debug_assert_eq!(states.len(), out.len());
    out.fill(DetectionPartials::default());
    for (n, ((pos, vel), spec)) in states.iter().zip(specs).enumerate() {
        let d = pos.distance(target);
        if d > spec.r_sense {
            continue;
        }
        let v = vel.norm();
        if model == SensingModel::Velocity && v > spec.beta {
            continue;
        }
        let others: f64 = probs
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != n)
            .map(|(_, p)| 1.0 - p)
            .product();

        let range_factor = 1.0 - d / spec.r_sense;
        let speed_factor = match model {
            SensingModel::Velocity => 1.0 - v / spec.beta,
            SensingModel::DistanceOnly => 1.0,
        };
        let dp_ds = if d > 0.0 {
            (*pos - target) * (-speed_factor / (spec.r_sense * d))
        } else {
            Vec2::ZERO
        };
        let dp_dv = match model {
            SensingModel::Velocity if v > 0.0 => *vel * (-range_factor / (spec.beta * v)),
            _ => Vec2::ZERO,
        };
        out[n] = DetectionPartials {
            dp_ds: dp_ds * others,
            dp_dv: dp_dv * others,
        };
    }
}
