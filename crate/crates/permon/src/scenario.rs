//! Monitoring scenario definitions: mission space, targets, obstacles,
//! agent limits, penalty constants, and the time horizon.
//!
//! Scenarios load from a JSON document (see [`load_scenario`]) and are
//! immutable after construction, so they can be shared freely across
//! concurrent runs. Two built-in scenarios ([`builtin_case_a`],
//! [`builtin_case_b`]) cover the standard one- and two-agent setups.

use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};

/// Rectangular mission space `[0, L1] x [0, L2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionSpace {
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
}

/// A stationary target point with its uncertainty model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub x: f64,
    pub y: f64,
    /// Importance weight of this target in the objective.
    pub sigma: f64,
    /// Uncertainty growth rate while unobserved.
    #[serde(rename = "A")]
    pub growth: f64,
    /// Initial uncertainty value.
    #[serde(rename = "R0")]
    pub r0: f64,
}

impl Target {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// A circular obstacle (circumscribed circle of the real shape).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Obstacle {
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Physical limits and sensing characteristics of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// Maximum acceleration magnitude.
    pub u_max: f64,
    /// Maximum speed.
    pub v_max: f64,
    /// Sensing range; detection probability is zero beyond it.
    pub r_sense: f64,
    /// Speed threshold above which sensing is ineffective. Must exceed `v_max`.
    pub beta: f64,
    /// Safety disk radius used in collision deficits.
    pub rho: f64,
}

/// Penalty constants of the objective. `m2`/`m3` multiply the (non-positive)
/// collision deficit integrals, so they must be negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "M3")]
    pub m3: f64,
    /// Extra safety distance added to every clearance threshold.
    #[serde(default)]
    pub margin: f64,
}

/// Time horizon and integration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    0.01
}

/// A complete monitoring scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub space: MissionSpace,
    pub targets: Vec<Target>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub agents: Vec<AgentSpec>,
    pub penalties: PenaltyConfig,
    pub horizon: Horizon,
    /// Uncertainty decay rate under full observation. Must exceed every
    /// target's growth rate for the dynamics to be stabilizable.
    #[serde(rename = "B")]
    pub decay: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario validation error: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_obstacles(&self) -> usize {
        self.obstacles.len()
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |msg: String| Err(ScenarioError::Invalid(msg));
        if !(self.space.l1 > 0.0) {
            return err(format!("L1 must be positive (L1={})", self.space.l1));
        }
        if !(self.space.l2 > 0.0) {
            return err(format!("L2 must be positive (L2={})", self.space.l2));
        }
        if self.agents.is_empty() {
            return err("at least one agent is required".into());
        }
        for (i, tg) in self.targets.iter().enumerate() {
            if !(tg.sigma > 0.0) {
                return err(format!("target {i}: sigma must be positive (sigma={})", tg.sigma));
            }
            if !(tg.growth > 0.0) {
                return err(format!("target {i}: A must be positive (A={})", tg.growth));
            }
            if !(tg.r0 >= 0.0) {
                return err(format!("target {i}: R0 must be non-negative (R0={})", tg.r0));
            }
        }
        for (l, ob) in self.obstacles.iter().enumerate() {
            if !(ob.r > 0.0) {
                return err(format!("obstacle {l}: radius must be positive (r={})", ob.r));
            }
        }
        for (n, ag) in self.agents.iter().enumerate() {
            if !(ag.u_max > 0.0) {
                return err(format!("agent {n}: u_max must be positive (u_max={})", ag.u_max));
            }
            if !(ag.v_max > 0.0) {
                return err(format!("agent {n}: v_max must be positive (v_max={})", ag.v_max));
            }
            if !(ag.beta > ag.v_max) {
                return err(format!(
                    "agent {n}: beta must exceed v_max (beta={}, v_max={})",
                    ag.beta, ag.v_max
                ));
            }
            if !(ag.r_sense > 0.0) {
                return err(format!("agent {n}: r_sense must be positive (r_sense={})", ag.r_sense));
            }
            if !(ag.rho > 0.0) {
                return err(format!("agent {n}: rho must be positive (rho={})", ag.rho));
            }
        }
        if !(self.penalties.m2 < 0.0) {
            return err(format!("M2 must be negative (M2={})", self.penalties.m2));
        }
        if !(self.penalties.m3 < 0.0) {
            return err(format!("M3 must be negative (M3={})", self.penalties.m3));
        }
        if !(self.penalties.margin >= 0.0) {
            return err(format!("margin must be non-negative (margin={})", self.penalties.margin));
        }
        let max_growth = self.targets.iter().map(|t| t.growth).fold(0.0, f64::max);
        if !(self.decay > max_growth) {
            return err(format!(
                "B must exceed all A_i (B={}, max A_i={})",
                self.decay, max_growth
            ));
        }
        if !(self.horizon.t > 0.0) {
            return err(format!("T must be positive (T={})", self.horizon.t));
        }
        if !(self.horizon.dt > 0.0) {
            return err(format!("dt must be positive (dt={})", self.horizon.dt));
        }
        if self.horizon.t / self.horizon.dt < 100.0 {
            return err(format!(
                "dt too coarse: T/dt must be at least 100 (T={}, dt={})",
                self.horizon.t, self.horizon.dt
            ));
        }
        Ok(())
    }
}

/// Parses and validates a scenario document (JSON). Unknown keys are an error.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.validate()?;
    Ok(scenario)
}

fn grid_targets() -> Vec<Target> {
    let mut targets = Vec::with_capacity(66);
    for x in 0..=10 {
        for y in 0..=5 {
            targets.push(Target {
                x: x as f64,
                y: y as f64,
                sigma: 1.0,
                growth: 1.0,
                r0: 0.0,
            });
        }
    }
    targets
}

fn standard_agent() -> AgentSpec {
    AgentSpec {
        u_max: 1.0,
        v_max: 1.5,
        r_sense: 2.0,
        beta: 5.0,
        rho: 0.2,
    }
}

/// Case A: one agent, 66 grid targets of equal weight, two unit obstacles,
/// 40 s horizon.
pub fn builtin_case_a() -> Scenario {
    let scenario = Scenario {
        space: MissionSpace { l1: 10.0, l2: 5.0 },
        targets: grid_targets(),
        obstacles: vec![
            Obstacle { x: 3.0, y: 3.0, r: 1.0 },
            Obstacle { x: 9.0, y: 2.5, r: 1.0 },
        ],
        agents: vec![standard_agent()],
        penalties: PenaltyConfig {
            m2: -30000.0,
            m3: -30000.0,
            margin: 0.02,
        },
        horizon: Horizon { t: 40.0, dt: 0.01 },
        decay: 15.0,
    };
    debug_assert!(scenario.validate().is_ok());
    scenario
}

/// Case B: two agents, 30 s horizon, the four targets at x=5, y=1..4 carry
/// double weight, obstacles moved relative to Case A.
pub fn builtin_case_b() -> Scenario {
    let mut targets = grid_targets();
    for tg in targets.iter_mut() {
        if tg.x == 5.0 && (1.0..=4.0).contains(&tg.y) {
            tg.sigma = 2.0;
        }
    }
    let scenario = Scenario {
        space: MissionSpace { l1: 10.0, l2: 5.0 },
        targets,
        obstacles: vec![
            Obstacle { x: 3.0, y: 3.8, r: 1.0 },
            Obstacle { x: 8.5, y: 1.5, r: 1.0 },
        ],
        agents: vec![standard_agent(), standard_agent()],
        penalties: PenaltyConfig {
            m2: -30000.0,
            m3: -30000.0,
            margin: 0.02,
        },
        horizon: Horizon { t: 30.0, dt: 0.01 },
        decay: 15.0,
    };
    debug_assert!(scenario.validate().is_ok());
    scenario
}
