//! Forward simulation of one run over the horizon: kinematics, sensing,
//! uncertainty, collision deficits, and gradient propagation advance
//! together on a uniform grid.
//!
//! Objective integrals use the left-endpoint rectangle rule; within-step
//! event times refine only the event log and gradient resets, never the
//! integrals themselves, so the reported gradient is the exact derivative
//! of the reported discrete objective (at a frozen path schedule).

use crate::collision::{self, CollisionTracker};
use crate::ipa::{self, Event, EventKind, GradientState, TargetSensitivity};
use crate::kinematics::{
    self, KinematicsError, Partials, PathSensitivity, Phase, TrajectoryParams, TrajectoryState,
};
use crate::scenario::Scenario;
use crate::sensing::{self, DetectionPartials, SensingModel};
use crate::uncertainty::{self, UncertaintyState};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// How the gradient is propagated during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GradMode {
    /// Kinematic partials at a frozen path schedule (the reference
    /// treatment): the path parameter and its rate are taken as
    /// parameter-independent.
    Paper,
    /// Adds forward sensitivities of the path-parameter recursion, making
    /// the partials total derivatives.
    Total,
    /// No gradient propagation.
    None,
}

impl std::fmt::Display for GradMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradMode::Paper => write!(f, "paper"),
            GradMode::Total => write!(f, "total"),
            GradMode::None => write!(f, "none"),
        }
    }
}

/// Options for one simulation pass.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub grad_mode: GradMode,
    pub sensing: SensingModel,
    pub record_traces: bool,
    /// Keep every k-th trace row (the final row is always kept).
    pub trace_stride: usize,
    pub record_schedule: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            grad_mode: GradMode::None,
            sensing: SensingModel::Velocity,
            record_traces: true,
            trace_stride: 1,
            record_schedule: false,
        }
    }
}

/// One sampled instant of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Per-agent `(position, velocity)`.
    pub agents: Vec<(Vec2, Vec2)>,
    pub uncertainty: Vec<f64>,
    pub detection: Vec<f64>,
}

/// Recorded path-parameter samples `(psi, psi_dot)` per agent per grid
/// point, used to replay a run with the path schedule frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalySchedule {
    pub samples: Vec<Vec<(f64, f64)>>,
}

/// Run health counters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub min_pair_distance: Option<f64>,
    pub min_obstacle_distance: Option<f64>,
    /// Cruising samples whose implied acceleration magnitude exceeds the
    /// bound (holding the speed bound can demand more than `u_max`).
    pub cruise_accel_violations: usize,
    /// Accelerating steps where the acceleration equation had no real root
    /// and the vertex fallback was used.
    pub infeasible_accel_steps: usize,
    /// Samples skipped in the pair gradient because two agents coincided.
    pub coincident_pair_samples: usize,
}

/// Everything one forward pass produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Time-averaged objective `j1 + m2*j2 + m3*j3`.
    pub j: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Objective gradient over the stacked parameter vector; empty when
    /// gradients were off.
    pub grad: Vec<f64>,
    pub traces: Vec<TraceRow>,
    pub events: Vec<Event>,
    pub diagnostics: Diagnostics,
    pub num_agents: usize,
    pub num_targets: usize,
    pub schedule: Option<AnomalySchedule>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("agent {agent} at t={time:.4}: {source}")]
    Kinematics {
        agent: usize,
        time: f64,
        source: KinematicsError,
    },
    #[error("expected {expected} parameter sets (one per agent), got {given}")]
    ParamCount { expected: usize, given: usize },
    #[error("invalid parameters for agent {agent}: {message}")]
    InvalidParams { agent: usize, message: String },
    #[error("replay schedule has {len} samples for agent {agent}, need {need}")]
    ScheduleLength { agent: usize, len: usize, need: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

enum PathSource {
    Integrate(Vec<TrajectoryState>),
    Replay(AnomalySchedule),
}

/// Step-wise simulation engine. [`simulate`] drives it to completion; the
/// engine itself is public so tests and tooling can inspect state between
/// steps.
pub struct Simulation<'a> {
    scenario: &'a Scenario,
    params: &'a [TrajectoryParams],
    opts: SimOptions,
    path: PathSource,
    sens: Option<Vec<PathSensitivity>>,
    uncertainty: UncertaintyState,
    grad: Option<GradientState>,
    tracker: CollisionTracker,
    dt: f64,
    n_steps: usize,
    step_idx: usize,
    j1_acc: f64,
    j2_acc: f64,
    j3_acc: f64,
    events: Vec<Event>,
    traces: Vec<TraceRow>,
    schedule_rec: Option<Vec<Vec<(f64, f64)>>>,
    diag: Diagnostics,
    // Scratch buffers reused across steps.
    probs: Vec<f64>,
    p_joint: Vec<f64>,
    pinned: Vec<bool>,
    partials_buf: Vec<DetectionPartials>,
    kin_partials: Vec<(Partials, Partials)>,
    agent_states: Vec<(Vec2, Vec2)>,
    positions: Vec<Vec2>,
    step_events: Vec<Event>,
    sigmas: Vec<f64>,
    rates: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        scenario: &'a Scenario,
        params: &'a [TrajectoryParams],
        opts: SimOptions,
    ) -> Result<Self, SimError> {
        let states = vec![TrajectoryState::initial(); scenario.num_agents()];
        Self::build(scenario, params, opts, PathSource::Integrate(states))
    }

    /// A pass that replays a recorded path schedule instead of integrating
    /// the path dynamics. Used to differentiate the objective with the
    /// schedule held fixed.
    pub fn replay(
        scenario: &'a Scenario,
        params: &'a [TrajectoryParams],
        schedule: &AnomalySchedule,
        opts: SimOptions,
    ) -> Result<Self, SimError> {
        let n_steps = grid_steps(scenario);
        for (agent, samples) in schedule.samples.iter().enumerate() {
            if samples.len() < n_steps + 1 {
                return Err(SimError::ScheduleLength {
                    agent,
                    len: samples.len(),
                    need: n_steps + 1,
                });
            }
        }
        Self::build(scenario, params, opts, PathSource::Replay(schedule.clone()))
    }

    fn build(
        scenario: &'a Scenario,
        params: &'a [TrajectoryParams],
        opts: SimOptions,
        path: PathSource,
    ) -> Result<Self, SimError> {
        let n = scenario.num_agents();
        if params.len() != n {
            return Err(SimError::ParamCount {
                expected: n,
                given: params.len(),
            });
        }
        for (agent, p) in params.iter().enumerate() {
            p.validate()
                .map_err(|message| SimError::InvalidParams { agent, message })?;
        }
        let m = scenario.num_targets();
        let grad_on = opts.grad_mode != GradMode::None;
        let sens = match (&opts.grad_mode, &path) {
            (GradMode::Total, PathSource::Integrate(_)) => Some(
                params
                    .iter()
                    .map(|p| PathSensitivity::zeros(p.param_count()))
                    .collect(),
            ),
            _ => None,
        };
        let n_steps = grid_steps(scenario);
        Ok(Simulation {
            scenario,
            params,
            path,
            sens,
            uncertainty: UncertaintyState::new(scenario.targets.iter().map(|t| t.r0).collect()),
            grad: grad_on.then(|| GradientState::new(m, params)),
            tracker: CollisionTracker::new(n, scenario.num_obstacles()),
            dt: scenario.horizon.dt,
            n_steps,
            step_idx: 0,
            j1_acc: 0.0,
            j2_acc: 0.0,
            j3_acc: 0.0,
            events: Vec::new(),
            traces: Vec::new(),
            schedule_rec: opts.record_schedule.then(|| vec![Vec::with_capacity(n_steps + 1); n]),
            diag: Diagnostics {
                min_pair_distance: None,
                min_obstacle_distance: None,
                cruise_accel_violations: 0,
                infeasible_accel_steps: 0,
                coincident_pair_samples: 0,
            },
            probs: vec![0.0; n],
            p_joint: vec![0.0; m],
            pinned: vec![false; m],
            partials_buf: vec![DetectionPartials::default(); m * n],
            kin_partials: Vec::with_capacity(n),
            agent_states: vec![(Vec2::ZERO, Vec2::ZERO); n],
            positions: vec![Vec2::ZERO; n],
            step_events: Vec::new(),
            sigmas: scenario.targets.iter().map(|t| t.sigma).collect(),
            rates: vec![0.0; m],
            opts,
        })
    }

    pub fn time(&self) -> f64 {
        self.step_idx as f64 * self.dt
    }

    pub fn step_count(&self) -> usize {
        self.n_steps
    }

    pub fn is_done(&self) -> bool {
        self.step_idx >= self.n_steps
    }

    pub fn uncertainty_values(&self) -> &[f64] {
        self.uncertainty.values()
    }

    pub fn gradient_state(&self) -> Option<&GradientState> {
        self.grad.as_ref()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn path_sample(&self, agent: usize) -> (f64, f64) {
        match &self.path {
            PathSource::Integrate(states) => (states[agent].psi, states[agent].psi_dot),
            PathSource::Replay(schedule) => schedule.samples[agent][self.step_idx],
        }
    }

    /// Runs one grid step. Returns `false` once the horizon is exhausted
    /// (after recording the final sample).
    pub fn advance(&mut self) -> Result<bool, SimError> {
        if self.is_done() {
            return Ok(false);
        }
        let t = self.time();
        let grad_on = self.grad.is_some();
        let n_agents = self.scenario.num_agents();
        let n_targets = self.scenario.num_targets();

        // Sample kinematics at the current grid point.
        self.kin_partials.clear();
        for agent in 0..n_agents {
            let (psi, rate) = self.path_sample(agent);
            let ev = self.params[agent].eval(psi);
            self.agent_states[agent] = (ev.pos, ev.e1 * rate);
            self.positions[agent] = ev.pos;
            if grad_on {
                let (mut ds, mut dv) = kinematics::param_partials(&self.params[agent], psi, rate);
                if let Some(sens) = &self.sens {
                    kinematics::augment_partials_with_path(&mut ds, &mut dv, &ev, rate, &sens[agent]);
                }
                self.kin_partials.push((ds, dv));
            }
            if let Some(rec) = &mut self.schedule_rec {
                rec[agent].push((psi, rate));
            }
            // Holding the speed bound may imply more than u_max of
            // centripetal acceleration; count those samples.
            if let PathSource::Integrate(states) = &self.path {
                if states[agent].phase == Phase::Cruising {
                    let g = ev.e1.norm_sq();
                    if g > kinematics::G_FLOOR {
                        let psi_ddot = -rate * rate * ev.e1.dot(ev.e2) / g;
                        let acc = ev.e1 * psi_ddot + ev.e2 * (rate * rate);
                        if acc.norm() > self.scenario.agents[agent].u_max * (1.0 + 1e-9) {
                            self.diag.cruise_accel_violations += 1;
                        }
                    }
                }
            }
        }

        // Sensing per target.
        for i in 0..n_targets {
            let target = self.scenario.targets[i].position();
            for (n, (pos, vel)) in self.agent_states.iter().enumerate() {
                self.probs[n] = sensing::detection_prob(
                    *pos,
                    *vel,
                    target,
                    &self.scenario.agents[n],
                    self.opts.sensing,
                );
            }
            let p = sensing::joint_detection(&self.probs);
            self.p_joint[i] = p;
            self.pinned[i] = self.uncertainty.is_at_zero(i)
                && self.scenario.targets[i].growth <= self.scenario.decay * p;
            if grad_on {
                sensing::detection_partials_into(
                    &mut self.partials_buf[i * n_agents..(i + 1) * n_agents],
                    &self.agent_states,
                    &self.probs,
                    target,
                    &self.scenario.agents,
                    self.opts.sensing,
                );
            }
        }

        if self.opts.record_traces
            && (self.step_idx % self.opts.trace_stride.max(1) == 0 || self.step_idx == self.n_steps)
        {
            self.traces.push(TraceRow {
                t,
                agents: self.agent_states.clone(),
                uncertainty: self.uncertainty.values().to_vec(),
                detection: self.p_joint.clone(),
            });
        }

        // Collision deficits at this sample, with crossing events against
        // the previous one.
        self.step_events.clear();
        let report = self
            .tracker
            .evaluate(&self.positions, self.scenario, t, &mut self.step_events);
        if n_agents > 1 {
            let best = self.diag.min_pair_distance.unwrap_or(f64::INFINITY);
            self.diag.min_pair_distance = Some(best.min(report.min_pair_distance));
        }
        if self.scenario.num_obstacles() > 0 {
            let best = self.diag.min_obstacle_distance.unwrap_or(f64::INFINITY);
            self.diag.min_obstacle_distance = Some(best.min(report.min_obstacle_distance));
        }

        // Left-endpoint rectangle accumulation of the objective.
        let weighted_r: f64 = self
            .scenario
            .targets
            .iter()
            .zip(self.uncertainty.values())
            .map(|(tg, r)| tg.sigma * r)
            .sum();
        self.j1_acc += self.dt * weighted_r;
        self.j2_acc += self.dt * report.j2_instant();
        self.j3_acc += self.dt * report.j3_instant();

        if let Some(grad) = &mut self.grad {
            let any_active = report.pair_deficits.iter().any(|d| *d < 0.0)
                || report.obstacle_deficits.iter().any(|d| *d < 0.0);
            if any_active {
                let partial_refs: Vec<&Partials> = self.kin_partials.iter().map(|(ds, _)| ds).collect();
                let (pair_blocks, obstacle_blocks, coincident) =
                    collision::deficit_gradients(&self.positions, &partial_refs, &report, self.scenario);
                self.diag.coincident_pair_samples += coincident;
                ipa::accumulate(grad, &pair_blocks, &obstacle_blocks, &self.sigmas, self.dt);
            } else {
                ipa::accumulate(grad, &[], &[], &self.sigmas, self.dt);
            }
            let target_sens: Vec<TargetSensitivity<'_>> = (0..n_targets)
                .map(|i| TargetSensitivity {
                    partials: &self.partials_buf[i * n_agents..(i + 1) * n_agents],
                    pinned: self.pinned[i],
                })
                .collect();
            ipa::propagate_dr(grad, &target_sens, &self.kin_partials, self.scenario.decay, self.dt);
        }

        // Uncertainty Euler step with floor events.
        for (i, tg) in self.scenario.targets.iter().enumerate() {
            self.rates[i] = uncertainty::rate(
                self.uncertainty.values()[i],
                self.p_joint[i],
                tg.growth,
                self.scenario.decay,
            );
        }
        uncertainty::step(&mut self.uncertainty, &self.rates, self.dt, t, &mut self.step_events);

        // Advance the path parameter (skipped in replay mode).
        if let PathSource::Integrate(states) = &mut self.path {
            for agent in 0..n_agents {
                let spec = &self.scenario.agents[agent];
                let outcome = if let Some(sens) = &mut self.sens {
                    let (outcome, new_sens) = kinematics::path_sensitivity_step(
                        &self.params[agent],
                        &states[agent],
                        &sens[agent],
                        self.dt,
                        spec,
                    )
                    .map_err(|source| SimError::Kinematics { agent, time: t, source })?;
                    sens[agent] = new_sens;
                    outcome
                } else {
                    kinematics::step(&self.params[agent], &states[agent], self.dt, spec)
                        .map_err(|source| SimError::Kinematics { agent, time: t, source })?
                };
                if outcome.infeasible_accel {
                    self.diag.infeasible_accel_steps += 1;
                }
                if let Some(offset) = outcome.vmax_crossing {
                    self.step_events.push(Event {
                        kind: EventKind::MaxVelocityReached { agent },
                        time: t + offset,
                    });
                }
                states[agent] = outcome.state;
            }
        }

        // Apply this step's events in deterministic order.
        ipa::sort_events(&mut self.step_events);
        for event in &self.step_events {
            if let Some(grad) = &mut self.grad {
                ipa::apply_event(grad, event);
            }
        }
        self.events.append(&mut self.step_events);

        self.step_idx += 1;
        if self.is_done() {
            self.record_final_sample();
            return Ok(false);
        }
        Ok(true)
    }

    /// The final grid point closes the trace and the recorded schedule.
    fn record_final_sample(&mut self) {
        let t = self.time();
        for agent in 0..self.scenario.num_agents() {
            let (psi, rate) = match &self.path {
                PathSource::Integrate(states) => (states[agent].psi, states[agent].psi_dot),
                PathSource::Replay(schedule) => schedule.samples[agent][self.step_idx],
            };
            let ev = self.params[agent].eval(psi);
            self.agent_states[agent] = (ev.pos, ev.e1 * rate);
            if let Some(rec) = &mut self.schedule_rec {
                rec[agent].push((psi, rate));
            }
        }
        for i in 0..self.scenario.num_targets() {
            let target = self.scenario.targets[i].position();
            for (n, (pos, vel)) in self.agent_states.iter().enumerate() {
                self.probs[n] = sensing::detection_prob(
                    *pos,
                    *vel,
                    target,
                    &self.scenario.agents[n],
                    self.opts.sensing,
                );
            }
            self.p_joint[i] = sensing::joint_detection(&self.probs);
        }
        if self.opts.record_traces {
            self.traces.push(TraceRow {
                t,
                agents: self.agent_states.clone(),
                uncertainty: self.uncertainty.values().to_vec(),
                detection: self.p_joint.clone(),
            });
        }
    }

    /// Finalizes the pass into a [`SimResult`].
    pub fn into_result(mut self) -> SimResult {
        let t_eff = self.n_steps as f64 * self.dt;
        let j1 = self.j1_acc / t_eff;
        let j2 = self.j2_acc / t_eff;
        let j3 = self.j3_acc / t_eff;
        let m2 = self.scenario.penalties.m2;
        let m3 = self.scenario.penalties.m3;
        let grad = match &self.grad {
            Some(gs) => ipa::assemble(gs, t_eff, m2, m3),
            None => Vec::new(),
        };
        ipa::sort_events(&mut self.events);
        SimResult {
            j: j1 + m2 * j2 + m3 * j3,
            j1,
            j2,
            j3,
            grad,
            traces: self.traces,
            events: self.events,
            diagnostics: self.diag,
            num_agents: self.scenario.num_agents(),
            num_targets: self.scenario.num_targets(),
            schedule: self.schedule_rec.map(|samples| AnomalySchedule { samples }),
        }
    }
}

fn grid_steps(scenario: &Scenario) -> usize {
    ((scenario.horizon.t / scenario.horizon.dt).round() as usize).max(1)
}

/// Runs one complete forward pass.
pub fn simulate(
    scenario: &Scenario,
    params: &[TrajectoryParams],
    grad_mode: GradMode,
) -> Result<SimResult, SimError> {
    simulate_with(
        scenario,
        params,
        SimOptions {
            grad_mode,
            ..SimOptions::default()
        },
    )
}

/// Runs one complete forward pass with full option control.
pub fn simulate_with(
    scenario: &Scenario,
    params: &[TrajectoryParams],
    opts: SimOptions,
) -> Result<SimResult, SimError> {
    let mut sim = Simulation::new(scenario, params, opts)?;
    while sim.advance()? {}
    Ok(sim.into_result())
}

/// Replays a recorded path schedule under (possibly different) parameters.
pub fn simulate_replay(
    scenario: &Scenario,
    params: &[TrajectoryParams],
    schedule: &AnomalySchedule,
    opts: SimOptions,
) -> Result<SimResult, SimError> {
    let mut sim = Simulation::replay(scenario, params, schedule, opts)?;
    while sim.advance()? {}
    Ok(sim.into_result())
}

fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

/// Writes `trace.csv` and `events.jsonl` into `dir`. Output is bit-stable
/// for identical results.
pub fn export_traces(result: &SimResult, dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(dir)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("trace.csv"))?);
    let mut header = String::from("t");
    for n in 1..=result.num_agents {
        header.push_str(&format!(",s{n}x,s{n}y,v{n}x,v{n}y"));
    }
    for i in 1..=result.num_targets {
        header.push_str(&format!(",R{i}"));
    }
    writeln!(csv, "{header}")?;
    for row in &result.traces {
        let mut line = fmt_float(row.t);
        for (pos, vel) in &row.agents {
            line.push_str(&format!(
                ",{},{},{},{}",
                fmt_float(pos.x),
                fmt_float(pos.y),
                fmt_float(vel.x),
                fmt_float(vel.y)
            ));
        }
        for r in &row.uncertainty {
            line.push(',');
            line.push_str(&fmt_float(*r));
        }
        writeln!(csv, "{line}")?;
    }
    csv.into_inner().map_err(|e| e.into_error())?;

    let mut log = std::io::BufWriter::new(std::fs::File::create(dir.join("events.jsonl"))?);
    for event in &result.events {
        serde_json::to_writer(&mut log, event).map_err(std::io::Error::from)?;
        writeln!(log)?;
    }
    log.into_inner().map_err(|e| e.into_error())?;
    Ok(())
}
