//! Trajectory kinematics: maps curve parameters and a path-parameter state
//! to agent position/velocity and their parameter partials, and advances
//! the path parameter under the max-acceleration / max-velocity phase
//! logic.
//!
//! An agent starts at rest (`psi = 0`, `psi_dot = 0`) and accelerates along
//! its curve at the acceleration bound until the speed reaches `v_max`;
//! from then on it holds `v_max` by re-solving the path-parameter rate at
//! every step. Traversal is counterclockwise (`psi_dot >= 0`) and the path
//! parameter wraps modulo 2*pi.

mod ellipse;
mod fourier;

pub use ellipse::EllipseParams;
pub use fourier::FourierParams;

use crate::scenario::AgentSpec;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Floor on the ellipse minor axis, keeping the curve away from the
/// degenerate line geometry.
pub const B_MIN: f64 = 1e-3;

/// Floor on the squared speed coefficient `|ds/dpsi|^2`; below it the rate
/// and acceleration solves are ill-posed.
pub const G_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum KinematicsError {
    #[error("degenerate trajectory geometry at psi={psi:.6}: |ds/dpsi|^2={g:.3e}")]
    DegenerateGeometry { psi: f64, g: f64 },
}

/// Trajectory curve family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ellipse,
    Fourier,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Ellipse => write!(f, "ellipse"),
            Family::Fourier => write!(f, "fourier"),
        }
    }
}

/// Per-agent trajectory parameters, the optimization variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrajectoryParams {
    Ellipse(EllipseParams),
    Fourier(FourierParams),
}

/// Position and its first three derivatives with respect to the path
/// parameter, all at one `psi`.
#[derive(Debug, Clone, Copy)]
pub struct CurveEval {
    pub pos: Vec2,
    pub e1: Vec2,
    pub e2: Vec2,
    pub e3: Vec2,
}

/// A 2 x P matrix of partial derivatives: one row per planar component,
/// one column per trajectory parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Partials {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Partials {
    pub fn zeros(p: usize) -> Self {
        Partials {
            x: vec![0.0; p],
            y: vec![0.0; p],
        }
    }

    pub fn param_count(&self) -> usize {
        self.x.len()
    }

    pub fn col(&self, j: usize) -> Vec2 {
        Vec2::new(self.x[j], self.y[j])
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.x.iter_mut().chain(self.y.iter_mut()) {
            *v *= factor;
        }
    }
}

impl TrajectoryParams {
    pub fn family(&self) -> Family {
        match self {
            TrajectoryParams::Ellipse(_) => Family::Ellipse,
            TrajectoryParams::Fourier(_) => Family::Fourier,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            TrajectoryParams::Ellipse(_) => ellipse::PARAM_COUNT,
            TrajectoryParams::Fourier(f) => f.param_count(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            TrajectoryParams::Ellipse(e) => e.validate(B_MIN),
            TrajectoryParams::Fourier(f) => f.validate(),
        }
    }

    pub fn eval(&self, psi: f64) -> CurveEval {
        match self {
            TrajectoryParams::Ellipse(e) => e.eval(psi),
            TrajectoryParams::Fourier(f) => f.eval(psi),
        }
    }

    pub fn pos_partials(&self, psi: f64) -> Partials {
        match self {
            TrajectoryParams::Ellipse(e) => e.pos_partials(psi),
            TrajectoryParams::Fourier(f) => f.pos_partials(psi),
        }
    }

    pub fn e1_partials(&self, psi: f64) -> Partials {
        match self {
            TrajectoryParams::Ellipse(e) => e.e1_partials(psi),
            TrajectoryParams::Fourier(f) => f.e1_partials(psi),
        }
    }

    pub fn e2_partials(&self, psi: f64) -> Partials {
        match self {
            TrajectoryParams::Ellipse(e) => e.e2_partials(psi),
            TrajectoryParams::Fourier(f) => f.e2_partials(psi),
        }
    }

    pub fn to_vector(&self) -> Vec<f64> {
        match self {
            TrajectoryParams::Ellipse(e) => e.to_vector(),
            TrajectoryParams::Fourier(f) => f.to_vector(),
        }
    }

    pub fn set_from_vector(&mut self, v: &[f64]) {
        match self {
            TrajectoryParams::Ellipse(e) => e.set_from_vector(v),
            TrajectoryParams::Fourier(f) => f.set_from_vector(v),
        }
    }

    pub fn component_names(&self) -> Vec<String> {
        match self {
            TrajectoryParams::Ellipse(_) => EllipseParams::component_names(),
            TrajectoryParams::Fourier(f) => f.component_names(),
        }
    }
}

/// Motion phase of an agent along its curve. The transition
/// `Accelerating -> Cruising` happens exactly once and is never reversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Accelerating,
    Cruising,
}

/// Reduced dynamic state of one agent: path parameter, its rate, and the
/// motion phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub psi: f64,
    pub psi_dot: f64,
    pub phase: Phase,
}

impl TrajectoryState {
    /// Agents start at rest at the start of their curve.
    pub fn initial() -> Self {
        TrajectoryState {
            psi: 0.0,
            psi_dot: 0.0,
            phase: Phase::Accelerating,
        }
    }
}

/// Result of advancing one time step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub state: TrajectoryState,
    /// Offset into the step at which the speed crossed `v_max`, when the
    /// phase switched during this step.
    pub vmax_crossing: Option<f64>,
    /// True when the acceleration-bound quadratic had no real root and the
    /// vertex root was used instead.
    pub infeasible_accel: bool,
}

/// Forward sensitivity of the path-parameter recursion: `d psi / d theta`
/// and `d psi_dot / d theta` over one agent's parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSensitivity {
    pub dpsi: Vec<f64>,
    pub drate: Vec<f64>,
}

impl PathSensitivity {
    pub fn zeros(p: usize) -> Self {
        PathSensitivity {
            dpsi: vec![0.0; p],
            drate: vec![0.0; p],
        }
    }
}

/// Solution of the max-acceleration equation for the path-parameter
/// acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelSolve {
    pub psi_ddot: f64,
    /// False when no real root exists and the vertex root was returned.
    pub feasible: bool,
}

pub fn wrap_angle(x: f64) -> f64 {
    x.rem_euclid(TAU)
}


/// Agent position on the curve at path parameter `psi`.
pub fn position(params: &TrajectoryParams, psi: f64) -> Vec2 {
    match params {
        TrajectoryParams::Ellipse(e) => e.position(psi),
        TrajectoryParams::Fourier(f) => f.position(psi),
    }
}

/// Agent velocity for a given path parameter and rate.
pub fn velocity(params: &TrajectoryParams, psi: f64, psi_dot: f64) -> Vec2 {
    params.eval(psi).e1 * psi_dot
}

fn checked_speed_coeff(params: &TrajectoryParams, psi: f64) -> Result<(CurveEval, f64), KinematicsError> {
    let ev = params.eval(psi);
    let g = ev.e1.norm_sq();
    if g < G_FLOOR {
        return Err(KinematicsError::DegenerateGeometry { psi, g });
    }
    Ok((ev, g))
}

/// Solves `|velocity| = speed` for the non-negative path-parameter rate.
pub fn solve_rate_for_speed(
    params: &TrajectoryParams,
    psi: f64,
    speed: f64,
) -> Result<f64, KinematicsError> {
    let (_, g) = checked_speed_coeff(params, psi)?;
    Ok(speed / g.sqrt())
}

/// Quadratic solve for the path-parameter acceleration that keeps the
/// acceleration magnitude at `u_max`, picking the root with the larger
/// speed growth. Falls back to the discriminant vertex when no real root
/// exists.
pub fn solve_anomaly_accel(
    params: &TrajectoryParams,
    psi: f64,
    psi_dot: f64,
    u_max: f64,
) -> Result<AccelSolve, KinematicsError> {
    let (ev, g) = checked_speed_coeff(params, psi)?;
    let h = ev.e1.dot(ev.e2);
    let q = ev.e2.norm_sq();
    Ok(accel_root(g, h, q, psi_dot, u_max))
}

/// Root selection on `g*x^2 + 2*rate^2*h*x + (rate^4*q - u^2) = 0`. The
/// tangential acceleration is increasing in `x`, so the larger root always
/// grows the speed fastest.
fn accel_root(g: f64, h: f64, q: f64, psi_dot: f64, u_max: f64) -> AccelSolve {
    let rate_sq = psi_dot * psi_dot;
    let qb = 2.0 * rate_sq * h;
    let qc = rate_sq * rate_sq * q - u_max * u_max;
    let disc = qb * qb - 4.0 * g * qc;
    if disc >= 0.0 {
        AccelSolve {
            psi_ddot: (-qb + disc.sqrt()) / (2.0 * g),
            feasible: true,
        }
    } else {
        AccelSolve {
            psi_ddot: -qb / (2.0 * g),
            feasible: false,
        }
    }
}

/// Parameter partials of position and velocity at a frozen path state:
/// `(ds/dtheta, dv/dtheta)`, each 2 x P. The path parameter and its rate
/// are treated as parameter-independent.
pub fn param_partials(params: &TrajectoryParams, psi: f64, psi_dot: f64) -> (Partials, Partials) {
    let ds = params.pos_partials(psi);
    let mut dv = params.e1_partials(psi);
    dv.scale(psi_dot);
    (ds, dv)
}

/// Adds the path-dependence terms to frozen-state partials, turning them
/// into total derivatives: `ds += e1 * dpsi`, `dv += (rate*e2) * dpsi +
/// e1 * drate`.
pub fn augment_partials_with_path(
    ds: &mut Partials,
    dv: &mut Partials,
    ev: &CurveEval,
    psi_dot: f64,
    sens: &PathSensitivity,
) {
    for j in 0..ds.param_count() {
        ds.x[j] += ev.e1.x * sens.dpsi[j];
        ds.y[j] += ev.e1.y * sens.dpsi[j];
        dv.x[j] += psi_dot * ev.e2.x * sens.dpsi[j] + ev.e1.x * sens.drate[j];
        dv.y[j] += psi_dot * ev.e2.y * sens.dpsi[j] + ev.e1.y * sens.drate[j];
    }
}

/// Advances the path-parameter state by one step of `dt`.
pub fn step(
    params: &TrajectoryParams,
    state: &TrajectoryState,
    dt: f64,
    spec: &AgentSpec,
) -> Result<StepOutcome, KinematicsError> {
    step_impl(params, state, dt, spec, None)
}

/// Advances the forward sensitivity of the step recursion alongside the
/// state. The returned sensitivity corresponds to the state produced by
/// [`step`] on the same inputs.
pub fn path_sensitivity_step(
    params: &TrajectoryParams,
    state: &TrajectoryState,
    sens: &PathSensitivity,
    dt: f64,
    spec: &AgentSpec,
) -> Result<(StepOutcome, PathSensitivity), KinematicsError> {
    let mut updated = sens.clone();
    let outcome = step_impl(params, state, dt, spec, Some(&mut updated))?;
    Ok((outcome, updated))
}

/// Scalar derivative bundle for one quantity with respect to psi, rate,
/// and each parameter.
struct ScalarSens {
    d_psi: f64,
    d_rate: f64,
    d_theta: Vec<f64>,
}

/// Derivatives of the quadratic coefficients and root of
/// [`solve_anomaly_accel`] at fixed geometry.
fn accel_root_sens(
    params: &TrajectoryParams,
    ev: &CurveEval,
    psi: f64,
    psi_dot: f64,
    root: AccelSolve,
    g: f64,
    h: f64,
    q: f64,
    u_max: f64,
) -> ScalarSens {
    let p = params.param_count();
    let e1p = params.e1_partials(psi);
    let e2p = params.e2_partials(psi);
    let rate_sq = psi_dot * psi_dot;
    let qb = 2.0 * rate_sq * h;
    let qc = rate_sq * rate_sq * q - u_max * u_max;

    // Coefficient derivatives with respect to psi.
    let dg_psi = 2.0 * h;
    let dh_psi = q + ev.e1.dot(ev.e3);
    let dq_psi = 2.0 * ev.e2.dot(ev.e3);

    let droot = |da: f64, db: f64, dc: f64| -> f64 {
        if root.feasible {
            let disc = (qb * qb - 4.0 * g * qc).max(0.0);
            let s = disc.sqrt().max(1e-12);
            let ds = (qb * db - 2.0 * (da * qc + g * dc)) / s;
            (-db + ds) / (2.0 * g) - root.psi_ddot * da / g
        } else {
            -db / (2.0 * g) + qb * da / (2.0 * g * g)
        }
    };

    let d_psi = droot(dg_psi, 2.0 * rate_sq * dh_psi, rate_sq * rate_sq * dq_psi);
    let d_rate = droot(0.0, 4.0 * psi_dot * h, 4.0 * psi_dot * rate_sq * q);
    let mut d_theta = Vec::with_capacity(p);
    for j in 0..p {
        let e1pj = e1p.col(j);
        let e2pj = e2p.col(j);
        let dg = 2.0 * ev.e1.dot(e1pj);
        let dh = e1pj.dot(ev.e2) + ev.e1.dot(e2pj);
        let dq = 2.0 * ev.e2.dot(e2pj);
        d_theta.push(droot(dg, 2.0 * rate_sq * dh, rate_sq * rate_sq * dq));
    }
    ScalarSens { d_psi, d_rate, d_theta }
}

/// Derivatives of the cruise rate `v_max / sqrt(g(psi))` with respect to
/// psi and each parameter.
fn cruise_rate_sens(
    params: &TrajectoryParams,
    ev: &CurveEval,
    psi: f64,
    rate: f64,
    g: f64,
) -> ScalarSens {
    let p = params.param_count();
    let e1p = params.e1_partials(psi);
    let h = ev.e1.dot(ev.e2);
    let d_psi = -rate * h / g;
    let mut d_theta = Vec::with_capacity(p);
    for j in 0..p {
        d_theta.push(-rate * ev.e1.dot(e1p.col(j)) / g);
    }
    ScalarSens { d_psi, d_rate: 0.0, d_theta }
}

fn step_impl(
    params: &TrajectoryParams,
    state: &TrajectoryState,
    dt: f64,
    spec: &AgentSpec,
    sens: Option<&mut PathSensitivity>,
) -> Result<StepOutcome, KinematicsError> {
    match state.phase {
        Phase::Accelerating => {
            let (ev, g) = checked_speed_coeff(params, state.psi)?;
            let h = ev.e1.dot(ev.e2);
            let q = ev.e2.norm_sq();
            let root = accel_root(g, h, q, state.psi_dot, spec.u_max);
            let acc = root.psi_ddot;

            let psi_next = wrap_angle(state.psi + state.psi_dot * dt + 0.5 * acc * dt * dt);
            let rate_next = state.psi_dot + acc * dt;
            let (ev_next, g_next) = checked_speed_coeff(params, psi_next)?;
            let speed_next = rate_next * g_next.sqrt();

            if let Some(sens) = &sens {
                debug_assert_eq!(sens.dpsi.len(), params.param_count());
            }
            let sens_after_accel = sens.map(|sens| {
                let rs = accel_root_sens(params, &ev, state.psi, state.psi_dot, root, g, h, q, spec.u_max);
                for j in 0..params.param_count() {
                    let dacc = rs.d_theta[j] + rs.d_psi * sens.dpsi[j] + rs.d_rate * sens.drate[j];
                    sens.dpsi[j] += dt * sens.drate[j] + 0.5 * dt * dt * dacc;
                    sens.drate[j] += dt * dacc;
                }
                sens
            });

            if speed_next >= spec.v_max {
                let speed_now = state.psi_dot * g.sqrt();
                let frac = if speed_next > speed_now {
                    ((spec.v_max - speed_now) / (speed_next - speed_now)).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let rate_cruise = spec.v_max / g_next.sqrt();
                if let Some(sens) = sens_after_accel {
                    // Rate is now pinned to the speed constraint at psi_next.
                    let rs = cruise_rate_sens(params, &ev_next, psi_next, rate_cruise, g_next);
                    for j in 0..params.param_count() {
                        sens.drate[j] = rs.d_theta[j] + rs.d_psi * sens.dpsi[j];
                    }
                }
                Ok(StepOutcome {
                    state: TrajectoryState {
                        psi: psi_next,
                        psi_dot: rate_cruise,
                        phase: Phase::Cruising,
                    },
                    vmax_crossing: Some(frac * dt),
                    infeasible_accel: !root.feasible,
                })
            } else {
                Ok(StepOutcome {
                    state: TrajectoryState {
                        psi: psi_next,
                        psi_dot: rate_next,
                        phase: Phase::Accelerating,
                    },
                    vmax_crossing: None,
                    infeasible_accel: !root.feasible,
                })
            }
        }
        Phase::Cruising => {
            let (ev, g) = checked_speed_coeff(params, state.psi)?;
            let rate_left = spec.v_max / g.sqrt();
            let psi_next = wrap_angle(state.psi + rate_left * dt);
            let (ev_next, g_next) = checked_speed_coeff(params, psi_next)?;
            let rate_next = spec.v_max / g_next.sqrt();

            if let Some(sens) = sens {
                let rs_left = cruise_rate_sens(params, &ev, state.psi, rate_left, g);
                let mut dpsi_next = Vec::with_capacity(params.param_count());
                for j in 0..params.param_count() {
                    let drate_left = rs_left.d_theta[j] + rs_left.d_psi * sens.dpsi[j];
                    dpsi_next.push(sens.dpsi[j] + dt * drate_left);
                }
                let rs_next = cruise_rate_sens(params, &ev_next, psi_next, rate_next, g_next);
                for j in 0..params.param_count() {
                    sens.dpsi[j] = dpsi_next[j];
                    sens.drate[j] = rs_next.d_theta[j] + rs_next.d_psi * dpsi_next[j];
                }
            }

            Ok(StepOutcome {
                state: TrajectoryState {
                    psi: psi_next,
                    psi_dot: rate_next,
                    phase: Phase::Cruising,
                },
                vmax_crossing: None,
                infeasible_accel: false,
            })
        }
    }
}

/// Reconstructs the planar acceleration implied by a path state and
/// path-parameter acceleration.
pub fn planar_accel(params: &TrajectoryParams, psi: f64, psi_dot: f64, psi_ddot: f64) -> Vec2 {
    let ev = params.eval(psi);
    ev.e1 * psi_ddot + ev.e2 * (psi_dot * psi_dot)
}

/// On-file form of a full per-agent parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ParamsDoc {
    Ellipse { agents: Vec<EllipseParams> },
    Fourier { agents: Vec<FourierParams> },
}

#[derive(Debug, thiserror::Error)]
pub enum ParamsError {
    #[error("params parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("params validation error: {0}")]
    Invalid(String),
}

impl ParamsDoc {
    pub fn family(&self) -> Family {
        match self {
            ParamsDoc::Ellipse { .. } => Family::Ellipse,
            ParamsDoc::Fourier { .. } => Family::Fourier,
        }
    }

    pub fn into_params(self) -> Vec<TrajectoryParams> {
        match self {
            ParamsDoc::Ellipse { agents } => {
                agents.into_iter().map(TrajectoryParams::Ellipse).collect()
            }
            ParamsDoc::Fourier { agents } => {
                agents.into_iter().map(TrajectoryParams::Fourier).collect()
            }
        }
    }

    /// Collects per-agent params back into document form. All agents must
    /// share one family.
    pub fn from_params(params: &[TrajectoryParams]) -> Result<Self, ParamsError> {
        let family = params
            .first()
            .ok_or_else(|| ParamsError::Invalid("empty parameter list".into()))?
            .family();
        match family {
            Family::Ellipse => {
                let mut agents = Vec::with_capacity(params.len());
                for p in params {
                    match p {
                        TrajectoryParams::Ellipse(e) => agents.push(*e),
                        _ => return Err(ParamsError::Invalid("mixed trajectory families".into())),
                    }
                }
                Ok(ParamsDoc::Ellipse { agents })
            }
            Family::Fourier => {
                let mut agents = Vec::with_capacity(params.len());
                for p in params {
                    match p {
                        TrajectoryParams::Fourier(f) => agents.push(f.clone()),
                        _ => return Err(ParamsError::Invalid("mixed trajectory families".into())),
                    }
                }
                Ok(ParamsDoc::Fourier { agents })
            }
        }
    }
}

/// Parses a params document, normalizes angles into `[0, 2*pi)`, and
/// validates each agent's parameter set.
pub fn load_params(text: &str) -> Result<Vec<TrajectoryParams>, ParamsError> {
    let doc: ParamsDoc = serde_json::from_str(text)?;
    let mut params = doc.into_params();
    for (n, p) in params.iter_mut().enumerate() {
        match p {
            TrajectoryParams::Ellipse(e) => e.phi = wrap_angle(e.phi),
            TrajectoryParams::Fourier(f) => {
                for v in f.phix.iter_mut().chain(f.phiy.iter_mut()) {
                    *v = wrap_angle(*v);
                }
            }
        }
        p.validate()
            .map_err(|e| ParamsError::Invalid(format!("agent {n}: {e}")))?;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> AgentSpec {
        AgentSpec {
            u_max: 1.0,
            v_max: 1.5,
            r_sense: 2.0,
            beta: 5.0,
            rho: 0.2,
        }
    }

    fn ellipse(cx: f64, cy: f64, a: f64, b: f64, phi: f64) -> TrajectoryParams {
        TrajectoryParams::Ellipse(EllipseParams::new(cx, cy, a, b, phi))
    }

    fn random_ellipse(rng: &mut ChaCha8Rng) -> TrajectoryParams {
        let b = rng.gen_range(0.3..2.0);
        let a = b + rng.gen_range(0.0..2.0);
        ellipse(
            rng.gen_range(0.0..10.0),
            rng.gen_range(0.0..5.0),
            a,
            b,
            rng.gen_range(0.0..TAU),
        )
    }

    fn random_fourier(rng: &mut ChaCha8Rng) -> TrajectoryParams {
        let f = 1.0 / TAU;
        TrajectoryParams::Fourier(FourierParams {
            fx: f * rng.gen_range(0.8..1.2),
            fy: f,
            a: vec![
                rng.gen_range(2.0..8.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.1..0.8),
            ],
            b: vec![
                rng.gen_range(1.0..4.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.1..0.8),
            ],
            phix: vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
            phiy: vec![rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
        })
    }

    #[test]
    fn ellipse_position_values() {
        let p = ellipse(3.0, 2.0, 2.0, 1.0, 0.0);
        let s = position(&p, 0.0);
        assert!((s.x - 5.0).abs() < 1e-12 && (s.y - 2.0).abs() < 1e-12);
        let s = position(&p, std::f64::consts::FRAC_PI_2);
        assert!((s.x - 3.0).abs() < 1e-12 && (s.y - 3.0).abs() < 1e-12);
        let rotated = ellipse(3.0, 2.0, 2.0, 1.0, std::f64::consts::FRAC_PI_2);
        let s = position(&rotated, 0.0);
        assert!((s.x - 3.0).abs() < 1e-12 && (s.y - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ellipse_velocity_values() {
        let p = ellipse(3.0, 2.0, 2.0, 1.0, 0.0);
        let v = velocity(&p, 0.0, 1.5);
        assert!(v.x.abs() < 1e-12 && (v.y - 1.5).abs() < 1e-12);
        assert_eq!(velocity(&p, 1.1, 0.0), Vec2::ZERO);
        let circle = ellipse(0.0, 0.0, 1.0, 1.0, 0.0);
        let v = velocity(&circle, 0.0, 2.0);
        assert!((v.norm() - 2.0).abs() < 1e-12 && (v.y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_solve_values() {
        let p = ellipse(3.0, 2.0, 2.0, 1.0, 0.7);
        let rate = solve_rate_for_speed(&p, 0.0, 1.5).unwrap();
        assert!((rate - 1.5).abs() < 1e-12, "g=b^2=1 at psi=0");
        assert_eq!(solve_rate_for_speed(&p, 0.3, 0.0).unwrap(), 0.0);
        let circle = ellipse(0.0, 0.0, 2.0, 2.0, 0.0);
        let rate = solve_rate_for_speed(&circle, 1.234, 1.0).unwrap();
        assert!((rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rate_solve_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = if rng.gen_bool(0.5) {
                random_ellipse(&mut rng)
            } else {
                random_fourier(&mut rng)
            };
            let psi = rng.gen_range(0.0..TAU);
            let speed = rng.gen_range(0.0..3.0);
            let rate = solve_rate_for_speed(&p, psi, speed).unwrap();
            assert!((velocity(&p, psi, rate).norm() - speed).abs() < 1e-9);
        }
    }

    #[test]
    fn accel_solve_values() {
        let circle = ellipse(0.0, 0.0, 1.0, 1.0, 0.0);
        let sol = solve_anomaly_accel(&circle, 0.3, 0.0, 1.0).unwrap();
        assert!(sol.feasible && (sol.psi_ddot - 1.0).abs() < 1e-12);

        // Centripetal acceleration alone consumes the bound: rate^2 = u_max.
        let sol = solve_anomaly_accel(&circle, 0.3, 1.0, 1.0).unwrap();
        assert!(sol.feasible && sol.psi_ddot.abs() < 1e-12);

        // Beyond it there is no real root; vertex root is 0 on a circle.
        let sol = solve_anomaly_accel(&circle, 0.3, 1.2, 1.0).unwrap();
        assert!(!sol.feasible && sol.psi_ddot.abs() < 1e-12);

        let p = ellipse(0.0, 0.0, 2.0, 1.0, 0.4);
        let ev = p.eval(1.0);
        let sol = solve_anomaly_accel(&p, 1.0, 0.0, 1.0).unwrap();
        assert!((sol.psi_ddot - 1.0 / ev.e1.norm()).abs() < 1e-12);
    }

    #[test]
    fn accel_magnitude_honored() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let p = if rng.gen_bool(0.5) {
                random_ellipse(&mut rng)
            } else {
                random_fourier(&mut rng)
            };
            let psi = rng.gen_range(0.0..TAU);
            let psi_dot = rng.gen_range(0.0..0.8);
            let sol = solve_anomaly_accel(&p, psi, psi_dot, 1.0).unwrap();
            if sol.feasible {
                let acc = planar_accel(&p, psi, psi_dot, sol.psi_ddot);
                assert!(
                    (acc.norm() - 1.0).abs() < 1e-6,
                    "|s..|={} for {:?}",
                    acc.norm(),
                    p
                );
            }
        }
    }

    #[test]
    fn euler_step_values() {
        let circle = ellipse(0.0, 0.0, 1.0, 1.0, 0.0);
        let out = step(&circle, &TrajectoryState::initial(), 0.1, &spec()).unwrap();
        assert!((out.state.psi - 0.005).abs() < 1e-12);
        assert!((out.state.psi_dot - 0.1).abs() < 1e-12);
        assert_eq!(out.state.phase, Phase::Accelerating);
        assert!(out.vmax_crossing.is_none());
    }

    #[test]
    fn cruising_circle_constant_rate() {
        let circle = ellipse(0.0, 0.0, 2.0, 2.0, 0.0);
        let mut spec = spec();
        spec.v_max = 1.0;
        let mut state = TrajectoryState {
            psi: 0.0,
            psi_dot: 0.5,
            phase: Phase::Cruising,
        };
        for _ in 0..50 {
            let out = step(&circle, &state, 0.01, &spec).unwrap();
            state = out.state;
            assert!((state.psi_dot - 0.5).abs() < 1e-12);
            assert!((velocity(&circle, state.psi, state.psi_dot).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vmax_crossing_switches_phase_once() {
        let p = ellipse(3.0, 2.0, 2.0, 1.0, 0.0);
        let sp = spec();
        let mut state = TrajectoryState::initial();
        let dt = 0.01;
        let mut crossings = 0;
        let mut speeds = Vec::new();
        for m in 0..600 {
            let out = step(&p, &state, dt, &sp).unwrap();
            if let Some(offset) = out.vmax_crossing {
                crossings += 1;
                assert!(offset > 0.0 && offset <= dt);
                assert_eq!(out.state.phase, Phase::Cruising);
                let t_event = m as f64 * dt + offset;
                assert!(t_event > 0.0);
            }
            state = out.state;
            speeds.push(velocity(&p, state.psi, state.psi_dot).norm());
        }
        assert_eq!(crossings, 1);
        assert_eq!(state.phase, Phase::Cruising);
        // Cruising samples sit exactly on the speed bound.
        assert!(speeds.iter().all(|s| *s <= sp.v_max + 1e-9));
        assert!((speeds.last().unwrap() - sp.v_max).abs() < 1e-9);
    }

    #[test]
    fn accelerating_speed_is_monotone() {
        // The chosen root never has negative tangential acceleration at the
        // step start, so sampled speed can dip only by the O(dt^2)
        // discretization error near the centripetal stall boundary.
        let dt = 0.01;
        let slack = dt * dt;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let p = random_ellipse(&mut rng);
            let sp = spec();
            let mut state = TrajectoryState::initial();
            let mut prev_speed = 0.0;
            for _ in 0..400 {
                let out = step(&p, &state, dt, &sp).unwrap();
                if out.state.phase != Phase::Accelerating {
                    break;
                }
                let speed = velocity(&p, out.state.psi, out.state.psi_dot).norm();
                if !out.infeasible_accel {
                    assert!(speed >= prev_speed - slack, "{speed} < {prev_speed}");
                }
                prev_speed = speed;
                state = out.state;
            }
        }
    }

    #[test]
    fn circle_degenerates_to_constant_radius() {
        let circle = ellipse(4.0, 3.0, 1.7, 1.7, 0.9);
        let sp = spec();
        let mut state = TrajectoryState::initial();
        for _ in 0..500 {
            state = step(&circle, &state, 0.01, &sp).unwrap().state;
            let r = position(&circle, state.psi).distance(Vec2::new(4.0, 3.0));
            assert!((r - 1.7).abs() < 1e-9);
        }
    }

    /// Central finite differences of position/velocity at frozen
    /// `(psi, psi_dot)` against the analytic partials.
    fn check_partials_fd(params: &TrajectoryParams, psi: f64, psi_dot: f64) {
        let (ds, dv) = param_partials(params, psi, psi_dot);
        let h = 1e-6;
        let base = params.to_vector();
        for j in 0..params.param_count() {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut v = base.clone();
            v[j] += h;
            plus.set_from_vector(&v);
            v[j] -= 2.0 * h;
            minus.set_from_vector(&v);
            let sp = position(&plus, psi);
            let sm = position(&minus, psi);
            let vp = velocity(&plus, psi, psi_dot);
            let vm = velocity(&minus, psi, psi_dot);
            let tol = |a: f64, n: f64| 1e-6 * a.abs().max(n.abs()).max(1.0);
            let fd_sx = (sp.x - sm.x) / (2.0 * h);
            let fd_sy = (sp.y - sm.y) / (2.0 * h);
            let fd_vx = (vp.x - vm.x) / (2.0 * h);
            let fd_vy = (vp.y - vm.y) / (2.0 * h);
            assert!((ds.x[j] - fd_sx).abs() < tol(ds.x[j], fd_sx), "ds.x[{j}]");
            assert!((ds.y[j] - fd_sy).abs() < tol(ds.y[j], fd_sy), "ds.y[{j}]");
            assert!((dv.x[j] - fd_vx).abs() < tol(dv.x[j], fd_vx), "dv.x[{j}]");
            assert!((dv.y[j] - fd_vy).abs() < tol(dv.y[j], fd_vy), "dv.y[{j}]");
        }
    }

    #[test]
    fn ellipse_partials_match_fd() {
        let p = ellipse(3.0, 2.0, 2.0, 1.0, 0.0);
        let (ds, _) = param_partials(&p, 0.33, 1.0);
        assert_eq!(ds.x[0], 1.0);
        assert_eq!(ds.y[0], 0.0);
        let (ds, dv) = param_partials(&p, 0.0, 1.0);
        assert!((ds.x[2] - 1.0).abs() < 1e-12, "ds_x/da at psi=phi=0");
        assert!(dv.x[2].abs() < 1e-12, "dv_x/da at psi=phi=0");

        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let p = random_ellipse(&mut rng);
            check_partials_fd(&p, rng.gen_range(0.0..TAU), rng.gen_range(0.0..2.0));
        }
    }

    #[test]
    fn fourier_partials_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..100 {
            let p = random_fourier(&mut rng);
            check_partials_fd(&p, rng.gen_range(0.0..TAU), rng.gen_range(0.0..2.0));
        }
    }

    #[test]
    fn fourier_third_derivative_consistent() {
        // e3 must be the psi-derivative of e2 (checked by finite differences).
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let p = random_fourier(&mut rng);
            let psi = rng.gen_range(0.0..TAU);
            let h = 1e-6;
            let ev = p.eval(psi);
            let ep = p.eval(psi + h);
            let em = p.eval(psi - h);
            let fd2 = (ep.e1 - em.e1) * (1.0 / (2.0 * h));
            let fd3 = (ep.e2 - em.e2) * (1.0 / (2.0 * h));
            assert!((ev.e2 - fd2).norm() < 1e-5 * (1.0 + ev.e2.norm()));
            assert!((ev.e3 - fd3).norm() < 1e-5 * (1.0 + ev.e3.norm()));
        }
    }

    #[test]
    fn center_sensitivity_stays_zero() {
        let circle = ellipse(2.0, 2.0, 1.5, 1.5, 0.0);
        let sp = spec();
        let mut state = TrajectoryState::initial();
        let mut sens = PathSensitivity::zeros(5);
        for _ in 0..300 {
            let (out, new_sens) = path_sensitivity_step(&circle, &state, &sens, 0.01, &sp).unwrap();
            state = out.state;
            sens = new_sens;
            assert_eq!(sens.dpsi[0], 0.0);
            assert_eq!(sens.dpsi[1], 0.0);
            assert_eq!(sens.drate[0], 0.0);
        }
    }

    #[test]
    fn zero_dt_step_keeps_zero_sensitivity() {
        let p = ellipse(3.0, 2.0, 2.0, 1.0, 0.3);
        let state = TrajectoryState::initial();
        let sens = PathSensitivity::zeros(5);
        let (_, out) = path_sensitivity_step(&p, &state, &sens, 0.0, &spec()).unwrap();
        assert_eq!(out, PathSensitivity::zeros(5));
    }

    #[test]
    fn total_anomaly_sensitivity_matches_fd() {
        // Run the recursion long enough to include the v_max crossing, but
        // short enough that psi never wraps.
        let run = |params: &TrajectoryParams| -> (f64, PathSensitivity) {
            let sp = spec();
            let mut state = TrajectoryState::initial();
            let mut sens = PathSensitivity::zeros(params.param_count());
            for _ in 0..200 {
                let (out, new_sens) = path_sensitivity_step(params, &state, &sens, 0.01, &sp).unwrap();
                state = out.state;
                sens = new_sens;
            }
            (state.psi, sens)
        };
        let p = ellipse(3.0, 2.0, 2.0, 1.0, 0.3);
        let (_, sens) = run(&p);
        let h = 1e-6;
        for j in 0..5 {
            let mut v = p.to_vector();
            v[j] += h;
            let mut plus = p.clone();
            plus.set_from_vector(&v);
            v[j] -= 2.0 * h;
            let mut minus = p.clone();
            minus.set_from_vector(&v);
            let (psi_p, _) = run(&plus);
            let (psi_m, _) = run(&minus);
            let fd = (psi_p - psi_m) / (2.0 * h);
            assert!(
                (sens.dpsi[j] - fd).abs() <= 1e-4 * fd.abs().max(sens.dpsi[j].abs()).max(1e-3),
                "component {j}: analytic {} vs fd {fd}",
                sens.dpsi[j]
            );
        }
    }

    #[test]
    fn params_doc_round_trip() {
        let text = r#"{"family":"ellipse","agents":[{"X":3.8791,"Y":2.4675,"a":3.8994,"b":1.8926,"phi":-0.0066}]}"#;
        let params = load_params(text).unwrap();
        assert_eq!(params.len(), 1);
        match &params[0] {
            TrajectoryParams::Ellipse(e) => {
                assert_eq!(e.a, 3.8994);
                // Negative orientation normalizes into [0, 2*pi).
                assert!(e.phi >= 0.0 && e.phi < TAU);
            }
            _ => panic!("wrong family"),
        }

        let doc = ParamsDoc::from_params(&params).unwrap();
        let text2 = serde_json::to_string(&doc).unwrap();
        let again = load_params(&text2).unwrap();
        assert_eq!(params, again);
    }

    #[test]
    fn fourier_doc_validates_shape() {
        let text = r#"{"family":"fourier","agents":[{"fx":0.159,"fy":0.159,"a":[5.0,1.0,0.5],"b":[2.5,1.0,0.5],"phix":[0.1,0.2],"phiy":[0.3,0.4]}]}"#;
        let params = load_params(text).unwrap();
        assert_eq!(params[0].param_count(), 11);

        let bad = text.replace("\"phix\":[0.1,0.2]", "\"phix\":[0.1]");
        assert!(load_params(&bad).is_err());
    }
}
