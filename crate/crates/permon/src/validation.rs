//! Independent finite-difference oracles for the simulation gradients.
//!
//! Two comparison modes exist, matched to the two gradient modes:
//! `FrozenSchedule` re-simulates perturbed parameters against the path
//! schedule recorded from the base run (isolating the frozen-schedule
//! partial derivative), while `Full` re-runs the whole recursion.
//! Components whose probe runs see a different event multiset are
//! excluded from the pass/fail judgment — a difference quotient across an
//! event reordering does not estimate a derivative.

use crate::ipa::ParamLayout;
use crate::kinematics::TrajectoryParams;
use crate::sensing::SensingModel;
use crate::simulator::{self, GradMode, SimError, SimOptions, SimResult};
use crate::scenario::Scenario;
use serde::Serialize;

/// Which quantity the finite differences probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdMode {
    /// Replay the base run's path schedule under perturbed parameters.
    FrozenSchedule,
    /// Re-run the complete recursion under perturbed parameters.
    Full,
}

/// A central-difference gradient with per-component exclusion flags.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub values: Vec<f64>,
    /// True where the +/- probes saw different event multisets.
    pub excluded: Vec<bool>,
}

/// One parameter component's comparison entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentCheck {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Below the activity floor: too small on both sides to judge.
    pub inactive: bool,
    /// Excluded because the probes crossed an event boundary.
    pub excluded: bool,
}

/// Gradient check outcome: worst relative error over the judged
/// components and the verdict against the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub mode: String,
    pub h: f64,
    pub tolerance: f64,
    pub activity_floor: f64,
    pub max_rel_error: f64,
    pub pass: bool,
    pub components: Vec<ComponentCheck>,
}

/// Components with both analytic and numeric magnitude below this floor
/// never fail a check.
pub const ACTIVITY_FLOOR: f64 = 1e-12;

fn lean_opts(sensing: SensingModel) -> SimOptions {
    SimOptions {
        grad_mode: GradMode::None,
        sensing,
        record_traces: false,
        trace_stride: 1,
        record_schedule: false,
    }
}

/// Event multiset fingerprint: kinds and indices, times ignored.
fn event_fingerprint(res: &SimResult) -> Vec<(u8, usize, usize)> {
    let mut fp: Vec<(u8, usize, usize)> = res
        .events
        .iter()
        .map(|e| {
            let key = e.sort_key();
            (key.1, key.2, key.3)
        })
        .collect();
    fp.sort_unstable();
    fp
}

fn perturbed(params: &[TrajectoryParams], layout: &ParamLayout, k: usize, delta: f64) -> Vec<TrajectoryParams> {
    let mut out = params.to_vec();
    let mut remaining = k;
    for (n, p) in out.iter_mut().enumerate() {
        let len = layout.block_len(n);
        if remaining < len {
            let mut v = p.to_vector();
            v[remaining] += delta;
            p.set_from_vector(&v);
            break;
        }
        remaining -= len;
    }
    out
}

/// Central-difference objective gradient over the stacked parameter
/// vector.
pub fn fd_gradient(
    scenario: &Scenario,
    params: &[TrajectoryParams],
    h: f64,
    mode: FdMode,
    sensing: SensingModel,
) -> Result<FdGradient, SimError> {
    let layout = ParamLayout::new(params);
    let schedule = match mode {
        FdMode::FrozenSchedule => {
            let base = simulator::simulate_with(
                scenario,
                params,
                SimOptions {
                    record_schedule: true,
                    ..lean_opts(sensing)
                },
            )?;
            base.schedule
        }
        FdMode::Full => None,
    };
    let probe = |theta: &[TrajectoryParams]| -> Result<SimResult, SimError> {
        match &schedule {
            Some(schedule) => simulator::simulate_replay(scenario, theta, schedule, lean_opts(sensing)),
            None => simulator::simulate_with(scenario, theta, lean_opts(sensing)),
        }
    };
    let mut values = Vec::with_capacity(layout.total());
    let mut excluded = Vec::with_capacity(layout.total());
    for k in 0..layout.total() {
        let plus = probe(&perturbed(params, &layout, k, h))?;
        let minus = probe(&perturbed(params, &layout, k, -h))?;
        values.push((plus.j - minus.j) / (2.0 * h));
        excluded.push(event_fingerprint(&plus) != event_fingerprint(&minus));
    }
    Ok(FdGradient { values, excluded })
}

/// Runs the matched analytic/numeric comparison: the frozen-schedule
/// oracle checks the frozen-schedule gradient mode, the full oracle checks
/// the total mode.
pub fn check(
    scenario: &Scenario,
    params: &[TrajectoryParams],
    grad_mode: GradMode,
    h: f64,
    tolerance: f64,
    sensing: SensingModel,
) -> Result<GradCheckReport, SimError> {
    let fd_mode = match grad_mode {
        GradMode::Paper | GradMode::None => FdMode::FrozenSchedule,
        GradMode::Total => FdMode::Full,
    };
    let analytic_mode = match grad_mode {
        GradMode::None => GradMode::Paper,
        other => other,
    };
    let analytic = simulator::simulate_with(
        scenario,
        params,
        SimOptions {
            grad_mode: analytic_mode,
            ..lean_opts(sensing)
        },
    )?;
    let numeric = fd_gradient(scenario, params, h, fd_mode, sensing)?;

    let mut names = Vec::new();
    for (n, p) in params.iter().enumerate() {
        for name in p.component_names() {
            names.push(format!("agent{n}.{name}"));
        }
    }

    let mut components = Vec::with_capacity(names.len());
    let mut max_rel = 0.0_f64;
    for (k, name) in names.into_iter().enumerate() {
        let a = analytic.grad[k];
        let n = numeric.values[k];
        let abs_error = (a - n).abs();
        let scale = a.abs().max(n.abs());
        let rel_error = if scale > 0.0 { abs_error / scale } else { 0.0 };
        let inactive = a.abs() <= ACTIVITY_FLOOR && n.abs() <= ACTIVITY_FLOOR;
        let excluded = numeric.excluded[k];
        if !inactive && !excluded {
            max_rel = max_rel.max(rel_error);
        }
        components.push(ComponentCheck {
            name,
            analytic: a,
            numeric: n,
            abs_error,
            rel_error,
            inactive,
            excluded,
        });
    }
    Ok(GradCheckReport {
        mode: format!("{analytic_mode}"),
        h,
        tolerance,
        activity_floor: ACTIVITY_FLOOR,
        max_rel_error: max_rel,
        pass: max_rel <= tolerance,
        components,
    })
}
