//! Outer gradient-descent loop: multi-start descent over trajectory
//! parameters with Armijo backtracking (or a fixed step), feasibility
//! projection after every update, and the objective-change termination
//! rule.

use crate::ipa::ParamLayout;
use crate::kinematics::{self, EllipseParams, Family, FourierParams, TrajectoryParams, B_MIN};
use crate::scenario::Scenario;
use crate::sensing::SensingModel;
use crate::simulator::{self, GradMode, SimError, SimOptions, SimResult};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;

/// Step-size rule for the descent update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed { alpha: f64 },
    Armijo { alpha0: f64, shrink: f64, c: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Armijo {
            alpha0: 1e-2,
            shrink: 0.5,
            c: 1e-4,
        }
    }
}

/// Options controlling one optimization run.
#[derive(Debug, Clone)]
pub struct OptOptions {
    /// Terminate a start when the objective changes by less than this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Hard bound on objective evaluations per start; a start that
    /// exhausts it (deep backtracking against penalty walls) keeps its
    /// best iterate so far.
    pub max_evals: usize,
    pub step_rule: StepRule,
    /// Cap on the parameter-space length of an Armijo trial step: the
    /// backtrack starts at `min(alpha0, step_cap / |grad|)`. Near
    /// collisions the penalty terms make gradients enormous, and an
    /// uncapped first trial would fling the trajectory across the mission
    /// space (often into a configuration that senses nothing and leaves
    /// descent stranded on a zero gradient).
    pub step_cap: f64,
    pub grad_mode: GradMode,
    pub sensing: SensingModel,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            epsilon: 0.01,
            max_iters: 500,
            max_evals: 700,
            step_rule: StepRule::default(),
            step_cap: 0.25,
            grad_mode: GradMode::Paper,
            sensing: SensingModel::Velocity,
        }
    }
}

/// One accepted iterate of one start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub start: usize,
    pub h: usize,
    pub j: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Step size that produced this iterate (zero for the initial point).
    pub alpha: f64,
    /// Gradient norm at this iterate.
    pub grad_norm: f64,
}

/// Outcome of a multi-start optimization.
#[derive(Debug, Clone)]
pub struct OptResult {
    pub best_params: Vec<TrajectoryParams>,
    pub best_j: f64,
    /// Which initialization won.
    pub start_index: usize,
    pub iterates: Vec<IterateRecord>,
    /// Full simulation at the best parameters (traces and events on).
    pub final_result: SimResult,
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("every start aborted on a kinematics error; first: {first}")]
    AllStartsFailed { first: String },
    #[error("no initializations supplied")]
    NoStarts,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Descent-metric weight of the Fourier base frequency. A frequency unit
/// moves every late-path position by roughly `2*pi*psi*sum(gamma*a)` (two
/// orders of magnitude more than an amplitude unit), and the objective
/// oscillates in the frequency at a matching micro scale. Stepping the
/// raw gradient lets that one coordinate capture the whole search, so
/// updates descend under a diagonal metric that restores comparable
/// per-coordinate position-effectiveness.
const FREQ_STEP_WEIGHT: f64 = 1e-2;

/// Per-component step weights for one agent (identity except the Fourier
/// base frequency).
fn step_weights(params: &TrajectoryParams) -> Vec<f64> {
    let mut w = vec![1.0; params.param_count()];
    if matches!(params, TrajectoryParams::Fourier(_)) {
        w[0] = FREQ_STEP_WEIGHT;
    }
    w
}

/// Clamps one agent's parameters back into its feasible set: orientation
/// angles wrap to `[0, 2*pi)`, ellipse axes respect their floors and
/// ordering, centers/offsets stay inside the mission space.
pub fn enforce_feasible(params: &mut TrajectoryParams, scenario: &Scenario) {
    let space = &scenario.space;
    match params {
        TrajectoryParams::Ellipse(e) => {
            e.phi = kinematics::wrap_angle(e.phi);
            e.b = e.b.max(B_MIN);
            e.a = e.a.max(e.b);
            e.cx = e.cx.clamp(0.0, space.l1);
            e.cy = e.cy.clamp(0.0, space.l2);
        }
        TrajectoryParams::Fourier(f) => {
            // The frequency ratio fixes the curve's shape class, and the
            // path parameter folds at 2*pi; far from the resonant ratio
            // the folded curve tears open. Keep the adjustable frequency
            // inside a window around the fixed one.
            f.fx = f.fx.clamp(0.95 * f.fy, 1.05 * f.fy).max(1e-3);
            f.a[0] = f.a[0].clamp(0.0, space.l1);
            f.b[0] = f.b[0].clamp(0.0, space.l2);
            for phase in f.phix.iter_mut().chain(f.phiy.iter_mut()) {
                *phase = kinematics::wrap_angle(*phase);
            }
        }
    }
}

/// Deterministic pseudo-random initial parameter draws for `count` starts.
///
/// Both families draw the same underlying loop: a random rotated ellipse
/// with its center uniform over the mission space and axes spanning up to
/// half the short side. The Fourier family encodes that loop into its
/// first harmonic (every rotated ellipse is exactly a one-harmonic Fourier
/// curve) and seeds the second harmonic with a small random perturbation,
/// so its starts cover the space as well as the ellipse starts do.
pub fn random_initializations(
    scenario: &Scenario,
    family: Family,
    count: usize,
    seed: u64,
) -> Vec<Vec<TrajectoryParams>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = &scenario.space;
    let axis_hi = (space.l1.min(space.l2) / 2.0).max(0.6);
    let mut starts = Vec::with_capacity(count);
    for _ in 0..count {
        let mut agents = Vec::with_capacity(scenario.num_agents());
        for _ in 0..scenario.num_agents() {
            let cx = rng.gen_range(0.0..space.l1);
            let cy = rng.gen_range(0.0..space.l2);
            let first = rng.gen_range(0.5..axis_hi);
            let second = rng.gen_range(0.5..axis_hi);
            let (a, b) = (first.max(second), first.min(second));
            let phi = rng.gen_range(0.0..TAU);
            match family {
                Family::Ellipse => {
                    agents.push(TrajectoryParams::Ellipse(EllipseParams::new(cx, cy, a, b, phi)));
                }
                Family::Fourier => {
                    // x = cx + a*cos(phi)*cos(psi) - b*sin(phi)*sin(psi)
                    //   = cx + A*sin(psi + dx), and similarly for y.
                    let (sf, cf) = phi.sin_cos();
                    let amp_x = (a * a * cf * cf + b * b * sf * sf).sqrt();
                    let phase_x = f64::atan2(a * cf, -b * sf);
                    let amp_y = (a * a * sf * sf + b * b * cf * cf).sqrt();
                    let phase_y = f64::atan2(a * sf, b * cf);
                    let ripple = |rng: &mut ChaCha8Rng| rng.gen_range(0.01..0.05);
                    agents.push(TrajectoryParams::Fourier(FourierParams {
                        fx: 1.0 / TAU,
                        fy: 1.0 / TAU,
                        a: vec![cx, amp_x, ripple(&mut rng)],
                        b: vec![cy, amp_y, ripple(&mut rng)],
                        phix: vec![kinematics::wrap_angle(phase_x), rng.gen_range(0.0..TAU)],
                        phiy: vec![kinematics::wrap_angle(phase_y), rng.gen_range(0.0..TAU)],
                    }));
                }
            }
        }
        starts.push(agents);
    }
    starts
}

struct StartOutcome {
    params: Vec<TrajectoryParams>,
    j: f64,
    iterates: Vec<IterateRecord>,
    warnings: Vec<String>,
}

/// Runs gradient descent from every supplied initialization and returns
/// the best outcome. Starts that fail on kinematics errors are skipped
/// (with a warning) unless every one of them fails.
pub fn optimize(
    scenario: &Scenario,
    inits: &[Vec<TrajectoryParams>],
    opts: &OptOptions,
) -> Result<OptResult, OptimizeError> {
    if inits.is_empty() {
        return Err(OptimizeError::NoStarts);
    }
    let mut outcomes: Vec<StartOutcome> = Vec::new();
    let mut warnings = Vec::new();
    let mut first_failure: Option<String> = None;
    for (start, init) in inits.iter().enumerate() {
        match run_start(scenario, init, opts, start) {
            Ok(outcome) => outcomes.push(outcome),
            Err(OptimizeError::Sim(e)) => {
                let msg = format!("start {start} aborted: {e}");
                log::warn!("{msg}");
                if first_failure.is_none() {
                    first_failure = Some(e.to_string());
                }
                warnings.push(msg);
            }
            Err(other) => return Err(other),
        }
    }
    if outcomes.is_empty() {
        return Err(OptimizeError::AllStartsFailed {
            first: first_failure.unwrap_or_else(|| "unknown".into()),
        });
    }

    // Lowest objective wins; ties resolve to the lowest start index.
    let mut best = 0;
    for (k, outcome) in outcomes.iter().enumerate() {
        if outcome.j < outcomes[best].j {
            best = k;
        }
    }
    let mut iterates = Vec::new();
    for outcome in &outcomes {
        iterates.extend(outcome.iterates.iter().cloned());
        warnings.extend(outcome.warnings.iter().cloned());
    }
    let winner = &outcomes[best];
    let final_result = simulator::simulate_with(
        scenario,
        &winner.params,
        SimOptions {
            grad_mode: opts.grad_mode,
            sensing: opts.sensing,
            record_traces: true,
            trace_stride: 1,
            record_schedule: false,
        },
    )?;
    Ok(OptResult {
        best_params: winner.params.clone(),
        best_j: winner.j,
        start_index: winner.iterates[0].start,
        iterates,
        final_result,
        warnings,
    })
}

fn run_start(
    scenario: &Scenario,
    init: &[TrajectoryParams],
    opts: &OptOptions,
    start: usize,
) -> Result<StartOutcome, OptimizeError> {
    let lean = |grad_mode: GradMode| SimOptions {
        grad_mode,
        sensing: opts.sensing,
        record_traces: false,
        trace_stride: 1,
        record_schedule: false,
    };
    let mut theta: Vec<TrajectoryParams> = init.to_vec();
    for p in theta.iter_mut() {
        enforce_feasible(p, scenario);
    }
    let layout = ParamLayout::new(&theta);
    let mut warnings = Vec::new();

    let mut current = simulator::simulate_with(scenario, &theta, lean(opts.grad_mode))?;
    let mut iterates = vec![record(start, 0, &current, 0.0)];
    // Track the best accepted iterate of this start (with a fixed step the
    // objective may go back up), preferring penalty-free iterates: a
    // marginally lower objective carrying an active deficit is not a
    // usable monitoring trajectory.
    let mut best_params = theta.clone();
    let mut best_j = current.j;
    let mut best_clean: Option<(Vec<TrajectoryParams>, f64)> =
        (current.j2 == 0.0 && current.j3 == 0.0).then(|| (theta.clone(), current.j));
    let mut warm_alpha = f64::INFINITY;
    let mut stagnant = 0usize;

    // Stacked per-component step weights.
    let weights: Vec<f64> = theta.iter().flat_map(|p| step_weights(p)).collect();
    let mut evals = 1usize;

    for h in 1..=opts.max_iters {
        if evals >= opts.max_evals {
            warnings.push(format!(
                "start {start}: evaluation budget exhausted at iterate {}",
                h - 1
            ));
            break;
        }
        let grad = &current.grad;
        if grad.iter().all(|g| *g == 0.0) {
            warnings.push(format!(
                "start {start}: zero gradient at iterate {} (no event excitation); terminating",
                h - 1
            ));
            break;
        }
        // Descent direction under the diagonal metric; the sufficient
        // decrease is measured along it (<g, d>) and the trust cap bounds
        // its parameter-space length (|d|).
        let direction: Vec<f64> = grad.iter().zip(&weights).map(|(g, w)| g * w).collect();
        let descent_rate: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        let dir_norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();

        let candidate_at = |alpha: f64| -> Vec<TrajectoryParams> {
            let mut next = theta.clone();
            for (n, p) in next.iter_mut().enumerate() {
                let off = layout.offset(n);
                let mut v = p.to_vector();
                for (j, vj) in v.iter_mut().enumerate() {
                    *vj -= alpha * direction[off + j];
                }
                p.set_from_vector(&v);
                enforce_feasible(p, scenario);
            }
            next
        };

        // Probes run with the gradient on so an accepted candidate's result
        // can seed the next iteration directly (gradient propagation adds
        // little on top of the forward pass).
        let accepted = match opts.step_rule {
            StepRule::Fixed { alpha } => {
                let next = candidate_at(alpha);
                let res = simulator::simulate_with(scenario, &next, lean(opts.grad_mode))?;
                evals += 1;
                Some((alpha, true, next, res))
            }
            StepRule::Armijo { alpha0, shrink, c } => {
                // The intended trial is the length-capped alpha0; the
                // backtrack itself warm-starts near the previously
                // accepted step (with room to grow back) so wall-hugging
                // phases do not rerun the whole backtrack every iteration.
                let intended = alpha0.min(opts.step_cap / dir_norm);
                let start_alpha = intended.min(warm_alpha * 16.0);
                let mut alpha = start_alpha;
                let mut found = None;
                // Give up once the step has shrunk past any useful scale
                // or the evaluation budget runs out.
                while alpha > start_alpha * 1e-12 && evals < opts.max_evals {
                    let next = candidate_at(alpha);
                    let probe = simulator::simulate_with(scenario, &next, lean(opts.grad_mode))?;
                    evals += 1;
                    if probe.j <= current.j - c * alpha * descent_rate {
                        found = Some((alpha, alpha == intended, next, probe));
                        break;
                    }
                    alpha *= shrink;
                }
                if let Some((alpha, ..)) = &found {
                    warm_alpha = *alpha;
                }
                found
            }
        };

        let Some((alpha, full_step, next, res)) = accepted else {
            // Line search exhausted: no acceptable descent step exists at
            // this scale, which is exactly a |dJ| < epsilon stop.
            break;
        };
        let delta = (res.j - current.j).abs();
        theta = next;
        current = res;
        iterates.push(record(start, h, &current, alpha));
        if current.j < best_j {
            best_j = current.j;
            best_params = theta.clone();
        }
        if current.j2 == 0.0 && current.j3 == 0.0 {
            let improved = best_clean.as_ref().map(|(_, j)| current.j < *j).unwrap_or(true);
            if improved {
                best_clean = Some((theta.clone(), current.j));
            }
        }
        // The objective-change stop only counts when it reflects a real
        // stationary point: the accepted step must be the method's full
        // trial (a wall-collapsed backtrack says nothing about progress at
        // scale) and no collision penalty may be active (collision-free
        // optima report both penalties as exact zeros). A long run of
        // sub-epsilon steps that never meet those conditions is a stall
        // against a penalty wall and stops too.
        if delta < opts.epsilon {
            if full_step && current.j2 == 0.0 && current.j3 == 0.0 {
                break;
            }
            stagnant += 1;
            if stagnant > 40 {
                break;
            }
        } else {
            stagnant = 0;
        }
    }

    let (params, j) = match best_clean {
        Some((params, j)) => (params, j),
        None => (best_params, best_j),
    };
    Ok(StartOutcome {
        params,
        j,
        iterates,
        warnings,
    })
}

fn record(start: usize, h: usize, res: &SimResult, alpha: f64) -> IterateRecord {
    IterateRecord {
        start,
        h,
        j: res.j,
        j1: res.j1,
        j2: res.j2,
        j3: res.j3,
        alpha,
        grad_norm: res.grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
    }
}

/// Writes the convergence log as CSV
/// (`start,h,J,J1,J2,J3,alpha,grad_norm`).
pub fn write_convergence_csv<W: Write>(iterates: &[IterateRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "start,h,J,J1,J2,J3,alpha,grad_norm")?;
    for it in iterates {
        writeln!(
            out,
            "{},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            it.start, it.h, it.j, it.j1, it.j2, it.j3, it.alpha, it.grad_norm
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{AgentSpec, Horizon, MissionSpace, PenaltyConfig, Target};

    fn small_scenario() -> Scenario {
        Scenario {
            space: MissionSpace { l1: 10.0, l2: 5.0 },
            targets: vec![
                Target { x: 4.0, y: 2.0, sigma: 1.0, growth: 1.0, r0: 0.0 },
                Target { x: 6.0, y: 3.0, sigma: 2.0, growth: 1.0, r0: 0.0 },
            ],
            obstacles: vec![],
            agents: vec![AgentSpec {
                u_max: 1.0,
                v_max: 1.5,
                r_sense: 2.0,
                beta: 5.0,
                rho: 0.2,
            }],
            penalties: PenaltyConfig { m2: -30000.0, m3: -30000.0, margin: 0.02 },
            horizon: Horizon { t: 8.0, dt: 0.01 },
            decay: 15.0,
        }
    }

    #[test]
    fn initializations_are_deterministic_and_feasible() {
        let sc = small_scenario();
        let a = random_initializations(&sc, Family::Ellipse, 5, 42);
        let b = random_initializations(&sc, Family::Ellipse, 5, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for start in &a {
            for p in start {
                match p {
                    TrajectoryParams::Ellipse(e) => {
                        assert!(e.a >= e.b && e.b >= B_MIN);
                        assert!((0.0..=sc.space.l1).contains(&e.cx));
                    }
                    _ => panic!("wrong family"),
                }
            }
        }
        // Distinct draws across starts.
        assert!(a.windows(2).all(|w| w[0] != w[1]));

        let f = random_initializations(&sc, Family::Fourier, 3, 7);
        for start in &f {
            match &start[0] {
                TrajectoryParams::Fourier(fp) => {
                    assert_eq!(fp.param_count(), 11);
                    assert!((fp.fx - 1.0 / TAU).abs() < 1e-15);
                    assert_eq!(fp.fx, fp.fy);
                }
                _ => panic!("wrong family"),
            }
        }
    }

    #[test]
    fn zero_gradient_start_terminates_immediately() {
        // Tiny ellipse tucked into a corner, far from both targets: the
        // agent never senses anything and the gradient never excites.
        let mut sc = small_scenario();
        sc.targets = vec![Target { x: 9.5, y: 4.5, sigma: 1.0, growth: 1.0, r0: 0.0 }];
        let init = vec![vec![TrajectoryParams::Ellipse(EllipseParams::new(
            1.0, 1.0, 0.6, 0.5, 0.0,
        ))]];
        let opts = OptOptions { max_iters: 50, ..OptOptions::default() };
        let res = optimize(&sc, &init, &opts).unwrap();
        let own: Vec<_> = res.iterates.iter().filter(|it| it.start == 0).collect();
        assert_eq!(own.len(), 1, "only the initial iterate is logged");
        assert!(res.warnings.iter().any(|w| w.contains("zero gradient")));
        assert_eq!(res.best_params, init[0]);
    }

    #[test]
    fn armijo_iterates_strictly_decrease() {
        let sc = small_scenario();
        let init = vec![vec![TrajectoryParams::Ellipse(EllipseParams::new(
            5.0, 2.5, 1.5, 1.0, 0.2,
        ))]];
        let opts = OptOptions { max_iters: 25, epsilon: 1e-4, ..OptOptions::default() };
        let res = optimize(&sc, &init, &opts).unwrap();
        let js: Vec<f64> = res.iterates.iter().map(|it| it.j).collect();
        assert!(js.len() > 2, "descent should make progress");
        for w in js.windows(2) {
            assert!(w[1] < w[0], "armijo accepted a non-decreasing step: {w:?}");
        }
        assert_eq!(res.best_j, *js.last().unwrap());
        // Feasibility of the result.
        match &res.best_params[0] {
            TrajectoryParams::Ellipse(e) => {
                assert!(e.a >= e.b && e.b >= B_MIN);
                assert!((0.0..TAU).contains(&e.phi));
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn termination_honors_epsilon_or_max_iters() {
        let sc = small_scenario();
        let init = vec![vec![TrajectoryParams::Ellipse(EllipseParams::new(
            5.0, 2.5, 1.5, 1.0, 0.2,
        ))]];
        let opts = OptOptions { max_iters: 4, epsilon: 1e-12, ..OptOptions::default() };
        let res = optimize(&sc, &init, &opts).unwrap();
        let last = res.iterates.last().unwrap();
        let deltas: Vec<f64> = res.iterates.windows(2).map(|w| (w[1].j - w[0].j).abs()).collect();
        let hit_eps = deltas.last().map(|d| *d < opts.epsilon).unwrap_or(false);
        assert!(last.h == opts.max_iters || hit_eps);
    }

    #[test]
    fn convergence_csv_schema() {
        let rows = vec![IterateRecord {
            start: 0,
            h: 0,
            j: 1.0,
            j1: 1.0,
            j2: 0.0,
            j3: 0.0,
            alpha: 0.0,
            grad_norm: 2.0,
        }];
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("start,h,J,J1,J2,J3,alpha,grad_norm\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
