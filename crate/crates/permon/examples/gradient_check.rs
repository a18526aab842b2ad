//! Verify the event-driven analytic gradient against central finite
//! differences, in both gradient modes.
//!
//! Run with: cargo run --release --example gradient_check

use permon::kinematics::{EllipseParams, TrajectoryParams};
use permon::scenario::{AgentSpec, Horizon, MissionSpace, PenaltyConfig, Scenario, Target};
use permon::sensing::SensingModel;
use permon::simulator::GradMode;
use permon::validation::check;

fn main() {
    let scenario = Scenario {
        space: MissionSpace { l1: 10.0, l2: 5.0 },
        targets: vec![
            Target { x: 4.0, y: 2.0, sigma: 1.0, growth: 1.0, r0: 5.0 },
            Target { x: 6.0, y: 3.0, sigma: 2.0, growth: 1.0, r0: 5.0 },
        ],
        obstacles: vec![],
        agents: vec![AgentSpec { u_max: 1.0, v_max: 1.5, r_sense: 2.0, beta: 5.0, rho: 0.2 }],
        penalties: PenaltyConfig { m2: -30000.0, m3: -30000.0, margin: 0.02 },
        horizon: Horizon { t: 5.0, dt: 0.01 },
        decay: 15.0,
    };
    let params = vec![TrajectoryParams::Ellipse(EllipseParams::new(5.0, 2.5, 2.0, 1.2, 0.4))];

    for (mode, tol) in [(GradMode::Paper, 1e-3), (GradMode::Total, 1e-2)] {
        let report = check(&scenario, &params, mode, 1e-5, tol, SensingModel::Velocity)
            .expect("check failed");
        println!(
            "{} mode: {} (max rel error {:.3e}, tolerance {:.0e})",
            report.mode,
            if report.pass { "PASS" } else { "FAIL" },
            report.max_rel_error,
            report.tolerance
        );
        for c in &report.components {
            println!(
                "  {:<12} analytic {:+.6e}  numeric {:+.6e}  rel {:.2e}{}",
                c.name,
                c.analytic,
                c.numeric,
                c.rel_error,
                if c.excluded { "  [excluded: event crossing]" } else { "" }
            );
        }
    }
}
