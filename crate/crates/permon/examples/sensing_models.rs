//! Compare the speed-aware sensing model against the distance-only one on
//! identical trajectories. Ignoring the speed penalty always makes the
//! uncertainty outcome look at least as good as it really is.
//!
//! Run with: cargo run --release --example sensing_models

use permon::kinematics::{EllipseParams, TrajectoryParams};
use permon::scenario::builtin_case_a;
use permon::sensing::SensingModel;
use permon::simulator::{simulate_with, GradMode, SimOptions};

fn main() {
    let scenario = builtin_case_a();
    let params = vec![TrajectoryParams::Ellipse(EllipseParams::new(
        3.8791, 2.4675, 3.8994, 1.8926, 0.0,
    ))];

    let mut results = Vec::new();
    for sensing in [SensingModel::Velocity, SensingModel::DistanceOnly] {
        let res = simulate_with(
            &scenario,
            &params,
            SimOptions {
                grad_mode: GradMode::None,
                sensing,
                ..SimOptions::default()
            },
        )
        .expect("simulation failed");
        println!("{sensing:<14} J = {:.4}", res.j);
        results.push(res.j);
    }
    println!(
        "distance-only is {:.1}% more optimistic on the same trajectory",
        100.0 * (results[0] - results[1]) / results[0]
    );
}
