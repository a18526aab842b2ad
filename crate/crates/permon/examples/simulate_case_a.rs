//! Forward-simulate the built-in one-agent scenario on a fixed elliptical
//! trajectory and export the run artifacts (trace CSV, event log).
//!
//! Run with: cargo run --release --example simulate_case_a

use permon::kinematics::{EllipseParams, TrajectoryParams};
use permon::scenario::builtin_case_a;
use permon::simulator::{export_traces, simulate, GradMode};

fn main() {
    let scenario = builtin_case_a();
    // A near-optimal ellipse for this scenario.
    let params = vec![TrajectoryParams::Ellipse(EllipseParams::new(
        3.8791, 2.4675, 3.8994, 1.8926, 0.0,
    ))];

    let result = simulate(&scenario, &params, GradMode::Paper).expect("simulation failed");

    println!("objective J  = {:.4}", result.j);
    println!("  uncertainty J1 = {:.4}", result.j1);
    println!("  agent penalty  J2 = {:.6}", result.j2);
    println!("  obstacle penalty J3 = {:.6}", result.j3);
    println!("events: {}", result.events.len());
    if let Some(d) = result.diagnostics.min_obstacle_distance {
        println!("closest obstacle approach: {d:.4}");
    }
    println!(
        "gradient (X, Y, a, b, phi): {:?}",
        result.grad.iter().map(|g| format!("{g:+.3}")).collect::<Vec<_>>()
    );

    let out = std::path::Path::new("target/simulate_case_a");
    export_traces(&result, out).expect("export failed");
    println!("trace.csv and events.jsonl written to {}", out.display());
}
