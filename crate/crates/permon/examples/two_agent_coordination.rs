//! Two cooperating agents on the built-in Case B scenario (heavier
//! targets along the x = 5 column), with inter-agent and obstacle
//! clearance reporting.
//!
//! Run with: cargo run --release --example two_agent_coordination

use permon::kinematics::Family;
use permon::optimizer::{optimize, random_initializations, OptOptions};
use permon::scenario::builtin_case_b;

fn main() {
    let scenario = builtin_case_b();
    let starts = random_initializations(&scenario, Family::Ellipse, 8, 4);
    let result = optimize(&scenario, &starts, &OptOptions::default()).expect("optimization failed");

    println!("best J = {:.4}", result.best_j);
    for (n, params) in result.best_params.iter().enumerate() {
        println!("agent {n}: {params:?}");
    }
    let diag = &result.final_result.diagnostics;
    println!(
        "minimum inter-agent distance: {:.4} (safety threshold 0.40)",
        diag.min_pair_distance.unwrap()
    );
    println!(
        "minimum obstacle distance:    {:.4} (safety threshold 1.20)",
        diag.min_obstacle_distance.unwrap()
    );
    println!(
        "penalties: J2 = {:.6}, J3 = {:.6}",
        result.final_result.j2, result.final_result.j3
    );
}
