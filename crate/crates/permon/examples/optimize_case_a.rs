//! Multi-start gradient descent over elliptical trajectories on the
//! built-in one-agent scenario.
//!
//! Run with: cargo run --release --example optimize_case_a

use permon::kinematics::Family;
use permon::optimizer::{optimize, random_initializations, OptOptions};
use permon::scenario::builtin_case_a;

fn main() {
    let scenario = builtin_case_a();
    let starts = random_initializations(&scenario, Family::Ellipse, 8, 7);
    let opts = OptOptions::default();

    let result = optimize(&scenario, &starts, &opts).expect("optimization failed");

    println!(
        "winner: start {} with J = {:.4} (J2 = {:.6}, J3 = {:.6})",
        result.start_index, result.best_j, result.final_result.j2, result.final_result.j3
    );
    println!("parameters: {:?}", result.best_params[0]);
    for warning in &result.warnings {
        println!("note: {warning}");
    }

    // Per-start convergence summary.
    for s in 0..starts.len() {
        let own: Vec<_> = result.iterates.iter().filter(|it| it.start == s).collect();
        if let (Some(first), Some(last)) = (own.first(), own.last()) {
            println!(
                "start {s}: J {:.1} -> {:.1} over {} iterates",
                first.j,
                last.j,
                own.len() - 1
            );
        }
    }
}
