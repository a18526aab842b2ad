//! Fourier-series trajectories: richer closed curves than ellipses, with
//! the x/y frequency ratio held fixed and everything else free.
//!
//! Run with: cargo run --release --example fourier_trajectories

use permon::kinematics::{position, Family, TrajectoryParams};
use permon::optimizer::{optimize, random_initializations, OptOptions};
use permon::scenario::builtin_case_a;

fn main() {
    let scenario = builtin_case_a();
    let starts = random_initializations(&scenario, Family::Fourier, 8, 11);
    let result = optimize(&scenario, &starts, &OptOptions::default()).expect("optimization failed");

    println!(
        "best J = {:.4} (J2 = {:.6}, J3 = {:.6})",
        result.best_j, result.final_result.j2, result.final_result.j3
    );
    if let TrajectoryParams::Fourier(f) = &result.best_params[0] {
        println!("fx = {:.5} (fy fixed at {:.5})", f.fx, f.fy);
        println!("x offsets/amplitudes: {:?}", f.a.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
        println!("y offsets/amplitudes: {:?}", f.b.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    }

    // A coarse sketch of the final curve.
    println!("curve samples (psi -> position):");
    for k in 0..8 {
        let psi = k as f64 * std::f64::consts::TAU / 8.0;
        let p = position(&result.best_params[0], psi);
        println!("  {:>4.2} -> ({:6.3}, {:6.3})", psi, p.x, p.y);
    }
}
