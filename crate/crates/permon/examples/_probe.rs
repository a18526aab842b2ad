use permon::kinematics::Family;
use permon::optimizer::{optimize, random_initializations, OptOptions};
use permon::scenario::{builtin_case_a, builtin_case_b};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let case = args.get(1).map(|s| s.as_str()).unwrap_or("a");
    let family = if args.get(2).map(|s| s.as_str()) == Some("fourier") { Family::Fourier } else { Family::Ellipse };
    let starts: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(16);
    let seed0: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
    let seeds: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(3);
    let sc = if case == "a" { builtin_case_a() } else { builtin_case_b() };
    for seed in seed0..seed0 + seeds {
        let inits = random_initializations(&sc, family, starts, seed);
        let t0 = Instant::now();
        match optimize(&sc, &inits, &OptOptions::default()) {
            Ok(res) => println!(
                "case {case} {family} starts={starts} seed {seed}: best J = {:.2} (start {}), J2={:.6} J3={:.6}, pair={:?} obst={:?}, {:?}",
                res.best_j, res.start_index, res.final_result.j2, res.final_result.j3,
                res.final_result.diagnostics.min_pair_distance.map(|d| (d * 1000.0).round() / 1000.0),
                res.final_result.diagnostics.min_obstacle_distance.map(|d| (d * 1000.0).round() / 1000.0),
                t0.elapsed()
            ),
            Err(e) => println!("case {case} seed {seed}: ERROR {e}"),
        }
    }
}
