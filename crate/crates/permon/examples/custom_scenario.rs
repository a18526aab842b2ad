//! Define a scenario as a JSON document, load it, and run it — the same
//! format the `permon` binary consumes via `--scenario <path>`.
//!
//! Run with: cargo run --release --example custom_scenario

use permon::kinematics::load_params;
use permon::scenario::load_scenario;
use permon::simulator::{simulate, GradMode};

const SCENARIO: &str = r#"{
    "space": {"L1": 8.0, "L2": 4.0},
    "targets": [
        {"x": 2.0, "y": 2.0, "sigma": 1.0, "A": 1.0, "R0": 0.0},
        {"x": 4.0, "y": 1.0, "sigma": 3.0, "A": 0.5, "R0": 2.0},
        {"x": 6.0, "y": 3.0, "sigma": 1.0, "A": 1.0, "R0": 0.0}
    ],
    "obstacles": [{"x": 4.0, "y": 3.2, "r": 0.5}],
    "agents": [{"u_max": 1.0, "v_max": 1.5, "r_sense": 2.0, "beta": 5.0, "rho": 0.2}],
    "penalties": {"M2": -30000.0, "M3": -30000.0, "margin": 0.02},
    "horizon": {"T": 20.0, "dt": 0.01},
    "B": 10.0
}"#;

const PARAMS: &str = r#"{
    "family": "ellipse",
    "agents": [{"X": 4.0, "Y": 1.8, "a": 2.2, "b": 1.0, "phi": 0.1}]
}"#;

fn main() {
    let scenario = load_scenario(SCENARIO).expect("scenario should validate");
    let params = load_params(PARAMS).expect("params should validate");

    let result = simulate(&scenario, &params, GradMode::None).expect("simulation failed");
    println!(
        "J = {:.4} (J1 = {:.4}, J2 = {:.6}, J3 = {:.6})",
        result.j, result.j1, result.j2, result.j3
    );
    for event in result.events.iter().take(5) {
        println!("event: {}", serde_json::to_string(event).unwrap());
    }
    println!("({} events total)", result.events.len());
}
