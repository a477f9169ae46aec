//! Finite-difference verification of every differentiable op and of one full block, in f64.
//!
//! ```text
//! cargo run --release --example gradient_check -- 10
//! ```

use mtl_mood::gradprobe::{run_all, PROBE_TOLERANCE};

fn main() -> Result<(), mtl_mood::tensor::TensorError> {
    let points = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    println!("central differences, {points} random points per op, tolerance {PROBE_TOLERANCE:e}");
    let mut all_passed = true;
    for r in run_all(points, 2024)? {
        all_passed &= r.passed();
        println!(
            "{:<32} {:>4} params  max rel error {:.3e}  {}",
            r.probe.name(),
            r.parameters,
            r.worst.max_rel_error,
            if r.passed() { "ok" } else { "FAILED" }
        );
    }
    if !all_passed {
        std::process::exit(1);
    }
    Ok(())
}
