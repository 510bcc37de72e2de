//! Sweep the matched-load condition b = C: the table is sized exactly to
//! the expected user count, and the delay still decays only slowly.

use flowdelay::output::emit_outputs;
use flowdelay::sweep::{run_sweep_matched_capacity, Mode, SweepSpec};
use std::path::Path;

fn main() {
    let spec = SweepSpec {
        mode: Mode::SweepMatchedCapacity,
        ..SweepSpec::default()
    };
    let rows = run_sweep_matched_capacity(&spec).unwrap();

    let at = |c: u64| {
        rows.iter()
            .find(|r| r.capacity == c)
            .unwrap()
            .normalized_delay
    };
    for c in [1, 2, 5, 10, 20, 50, 100] {
        println!("C = b = {c:>3}:  normalized delay = {:.6}", at(c));
    }
    println!(
        "drop over [1, 10] = {:.4}; drop over [10, 100] = {:.4}",
        at(1) - at(10),
        at(10) - at(100)
    );
    println!(
        "central-limit comparison at C = 100: 1/sqrt(2*pi*100) = {:.6}",
        1.0 / (2.0 * std::f64::consts::PI * 100.0).sqrt()
    );

    let dest = Path::new("target/sweep-matched-demo");
    let written = emit_outputs(&rows, None, &spec, dest, false).unwrap();
    println!("wrote:");
    for path in written {
        println!("  {}", path.display());
    }
}
