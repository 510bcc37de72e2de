//! Reproduce the delay-versus-cell-area sweep and write its artifacts
//! (CSV, SVG chart, manifest) under target/.

use flowdelay::output::emit_outputs;
use flowdelay::sweep::{run_sweep_area, SweepSpec};
use std::path::Path;

fn main() {
    // The default spec is the reproduction preset: lambda_u = 1e-3 /m²,
    // C in {10, 50, 100}, area log-spaced over [1e3, 1e6] m².
    let spec = SweepSpec::default();
    let rows = run_sweep_area(&spec).unwrap();

    println!("{} rows; a sample along the C = 50 curve:", rows.len());
    for row in rows.iter().filter(|r| r.capacity == 50).step_by(12) {
        println!(
            "  A = {:>9.0} m²  b = {:>6.1}  normalized delay = {:.6}",
            row.area_m2, row.b, row.normalized_delay
        );
    }

    let dest = Path::new("target/sweep-area-demo");
    let written = emit_outputs(&rows, None, &spec, dest, false).unwrap();
    println!("wrote:");
    for path in written {
        println!("  {}", path.display());
    }
}
