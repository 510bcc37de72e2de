//! Evaluate the expected packet delay at one operating point, showing all
//! three evaluation routes and how closely they agree.

use flowdelay::model::{
    expected_delay, expected_delay_closed, expected_delay_direct, ConstantMode, ModelParams,
    SeriesOptions,
};

fn main() {
    // A density of 0.001 users/m² over 8 km² puts an expected 80 users in
    // the cell, against a 50-entry flow table and a 2 ms controller
    // round-trip.
    let params = ModelParams::new(1e-3, 8e4, 50, 2e-3).unwrap();
    let opts = SeriesOptions::default();

    let direct = expected_delay_direct(&params, &opts).unwrap();
    let closed = expected_delay_closed(&params, ConstantMode::Corrected).unwrap();
    let hybrid = expected_delay(&params, &opts).unwrap();

    println!(
        "load b = {:.1} users, capacity C = {}",
        params.mean_users(),
        params.capacity
    );
    println!(
        "direct series : {:.12}  (rigorous truncation bound {:.2e})",
        direct.normalized, direct.error_bound
    );
    println!("closed form   : {:.12}", closed.normalized);
    println!(
        "hybrid        : {:.12}  (dispatched as `{}`)",
        hybrid.normalized, hybrid.method
    );
    println!(
        "agreement     : |closed - direct| = {:.2e}",
        (closed.normalized - direct.normalized).abs()
    );
    println!("absolute delay: {:.4} ms per packet", hybrid.absolute * 1e3);
}
