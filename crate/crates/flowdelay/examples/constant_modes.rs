//! Contrast the two integration constants of the closed form.
//!
//! The `corrected` constant is pinned by the boundary condition that the
//! tail sum vanishes as b -> 0. A published derivation of this model uses
//! a different constant; `paper_literal` reproduces it, and the gap works
//! out to exactly C·(Ei(1) + 1 − γ)·e^(−b) — large enough at small loads
//! to push the "delay" past its hard upper bound of 1.

use flowdelay::model::{expected_delay_closed, ConstantMode, ModelParams};
use flowdelay::specfun::{EI_ONE, EULER_GAMMA};

fn main() {
    let shift = EI_ONE + 1.0 - EULER_GAMMA;
    println!("per-capacity constant shift: Ei(1) + 1 - gamma = {shift:.10}\n");
    println!("{:>8} {:>5} {:>16} {:>16} {:>13}", "b", "C", "corrected", "paper_literal", "predicted gap");

    for (b, c) in [(1.0, 10_u64), (1.0, 2), (2.0, 5), (5.0, 10), (10.0, 10)] {
        let params = ModelParams::new(1.0, b, c, 1.0).unwrap();
        let corrected = expected_delay_closed(&params, ConstantMode::Corrected)
            .unwrap()
            .normalized;
        let paper = expected_delay_closed(&params, ConstantMode::PaperLiteral)
            .unwrap()
            .normalized;
        let predicted = c as f64 * shift * (-b).exp();
        println!(
            "{b:>8.2} {c:>5} {corrected:>16.8e} {paper:>16.8e} {predicted:>13.4e}{}",
            if !(0.0..=1.0).contains(&paper) {
                "   <- outside [0, 1]"
            } else {
                ""
            }
        );
    }

    println!();
    println!("A normalized delay is a mean of per-packet values in [0, 1],");
    println!("so any value above 1 is impossible on its face — which is what");
    println!("flags the published constant at b = 1, C = 10.");
}
