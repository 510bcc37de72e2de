//! Tour of the special-function layer underneath the delay model:
//! log-factorials, Poisson mass/distribution, and the exponential
//! integral in plain and overflow-free scaled form.

use flowdelay::specfun::{
    exp_integral_ei, exp_integral_ei_scaled, log_factorial, poisson_cdf, poisson_pmf, Accuracy,
};

fn main() {
    let acc = Accuracy::default();

    println!("ln(170!) = {:.12}  (170! itself overflows f64)", log_factorial(170));
    println!("ln(5000!) = {:.6}", log_factorial(5000));
    println!();

    let b = 50.0;
    println!("Poisson({b}) around its mode:");
    for n in [40_u64, 50, 60] {
        println!(
            "  P(N = {n}) = {:.6}   P(N <= {n}) = {:.6}",
            poisson_pmf(n, b),
            poisson_cdf(n, b)
        );
    }
    println!();

    // Ei switches from the ascending series to an asymptotic expansion at
    // x = 40; both are shown here.
    for x in [0.5, 1.0, 10.0, 100.0] {
        println!("Ei({x:>5}) = {:.12e}", exp_integral_ei(x, &acc).unwrap());
    }

    // Past x ~ 709, Ei(x) itself overflows, but the delay model only ever
    // needs e^(-x)·Ei(x) — which stays representable.
    let x = 5000.0;
    println!(
        "e^(-x) Ei({x}) = {:.12e}  (close to 1/x = {:.3e})",
        exp_integral_ei_scaled(x, &acc).unwrap(),
        1.0 / x
    );
}
