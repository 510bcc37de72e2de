//! Expected packet-delay model for an SDN base station whose flow table can
//! cache rules for at most `capacity` users, while the number of users in the
//! cell is Poisson distributed with mean `b = lambda_u * area`.
//!
//! A packet whose user has no cached rule pays a controller round trip
//! `d_ctrl`; with `n` users present and a full table, the per-packet expected
//! delay is `(1 - capacity/n) * d_ctrl`. This crate evaluates the mean of
//! that quantity over the user distribution three mutually checking ways:
//!
//! * a direct tail series with a rigorous truncation bound
//!   ([`model::expected_delay_direct`]),
//! * a closed form built on the exponential integral Ei
//!   ([`model::expected_delay_closed`]), and
//! * a seeded Monte Carlo simulator ([`sim::estimate_expected_delay`]).
//!
//! [`model::expected_delay`] picks between the first two automatically and is
//! the right entry point for most callers.
//!
//! ```
//! use flowdelay::model::{expected_delay, ModelParams, SeriesOptions};
//!
//! // 10^-3 users per square meter over 10^5 m^2: 100 users expected, with
//! // room for 80 cached rules and a 1 ms controller round trip.
//! let params = ModelParams::new(1e-3, 1e5, 80, 1e-3).unwrap();
//! let delay = expected_delay(&params, &SeriesOptions::default()).unwrap();
//! assert!(delay.normalized > 0.0 && delay.normalized < 1.0);
//! assert!((delay.absolute - delay.normalized * 1e-3).abs() < 1e-18);
//! ```
//!
//! Each major capability has a runnable example:
//!
//! * `cargo run --example eval_point` — one configuration, all three routes
//! * `cargo run --example sweep_area` — delay vs cell area, several capacities
//! * `cargo run --example sweep_matched_capacity` — capacity sized to the mean
//! * `cargo run --example monte_carlo` — seeded simulation with a 95% CI
//! * `cargo run --example constant_modes` — the integration-constant audit
//! * `cargo run --example special_functions` — the numerics underneath
//!
//! The `flowdelay` binary wraps the same entry points as subcommands (`eval`,
//! `sweep-area`, `sweep-capacity`, `simulate`, `validate`) and writes CSV,
//! SVG, and manifest files; see the README for the flag reference.

pub mod error;
pub mod model;
pub mod output;
pub mod sim;
pub mod specfun;
pub mod sweep;

pub use error::{Error, Result};
