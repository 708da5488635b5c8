//! Frank-Wolfe family solvers for static user-equilibrium traffic assignment
//! under the Beckmann model with BPR link costs.
//!
//! ```no_run
//! use traffic_fw::{network, solver};
//!
//! let net = network::parse_net(&std::fs::read_to_string("SiouxFalls_net.tntp")?)?;
//! let dm = network::parse_trips(&std::fs::read_to_string("SiouxFalls_trips.tntp")?)?;
//! let config = solver::SolverConfig::nfw(3).with_max_iter(500);
//! let result = solver::solve(&net, &dm, &config, &mut |_| {})?;
//! println!("{:?}", result.final_rgap);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// `!(x > 0.0)` is used on purpose so that NaN lands in the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod bench;
pub mod cost;
pub mod line_search;
pub mod metrics;
pub mod network;
pub mod numeric;
pub mod solver;
