//! Mean-value analysis and flow-level simulation of size-based scheduling on a
//! single bottleneck link.
//!
//! The library models an M/G/1 queue fed by heavy-tailed flow sizes and compares
//! preemptive shortest-remaining-first service (with and without a fixed
//! per-flow scheduling delay) against FCFS. On top of the closed-form and
//! quadrature-based mean values it provides solvers for the two-class size
//! threshold below which flows should bypass the scheduler, and a deterministic
//! event-driven simulator that replays the same policies on sampled traces.

pub mod analysis;
mod error;
pub mod numeric;
pub mod sim;
pub mod threshold;
pub mod workload;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
