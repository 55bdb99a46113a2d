//! Performance analysis of non-beacon IEEE 802.15.4 star networks running
//! unslotted CSMA/CA with acknowledgements and retransmissions.
//!
//! The same eight metrics (CCA probability, busy probability, throughput,
//! reliability and four delays) are obtained three ways:
//!
//! * [`analytical`] + [`metrics`] + [`queueing`]: closed-form Markov chain and
//!   M/M/1/k analysis around a coupled fixed point,
//! * [`simulator`]: a mini-slot Monte Carlo simulation of the MAC,
//! * [`predictor`]: a small feed-forward network trained on analytical data
//!   to invert the model (predict `N`, `PS` or `TVS` from the rest).
//!
//! [`dataset`] ties them together with parameter sweeps, CSV persistence
//! and analytical-vs-simulated comparison tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod analytical;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod network;
pub mod predictor;
pub mod queueing;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use network::{NetworkConfig, PerformanceReport, ProtocolConstants, Source, TrafficMode};
