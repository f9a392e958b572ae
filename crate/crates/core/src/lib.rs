//! Coexistence laboratory for Wi-Fi 6E and 5G NR-U sharing one 20 MHz
//! channel in the 6 GHz band.
//!
//! The crate has two independent routes to per-node downlink throughput:
//!
//! * [`sim`]: a discrete-event simulator of both channel-access protocols
//!   ([`mac::wifi`] CSMA/CA and [`mac::nru`] Type-1 LBT with reservation
//!   signals) over a shared medium with threshold-SINR reception.
//! * [`analytic`]: a closed-form Bianchi-style model evaluated per scenario
//!   realization.
//!
//! Both consume the same [`scenario::Scenario`] realizations and the same
//! [`propagation::LinkBudget`] and [`phy::RateTable`], so their outputs are
//! directly comparable. [`metrics`] folds per-realization results into
//! per-network means, confidence intervals and Jain's fairness index.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod phy;
pub mod propagation;
pub mod scenario;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
pub use scenario::{Building, Node, Point, Scenario, Tech};
pub use units::SimTime;
