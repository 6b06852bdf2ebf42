//! System-level simulator for an LTE-A roadside-unit (RSU) network serving
//! vehicles on a multi-lane highway in the downlink.
//!
//! The pipeline per transmission time interval (TTI, 1 ms) is
//! scheduler → CQI → MCS → channel → MIESM → FER → HARQ → ACK/NACK.
//! Links are abstracted to per-PRB channel matrices and post-combining SINR;
//! no transmit symbols are ever generated.
//!
//! Module map:
//! - [`scenario`]: highway geometry, deployment, mobility, cell association
//! - [`channel`]: path loss, shadowing, tapped-delay-line fading, noise
//! - [`phy`]: MRC / LMMSE combining, precoder selection, per-PRB SINR
//! - [`l2s`]: MI curves, effective SINR, FER model, CQI, transport blocks
//! - [`mac`]: traffic, proportional-fair scheduling, HARQ
//! - [`engine`]: the TTI loop, metrics and aggregation
//! - [`config`], [`batch`], [`output`]: config files, experiment batches, CSV

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod batch;
pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod l2s;
pub mod mac;
pub mod output;
pub mod par;
pub mod phy;
pub mod scenario;

mod rng;

pub use error::{Error, Result};
