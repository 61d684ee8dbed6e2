//! Desk-scale 5G handover laboratory.
//!
//! A deterministic radio and mobility simulator produces multi-KPI measurement
//! streams that a from-scratch recurrent network learns handover decisions
//! from. The closed-loop driver then pits the learned policy against the
//! classical A3/HOM/TTT state machine.
//!
//! Module map:
//! - [`network`]: cell topology, propagation, measurement synthesis, network-side state
//! - [`mobility`]: UE movement (random waypoint, daily routine, stationary)
//! - [`baseline`]: A3 event state machine and radio link failure detection
//! - [`dataset`]: KPI record assembly, oracle labelling, scaling, splitting, CSV
//! - [`nn`]: activations, dense layers, RNN/LSTM cells, BPTT, optimizers, training
//! - [`engine`]: sliding-window inference plus the network-side policy layer
//! - [`sim`]: closed-loop driver, metrics and policy comparison
//! - [`config`]: scenario file schema

// Validation uses `!(x >= 0.0)` style checks on purpose: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod mobility;
pub mod network;
pub mod nn;
pub mod sim;
pub mod units;

pub use error::{Error, Result};
