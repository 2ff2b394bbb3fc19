//! Take-over time prediction from windows of frame-wise driver-state features.
//!
//! The crate covers the full experimental loop: the feature schema
//! ([`features`]), annotated events with TOR-offset augmentation and a
//! synthetic generator ([`dataset`]), recurrent models trained with exact
//! backpropagation through time ([`model`]), evaluation and ablation
//! protocols ([`eval`]) and the hand-over rule with streaming prediction
//! ([`decision`]).

pub mod dataset;
pub mod decision;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;

pub use error::{Error, Result};
