// SPDX-License-Identifier: MIT OR Apache-2.0

//! Token-erasure analysis of transformer hidden states.
//!
//! The crate trains linear probes that recover nearby token identities from
//! a layer's hidden states, measures how much of that information is lost
//! between an early and a later layer, and uses the loss pattern to segment
//! documents into multi-token lexical units. Segments that recur across a
//! corpus form the model's implicit vocabulary.
//!
//! Pipeline: [`store`] → [`probe`] → [`scoring`] → [`segment`] → [`vocab`],
//! with [`reports`] for probe-accuracy breakdowns and rendered output.

pub mod annotations;
pub mod error;
pub mod probe;
pub mod reports;
pub mod scoring;
pub mod segment;
pub mod store;
pub mod synthetic;
pub mod vocab;

pub use error::{Error, Result};
