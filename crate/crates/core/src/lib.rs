//! Minimal-context extractive question answering.
//!
//! A sentence selector scores every sentence of a document against the
//! question; a selection policy keeps a few of them; a lightweight span
//! reader answers from the merged selection only.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod corpus;
pub mod embed;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod exec;
pub mod neural;
pub mod pipeline;
pub mod policy;
pub mod reader;
pub mod retrieval;
pub mod rng;
pub mod selector;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
