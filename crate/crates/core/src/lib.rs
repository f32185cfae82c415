//! Weakly supervised event-duration toolkit.
//!
//! Harvests duration-bearing sentences from raw text and labels them
//! automatically ([`extract`]), converts annotated event and QA data into
//! masked inputs ([`adapters`]), trains exact-value and unit-range duration
//! heads over a pluggable encoder ([`model`]) and scores predictions under
//! coarse, fine-grained and QA protocols ([`eval`]).

pub mod adapters;
pub mod duration;
pub mod error;
pub mod eval;
pub mod extract;
pub mod model;
pub mod synth;
pub mod tokens;

pub use duration::{CoarseLabel, LogSeconds, TemporalUnit, UnitInventory};
pub use error::{Error, ErrorKind, Result};
