//! Multiple-choice reading comprehension by ranking answer hypotheses against
//! a passage with semantic, word-by-word and sliding-window perspectives.

pub mod config;
pub mod corpus;
pub mod depgraph;
pub mod error;
pub mod evidence;
pub mod harness;
pub mod lexicon;
pub mod numerics;
pub mod perspectives;
pub mod scorer;
pub mod synthetic;

pub use error::{Error, Result};
