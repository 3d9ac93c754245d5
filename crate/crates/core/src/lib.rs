//! Exact pure-strategy Nash equilibrium synthesis for concurrent
//! discounted-sum games with satisficing and multi-satisficing goals.

pub mod cli;
pub mod comparator;
pub mod deviation;
pub mod epsilon;
pub mod error;
pub mod game;
pub mod goal;
pub mod product;
pub mod random;
pub mod rational;
pub mod search;
pub mod witness;

pub use error::{Error, Result};
