//! Functional controllability and observability of linear time-invariant systems.

pub mod catalog;
pub mod criteria;
pub mod error;
pub mod io;
pub mod numlin;
pub mod reproduce;
pub mod sim;
pub mod synthesis;

pub use error::{Error, Result};
