//! Discrete and continuum models of positive and negative walls piling up
//! against a barrier.

pub mod cell;
pub mod config;
pub mod continuum;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod flow;
pub mod measures;
pub mod optim;
pub mod potentials;
pub mod quadrature;
pub mod reproduce;
pub mod separated;
pub mod summation;
pub mod verify;

pub use error::{Error, Result};
