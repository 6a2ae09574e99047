//! Convolution calculus of fibred distributional kernels along singular foliations.

pub mod error;
pub mod expr;
pub mod flow;
pub mod foliation;
pub mod geometry;
pub mod kernel;
pub mod op;
pub mod bisubmersion;
pub mod cli;
pub mod config;
pub mod quadrature;
pub mod svg;
pub mod verify;

pub use error::{Error, Result};
