//! Coverage probability of RIS-assisted indoor THz networks, evaluated both
//! from the stochastic-geometry integrals and by Monte-Carlo simulation.

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod config;
pub mod exec;
pub mod montecarlo;
pub mod quadrature;
