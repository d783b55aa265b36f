//! Degrees-of-freedom and ergodic-rate analysis of half-duplex and
//! full-duplex MIMO links, relays and two-way relays under a residual
//! self-interference model `I = P^(1 - lambda) / (beta mu^lambda)`.

pub mod cli;
pub mod dof;
pub mod error;
pub mod hermitian;
pub mod mimo;
pub mod model;
pub mod rates;
pub mod region;
pub mod search;
pub mod slope;

pub use error::{Error, Result};
pub use mimo::{ergodic_rate, McConfig, RateEstimate};
pub use model::{antenna_allocation, residual_si_power, sinr, AntennaSplit, DuplexMode, LinkBudget, SiParams};
pub use region::{DofPoint, DofRegion};
