//! Link-level study of chase-combining HARQ with selective subcarrier
//! retransmission (CCSR) over OFDM with Rayleigh fading.
//!
//! The receiver marks subcarriers whose channel power falls below a threshold
//! `tau`; the symbols carried on those subcarriers are retransmitted over fresh
//! channel realizations and jointly detected by maximum-ratio combining across
//! everything received so far. The crate provides:
//!
//! - closed-form upper bounds on the detection BER after any number of rounds,
//!   and the matching lower bound on ARQ throughput ([`analysis`]),
//! - exhaustive-search threshold optimization ([`optimizer`]),
//! - a Monte Carlo simulator with deterministic parallelism ([`sim`]),
//! - an optional rate-1/2 LDPC coded track ([`fec`]),
//! - a command line front end (`ccsr` binary).

pub mod analysis;
pub mod channel;
pub mod cli;
pub mod config;
pub mod fec;
pub mod optimizer;
pub mod phy;
pub mod protocol;
pub mod sim;

pub use config::{make_rng, snr_to_n0, ModulationSpec, NoiseSpec, ProtocolConfig};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("throughput series diverges: {0}")]
    Divergence(String),
    #[error("round cap exceeded: {0}")]
    RoundCap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
