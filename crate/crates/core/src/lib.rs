//! Agent-based simulator of cooperative investment games on small-world
//! networks.
//!
//! Agents live on a Watts-Strogatz graph, sponsor risky joint projects with
//! acquaintances, pay progressive taxes on profits, and receive tiered
//! subsidies from a central welfare fund when they fall below a guaranteed
//! minimum. Participants may betray a project and abscond with its stakes at
//! the price of a temporary blacklist. An optional feedback controller
//! adjusts tax rates and the guaranteed minimum in response to the fund's
//! balance.
//!
//! The crate is organised bottom-up: [`topology`] builds the contact graph,
//! [`agents`] holds per-agent state and contact bookkeeping, [`economy`]
//! implements taxation and welfare policy, [`game`] implements a single
//! project's lifecycle, [`engine`] advances whole-world ticks, and [`sweep`]
//! runs batches of simulations over parameter grids. All randomness flows
//! from one master seed, so every run is reproducible byte for byte.

pub mod agents;
pub mod config;
pub mod economy;
pub mod engine;
pub mod game;
pub mod output;
pub mod sweep;
pub mod topology;

/// Unified error type for the simulator.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// A structural parameter violated its documented constraint.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A graph operation required a connected graph and did not get one.
    #[error("graph is disconnected")]
    DisconnectedGraph,

    /// A configuration or sweep document failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An internally inconsistent outcome was handed to a settlement or
    /// bookkeeping routine.
    #[error("inconsistent outcome: {0}")]
    InconsistentOutcome(String),

    /// An I/O failure while reading inputs or writing run outputs.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
