//! Cooperative multi-agent Q-learning workbench.
//!
//! Each agent owns a small feed-forward Q-network trained with a shared,
//! factorized TD target: the per-agent rewards of every sampled transition
//! are combined into a team reward through a directed weighted relational
//! graph before entering the TD error. Self-interest graphs (one unit
//! self-loop per agent) reduce the scheme to plain additive value
//! decomposition; other graphs steer which cooperative equilibrium the
//! team converges to.
//!
//! The crate ships two families of deterministic simultaneous-move
//! environments (a 5x5 resource grid-world and a bridge-crossing world),
//! a from-scratch MLP/Adam stack, a replay memory, the training loop,
//! and an experiment harness that writes seeded, reproducible CSV reports.

pub mod config;
pub mod env;
pub mod eval;
pub mod experiments;
pub mod mixer;
pub mod neural;
pub mod relgraph;
pub mod replay;
pub mod trainer;
pub mod verify;

pub mod cli;

pub use relgraph::RelationalNetwork;
