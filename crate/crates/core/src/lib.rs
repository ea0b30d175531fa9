//! Dialogue management for identity-fraud detection over personal knowledge
//! graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`kg`]: world model, synthetic world generation, personal KGs and
//!   multiple-choice question rendering.
//! - [`dialogue`]: the reversed per-applicant dialogue graph and its one-hot
//!   node features.
//! - [`nn`]: a small reverse-mode tape over vectors, parameter storage,
//!   checkpoints and a finite-difference gradient checker.
//! - [`policy`]: graph message passing, the manager/worker policies, action
//!   masks and value networks.
//! - [`episode`]: the dialogue state machine shared by rules, neural agents
//!   and live sessions.
//! - [`simulator`]: the heuristic applicant simulator.
//! - [`rules`]: Flat Rule and Hierarchical Rule baselines.
//! - [`training`]: rewards, supervised pre-training and REINFORCE.
//! - [`eval`]: metrics, policy analysis and the ablation suite.
//! - [`session`] / [`service`] / [`cli`]: live play over HTTP or a terminal.
//!
//! Runnable walkthroughs of every capability live in `examples/`.

pub mod cli;
pub mod config;
pub mod dialogue;
pub mod episode;
pub mod error;
pub mod eval;
pub mod kg;
pub mod nn;
pub mod policy;
pub mod rng;
pub mod rules;
pub mod service;
pub mod session;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
