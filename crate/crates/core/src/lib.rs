//! Adaptive episode-length control for cooperative multi-agent Q-learning.
//!
//! The crate is split along the lines of a typical experiment stack:
//!
//! * [`envs`] - Dec-POMDP environments (modified predator-prey, dead-end chain).
//! * [`autodiff`] - a small reverse-mode tape over dense 2-D tensors.
//! * [`learners`] - recurrent agent Q-networks, VDN/QMIX mixers, replay and TD updates.
//! * [`aela`] - the entropy-trend episode-length controller.
//! * [`theory`] - closed forms for secure-state visits and regret, with Monte Carlo oracles.
//! * [`harness`] - the training loop, evaluation, metrics, configuration and CLI.

pub mod aela;
pub mod autodiff;
pub mod envs;
pub mod harness;
pub mod learners;
pub mod rng;
pub mod theory;
