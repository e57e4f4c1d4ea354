//! Physics-informed neural networks for elliptic interface problems.
//!
//! One shared multilayer perceptron serves every subdomain; subdomains differ
//! only in their activation, either by a trainable slope (`adai` mode) or by a
//! fixed choice of activation function (`ipinn` mode).

pub mod activations;
pub mod autodiff;
pub mod loss;
pub mod network;
pub mod problems;
pub mod sampling;
pub mod config;
pub mod training;
pub mod cli;
