//! Core library for reconstructing training batches from average gradients of
//! ReLU fully-connected networks, and for constructing gradient-identical
//! artifact batches when reconstruction is provably non-unique.
//!
//! The crate is organized around the lifecycle of a gradient-leakage
//! experiment:
//!
//! - [`linalg`]: dense/sparse numerical primitives (pseudoinverse, null-space
//!   bases, LSMR least squares, Hungarian assignment).
//! - [`model`]: the ReLU FCN engine — forward pass with activation-pattern
//!   capture, closed-form per-sample and average gradients, exclusivity
//!   reduction, and DPSGD-style gradient obfuscation.
//! - [`exclusivity`]: exclusively-activated-neuron (ExAN) counting and
//!   classification of batches into the insecure/secure/other boundary states.
//! - [`attack`]: the deterministic reconstruction pipeline for insecure
//!   batches (loss-vector recovery, activation-pattern recovery, bias
//!   calibration, sparse system assembly, least-squares solve).
//! - [`defense`]: the perturbation-subspace construction for secure batches,
//!   artifact-batch sampling under the box constraint, and the perturbation
//!   lower bound.
//! - [`metrics`]: matched reconstruction scoring (MSE, PSNR, label accuracy).

pub mod attack;
pub mod defense;
pub mod exclusivity;
pub mod linalg;
pub mod metrics;
pub mod model;
