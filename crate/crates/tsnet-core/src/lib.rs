//! Core library for single-base-station MEC task scheduling.
//!
//! The crate is split along the pipeline:
//!
//! - [`model`]: the physical cost model: per-task delay/energy, the
//!   scalarized utility, constraint checking, and constraint clipping.
//! - [`oracle`]: exact enumeration over offload vectors with a
//!   grid + golden-section / Lagrange-bisection inner solver; ground
//!   truth for small instances.
//! - [`ga`]: hybrid genetic algorithm (binary offload genes, exact
//!   continuous subproblem) used to label training data.
//! - [`datagen`]: instance sampling and feature normalization.
//! - [`neural`]: minimal dense f64 neural stack with manual
//!   backpropagation: linear, layer-norm, multi-head self-attention,
//!   feed-forward, mixer blocks, Adam, and finite-difference checks.
//! - [`scheduler`]: the inference pipeline: outlier padding and
//!   masking, circular-shift candidate generation, offload/resource
//!   network coupling, and candidate selection by utility.
//!
//! Everything here is pure computation over `alloc` collections; file
//! formats, the CLI, and parallel batch drivers live in the companion
//! `tsnet-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod datagen;
pub mod error;
pub mod ga;
pub mod math;
pub mod model;
pub mod neural;
pub mod oracle;
pub mod scheduler;

pub use error::Error;
