//! Sharpness-aware genetic programming for evolutionary feature construction.
//!
//! Individuals are sets of symbolic feature trees. Each set is scored by the
//! leave-one-out error of a ridge model fitted on its features and by a
//! second objective, by default the semantic sharpness: how much the training
//! loss grows when the outputs of every subtree are randomly perturbed.
//! Both objectives are minimized with NSGA-II survival.
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled as doc-tests of this crate.

pub mod complexity;
pub mod data;
mod error;
pub mod evolution;
pub mod inference;
pub mod ridge;
pub mod rng;
pub mod runner;
pub mod sharpness;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/ridge.md")]
    mod ridge {}
    #[doc = include_str!("../../../book/src/sharpness.md")]
    mod sharpness {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
}
