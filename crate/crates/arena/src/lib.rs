//! Virtual-clock simulation of asynchronous data-parallel SGD methods.
//!
//! Workers with heterogeneous compute times are driven by a deterministic
//! discrete-event engine ([`simcore`]); server algorithms live in
//! [`homogeneous`] and [`heterogeneous`]; bandit task allocation lives in
//! [`allocation`]; closed-form bounds live in [`theory`]; the CLI plumbing
//! lives in [`harness`].

pub mod allocation;
pub mod error;
pub mod harness;
pub mod heterogeneous;
pub mod homogeneous;
pub mod par;
pub mod problem;
pub mod rng;
pub mod simcore;
pub mod theory;
pub mod timemodel;

pub use error::{ArenaError, Result};
