//! Dynamic concave utilities (equivalently dynamic convex risk measures) of
//! possibly unbounded endowments.
//!
//! The pipeline has three legs:
//!
//! 1. a convex core penalty `f(t, q)` is conjugated into a generator
//!    `g(t, z) = sup_q (z·q - f(t, q))` ([`model`], [`conjugate`]);
//! 2. the scalar BSDE `Y_t = ξ - ∫_t^T g(s, Z_s) ds + ∫_t^T Z_s·dB_s` is solved
//!    by least-squares regression Monte Carlo ([`paths`], [`bsde`]);
//! 3. the dual side is checked: penalized expectations under reweighted
//!    measures bound `Y_0` from above and the bound is attained at the control
//!    `q*_s ∈ ∂g(s, Z_s)` ([`duality`]).
//!
//! [`inequalities`] makes the Young/Gronwall estimates that underpin the
//! integrability arguments executable.
//!
//! The crate is `no_std` (with `alloc`). All transcendental functions come from
//! `libm`, so results are bit-reproducible across platforms. The `parallel`
//! feature distributes per-path work over rayon; reductions always run over
//! fixed-size blocks in a fixed order, so the thread count never changes a
//! single output bit.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(a < b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bsde;
pub mod conjugate;
pub mod duality;
mod error;
mod ext;
pub mod inequalities;
pub mod model;
mod par;
pub mod paths;
pub mod regression;
pub mod rng;
pub mod stats;
mod vector;

pub use error::{Error, Result};
pub use ext::ExtendedReal;
