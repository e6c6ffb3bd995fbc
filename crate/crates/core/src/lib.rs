//! Quantum particle in a box whose walls move pantographically.
//!
//! The moving domain is mapped onto a static one, where the particle feels
//! a rescaled kinetic energy `λ⁻² H₀` plus the dilation term
//! `(λ̇/λ) V`, `V = iħ(1 + r∂ᵣ)` (or `iħ(½ + x∂ₓ)` on a segment). The crate
//! builds the static eigenbasis, assembles `V` and the position operator,
//! propagates states exactly and to first order in the wall amplitude, and
//! scans the drive frequency for resonances.

// `!(x > 0.0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod drive;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod operators;
pub mod quadrature;
pub mod resonance;
pub mod special;

pub use error::{Error, Result};
