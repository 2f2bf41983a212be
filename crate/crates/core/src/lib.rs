//! Rational secret sharing over a simulated asynchronous broadcast channel.
//!
//! The dealer hides the secret in one game of a geometrically long sequence of
//! two-stage games. Players authenticate every broadcast with one-time
//! polynomial MACs and reconstruct games one at a time until an indicator
//! sharing reconstructs to one.

pub mod analysis;
pub mod channel;
pub mod dealer;
pub mod field;
pub mod itmac;
pub mod par;
pub mod player;
pub mod rng;
pub mod shamir;
pub mod strategies;
pub mod types;

pub use field::{FieldElement, FieldError, PrimeModulus};
pub use types::{PlayerId, ProtocolParams, Stage};
