//! Short periodic orbits of the Lorenz system.
//!
//! The pipeline: integrate a long trajectory ([`integrate`]), compute its
//! similarity signature curve ([`signature`]), cut it into quasi-periodic arcs
//! with a sliding window on the signature ([`segment`]), label arcs by their
//! crossings of the `z = r − 1` plane ([`symbolic`]), close them into periodic
//! orbits by multiple-shooting Newton ([`closure`]) and prove existence inside
//! a small box with the Krawczyk operator ([`verify`]). [`census`] drives the
//! whole thing for every symbol sequence up to a given period.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod census;
pub mod closure;
pub mod error;
pub mod integrate;
pub mod interval;
pub mod lorenz;
pub mod par;
pub mod segment;
pub mod signature;
pub mod symbolic;
pub mod verify;

pub use error::{Error, Result};
pub use integrate::{FlowResult, Trajectory, DEFAULT_DT};
pub use lorenz::{LorenzParams, State3, VectorField};
