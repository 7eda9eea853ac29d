//! Dynamics of orientation-preserving disk homeomorphisms, analyzed
//! through oriented convex polygons and brick decompositions.
//!
//! Given a homeomorphism of the open unit disk and an oriented convex
//! polygon realized by a family of its orbits, this crate computes the
//! polygon's index, builds free and maximal-free brick decompositions of
//! a compact working region, runs the induced brick dynamics, and either
//! certifies recurrence (a closed chain of free bricks) or constructs a
//! repeller–attractor configuration of elliptic or hyperbolic type,
//! verifying each combinatorial step on the instance.

pub mod brick;
pub mod brickdyn;
pub mod config;
pub mod error;
pub mod geom;
pub mod grid;
pub mod planemap;
pub mod polygon;

pub use error::{Error, Result};
