//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The polygon input violates a structural requirement (too few
    /// vertices, not strictly convex counterclockwise, vertex outside the
    /// open unit disk, malformed edge orientations).
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    /// An instance file or command-line input is malformed.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A geometric construction failed on this input (for example a
    /// reduction apex landing outside the open disk).
    #[error("geometry failure: {0}")]
    Geometry(String),

    /// Brick decomposition construction or refinement failed.
    #[error("brick decomposition failure: {0}")]
    Decomposition(String),

    /// Dynamical analysis failed (orbit did not settle, surgery could not
    /// be placed, a required witness could not be produced).
    #[error("dynamics failure: {0}")]
    Dynamics(String),

    /// An internal invariant that should hold by theorem was violated;
    /// always a bug, never a property of the input.
    #[error("soundness violation (internal bug): {0}")]
    Soundness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
