use crate::lattice::Direction;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("torus must be at least 3x3 (smaller tori have multiple edges), got {0}x{1}")]
    TorusTooSmall(usize, usize),
    #[error("planar grid must contain at least one edge, got {0}x{1}")]
    GridTooSmall(usize, usize),
    #[error("vertex {0} out of range for lattice with {1} vertices")]
    InvalidVertex(usize, usize),
    #[error("direction {0:?} does not exist at vertex {1}")]
    DirectionUnavailable(Direction, usize),
    #[error("not a unicycle: walk from the chip did not return within {0} steps")]
    NotAUnicycle(usize),
    #[error("tour invariant violated: {0}")]
    TourInvariant(String),
    #[error("reversal target not reached within {0} steps")]
    ReversalNotReached(usize),
    #[error("quadrature did not converge: requested {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("bad snapshot: {0}")]
    Snapshot(String),
}
