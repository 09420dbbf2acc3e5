//! Rotor-router (Eulerian walker) dynamics on square lattices.
//!
//! The crate has two halves that predict the same observables by
//! independent routes:
//!
//! * simulation: uniform unicycle sampling ([`sampler`]), the rotor-router
//!   step operator and cycle classification ([`rotor`]), and Euler-tour
//!   drivers measuring dimer/contour statistics, the contour-dimer balance
//!   and walker diffusion ([`tour`]);
//! * analysis: lattice Green functions and defect-matrix determinant
//!   limits giving closed-form pair correlations ([`analytic`]).

pub mod analytic;
pub mod error;
pub mod lattice;
pub mod rotor;
pub mod sampler;
pub mod tour;

pub use error::{Error, Result};
pub use lattice::{Direction, Lattice, RoutingOrder, Topology};
pub use rotor::{CycleInfo, CycleKind, Orientation, RotorState, Snapshot};
pub use sampler::{sample_unicycle, sample_ust, SeededRng, SpanningTree};
