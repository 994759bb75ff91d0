//! Numerical laboratory for the kagome Euler flat-band model: band topology,
//! quantum geometry, the hexagon-operator ground state and its PEPS form, the
//! diagonal phase circuit, and entanglement spectra on finite tori.

pub mod bloch;
pub mod circuit;
pub mod error;
pub mod fock;
pub mod geometry;
pub mod io;
pub mod lattice;
pub mod entanglement;
pub mod peps;
pub mod verify;
pub mod linalg;
pub mod realspace;

pub use error::{Error, Result};
pub use fock::{BasisState, FockBasis, HexOperator, Ladder, ManyBodyOperator, Representation, SparseState};
pub use lattice::{build_lattice, Boundary, Lattice, NeighborKind, Sublattice};
pub use linalg::C64;
