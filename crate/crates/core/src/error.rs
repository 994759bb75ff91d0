use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate lattice size {l1}x{l2}: both extents must be at least 2")]
    DegenerateSize { l1: usize, l2: usize },

    #[error("hexagon id {id} out of range (lattice has {count} hexagons)")]
    InvalidHexagon { id: usize, count: usize },

    #[error("site index {site} out of range (lattice has {count} sites)")]
    InvalidSite { site: usize, count: usize },

    #[error("operation requires a torus, got a cylinder")]
    RequiresTorus,

    #[error("operation requires a cylinder, got a torus")]
    RequiresCylinder,

    #[error("hexagon weights must have unit norm, got norm {norm}")]
    BetaNormalization { norm: f64 },

    #[error("{what}: size {size} exceeds limit {limit}")]
    SizeLimit {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("hexagon product annihilated the state")]
    ZeroState,

    #[error("quantum Cramer-Rao bound is singular: |Eu| = {curvature:e}")]
    SingularBound { curvature: f64 },

    #[error("degenerate ground state: {count} levels within {tolerance:e}")]
    DegenerateGroundState { count: usize, tolerance: f64 },

    #[error("single-particle gap {gap:e} at twist ({theta1}, {theta2}) below threshold")]
    GapClosed { gap: f64, theta1: f64, theta2: f64 },

    #[error("state is not an eigenstate of a2 translation (overlap {overlap})")]
    NotTranslationInvariant { overlap: f64 },

    #[error("gate layout violates {rule} at hexagon {hexagon}")]
    LayoutViolation { rule: &'static str, hexagon: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parse error: {0}")]
    Parse(String),
}
