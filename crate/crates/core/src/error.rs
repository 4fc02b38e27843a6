use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("x' = {x} lies outside the graph chart |x'| <= {limit}")]
    OutsideChart { x: f64, limit: f64 },

    #[error("invalid mesh parameters: {0}")]
    InvalidMeshParameters(String),

    #[error("mesh construction failed: {0}")]
    MeshConstruction(String),

    #[error("point ({}, {}) is not inside the mesh", .0[0], .0[1])]
    PointOutsideMesh([f64; 2]),

    #[error("ellipticity violated: {0}")]
    Ellipticity(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("field and system live on different meshes")]
    MeshMismatch,

    #[error("boundary tag {0} has no nodes on this mesh")]
    MissingTag(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate energy a11 = {0}")]
    DegenerateEnergy(f64),
}

pub type Result<T> = std::result::Result<T, GapError>;
