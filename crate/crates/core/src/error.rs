use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator pipeline.
#[derive(Debug, Error)]
pub enum MpmError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("tet {tet} references vertex {index} but the mesh has {vertex_count} vertices")]
    Index {
        tet: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("tet {tet} has zero volume")]
    Degenerate { tet: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("position ({x}, {y}, {z}) lies outside the representable grid")]
    OutOfGrid { x: f64, y: f64, z: f64 },
    #[error("deformation gradient is not invertible (det = {det})")]
    NonInvertible { det: f64 },
    #[error("implicit system factorization failed after {attempts} diagonal shifts")]
    FactorizationFailure { attempts: usize },
    #[error("primitive of particle {particle} in body {body} is degenerate")]
    DegeneratePrimitive { body: usize, particle: usize },
    #[error("contact {contact}: proxy vertex has no active grid node in its support")]
    EmptySupport { contact: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MpmError>;
