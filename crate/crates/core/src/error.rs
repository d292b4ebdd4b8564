use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("non-finite coefficient sample at ({x}, {z})")]
    Coefficient { x: f64, z: f64 },

    #[error("singular factorization in {context}: {detail}")]
    Singular { context: String, detail: String },

    #[error("slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("floquet point k = {k}: {source}")]
    Floquet {
        k: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("spectral radius {radius} of the propagation operator is not below 1")]
    SpectralRadius { radius: f64 },

    #[error("riccati: found {found} eigenvalues inside the unit disk, expected {expected}; moduli near 1: {near_one:?}")]
    EigenCount {
        found: usize,
        expected: usize,
        near_one: Vec<f64>,
    },

    #[error("riccati: eigenvalue modulus {modulus} within {delta} of the unit circle")]
    UnitCircle { modulus: f64, delta: f64 },

    #[error("riccati: eigenvector matrix ill-conditioned (condition estimate {cond:e})")]
    IllConditioned { cond: f64 },

    #[error("newton iteration did not converge; residual history {history:?}")]
    NoConvergence { history: Vec<f64> },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("point ({x}, {z}) outside the computed domain")]
    OutOfRange { x: f64, z: f64 },

    #[error("unknown edge tag")]
    UnknownTag,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn in_slice(self, slice: usize) -> Error {
        Error::Slice {
            slice,
            source: Box::new(self),
        }
    }

    pub fn in_floquet(self, k: f64) -> Error {
        Error::Floquet {
            k,
            source: Box::new(self),
        }
    }
}
