use serde::Serialize;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Rank report returned when no admissible change of variables exists at a degree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoSolution {
    pub m: usize,
    /// Rank of the homogeneous constraint matrix with `(a, b)` free.
    pub rank: usize,
    pub unknowns: usize,
    pub equations: usize,
}

impl NoSolution {
    /// Nontrivial homogeneous solutions exist iff the rank is below the unknown count.
    pub fn nontrivial_exists(&self) -> bool {
        self.rank < self.unknowns
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("monomial degree must be at least 1")]
    ZeroDegree,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what}: expected shape {expected}, found {found}")]
    Shape { what: String, expected: String, found: String },

    #[error("nonlinear degree {declared} declared but every coefficient matrix is zero")]
    DegenerateLinear { declared: usize },

    #[error("Γ is singular for (a, b) = ({a}, {b})")]
    SingularGamma { a: f64, b: f64 },

    #[error(
        "no change of variables with invertible Γ at degree {}: rank {} with {} unknowns and {} equations",
        .0.m, .0.rank, .0.unknowns, .0.equations
    )]
    NoSolution(NoSolution),

    #[error("det(J) = {0} is not positive; averaging needs a real linear frequency")]
    NonPositiveDeterminant(f64),

    #[error("cycle measurement failed: {0}")]
    Measurement(String),

    #[error("{field}: {message}")]
    Definition { field: String, message: String },

    #[error("cannot access {path}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub(crate) fn shape(what: impl Into<String>, expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::Shape {
            what: what.into(),
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }

    /// Errors caused by user input rather than by the pipeline itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Shape { .. }
                | Error::DegenerateLinear { .. }
                | Error::NonPositiveDeterminant(_)
                | Error::Definition { .. }
                | Error::Io { .. }
                | Error::InvalidArgument(_)
        )
    }
}
