use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad parameters or flag combinations.
    Usage,
    /// Unreadable or inconsistent input data.
    Data,
    /// A numerical procedure could not produce a result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("edge record {record}: self-loop on node {node}")]
    SelfLoop { record: usize, node: usize },

    #[error("edge record {record}: weight `{value}` is not a finite number")]
    NonFiniteWeight { record: usize, value: String },

    #[error("edge record {record}: unknown node `{label}`")]
    UnknownNode { record: usize, label: String },

    #[error("node index {index} out of range for a graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("negative edge weight {weight} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, weight: f64 },

    #[error("undirected graph is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("{context}: line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("insufficient degrees of freedom: n = {n}, rank = {rank}")]
    InsufficientDof { n: usize, rank: usize },

    #[error("treatment column `{0}` is collinear with earlier columns")]
    TreatmentCollinear(String),

    #[error("unit {unit} has leverage 1; {kind} weights are undefined")]
    UnitLeverage { unit: usize, kind: String },

    #[error("degenerate likelihood: residual sum of squares is zero")]
    DegenerateLikelihood,

    #[error("network GLS requires an undirected (symmetric) graph")]
    DirectedGraph,

    #[error("no feasible interval for the network correlation parameter")]
    NoFeasibleInterval,

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error(
        "error covariance {a}*I + {b}*G is not positive definite{}; \
         shrink b (need b*lambda_min(G) > -a) or row-normalize G",
        family.as_deref().map(|f| format!(" for graph family {f}")).unwrap_or_default()
    )]
    NotPositiveDefinite {
        a: f64,
        b: f64,
        family: Option<String>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParameter(_) | Unsupported(_) | InvalidPermutation(_) => ErrorClass::Usage,
            DimensionMismatch(_)
            | SelfLoop { .. }
            | NonFiniteWeight { .. }
            | UnknownNode { .. }
            | IndexOutOfRange { .. }
            | NegativeWeight { .. }
            | Asymmetric { .. }
            | Parse { .. }
            | MissingColumn(_)
            | DirectedGraph
            | Io(_)
            | Csv(_) => ErrorClass::Data,
            InsufficientDof { .. }
            | TreatmentCollinear(_)
            | UnitLeverage { .. }
            | DegenerateLikelihood
            | NoFeasibleInterval
            | NotPsd { .. }
            | NotPositiveDefinite { .. }
            | Numerical(_) => ErrorClass::Numerical,
        }
    }

    /// Attach a graph-family name to a positive-definiteness failure.
    pub fn with_family(self, name: &str) -> Self {
        match self {
            Error::NotPositiveDefinite { a, b, .. } => Error::NotPositiveDefinite {
                a,
                b,
                family: Some(name.to_string()),
            },
            other => other,
        }
    }
}
