use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // network structure
    #[error("network contains a directed cycle")]
    CyclicGraph,
    #[error("CPT row {row} of variable `{variable}` does not sum to 1 (sum = {sum})")]
    CptRowNotNormalized { variable: String, row: usize, sum: f64 },
    #[error("CPT of variable `{variable}` has entry {value} outside [0, 1]")]
    CptEntryOutOfRange { variable: String, value: f64 },
    #[error("variable `{variable}` has cardinality {cardinality}, need at least 2")]
    CardinalityTooSmall { variable: String, cardinality: usize },
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{0}` has no CPT")]
    MissingCpt(String),
    #[error("variable `{0}` has more than one CPT")]
    DuplicateCpt(String),
    #[error("CPT of `{variable}` has {got} entries, expected {expected}")]
    TableSizeMismatch { variable: String, expected: usize, got: usize },
    #[error("network has no variables")]
    EmptyNetwork,
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("state {state} out of range for variable `{variable}` (cardinality {cardinality})")]
    StateOutOfRange { variable: String, state: usize, cardinality: usize },
    #[error("variable `{0}` observed more than once")]
    ConflictingEvidence(String),

    // parsing
    #[error("syntax error at {line}:{col}: {message}")]
    SyntaxError { line: usize, col: usize, message: String },
    #[error("potential block for `{block}` has {got} data values, expected {expected}")]
    ArityMismatch { block: String, expected: usize, got: usize },
    #[error("unsupported NET feature `{0}`")]
    UnsupportedFeature(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },

    // tables
    #[error("index {index} out of range for table of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("assignment has {got} states, scope has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error("scope contains variable {0} twice")]
    DuplicateScopeVariable(usize),
    #[error("scope is not contained in the table scope")]
    ScopeNotContained,
    #[error("table has zero total mass")]
    ZeroMass,
    #[error("table size overflows usize")]
    TableTooLarge,

    // compilation
    #[error("graph is not chordal under the given elimination order")]
    NotChordal,
    #[error("no clique covers the scope of CPT `{0}`")]
    NoCoveringClique(String),

    // propagation
    #[error("separator {separator} entry {entry} is zero but the new marginal is {value}")]
    InconsistentDivision { separator: usize, entry: usize, value: f64 },
    #[error("cliques {source_clique} and {target_clique} are not joined by separator {separator}")]
    InvalidMessage { source_clique: usize, target_clique: usize, separator: usize },

    // modelling / oracle
    #[error("need at least two timing samples with distinct work")]
    InsufficientSamples,
    #[error("joint table of {size} entries exceeds cap {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
