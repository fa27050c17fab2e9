use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("self-loop on node {0:?}")]
    SelfLoop(String),

    #[error("arc {from:?} -> {to:?} declared twice with conflicting tau ({first} vs {second})")]
    ConflictingArc {
        from: String,
        to: String,
        first: f64,
        second: f64,
    },

    #[error("unknown node {0:?}")]
    UnknownNode(String),

    #[error("probability {value} for {what} is outside [0, 1]")]
    Probability { what: String, value: f64 },

    #[error("parameter shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("exact enumeration needs {needed} free decisions, budget is {budget}")]
    Budget { needed: usize, budget: usize },

    #[error("exact enumeration supports at most {max} nodes, network has {nodes}")]
    TooManyNodes { nodes: usize, max: usize },

    #[error("dominance precondition violated: {0}")]
    NotDominated(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
