use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("could not generate connected graph after {attempts} attempts (n={n}, p={p})")]
    DisconnectedGraph { n: usize, p: f64, attempts: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("indicator is not a spanning tree")]
    InvalidTree,

    #[error("no spanning tree exists: graph is disconnected")]
    NoSpanningTree,

    #[error("no arborescence exists: node {node} is unreachable from root {root}")]
    NoArborescence { root: usize, node: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("missing neighbor snapshot for agent {agent}: neighbor {neighbor}")]
    MissingSnapshot { agent: usize, neighbor: usize },

    #[error("relaxed constraint set is empty (QP infeasible): {0}")]
    QpInfeasible(String),

    #[error("QP did not converge: {0}")]
    QpFailed(String),

    #[error("agent {agent}: {source}")]
    Agent {
        agent: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("nonpositive exact objective {0}")]
    NonPositiveObjective(f64),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
