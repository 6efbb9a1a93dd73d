use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("edges do not form a tree")]
    NotATree,
    #[error("sum of genera is {0}, expected 2")]
    GenusSumNot2(u32),
    #[error("vertex {0} is unstable")]
    Unstable(String),
    #[error("bad core shape: {0}")]
    BadCoreShape(String),
    #[error("{0} is not a tail vertex")]
    NotATailVertex(String),
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("branch set is not a proper subset of the initials")]
    NotProperSubset,
    #[error("fresh letter {0} already alive")]
    FreshCollision(String),
    #[error("depth regression in round {round} at step {step}: child depth {depth}")]
    DepthRegression { round: String, step: u32, depth: u32 },
    #[error("step budget {budget} exceeded in round {round}")]
    StepBudgetExceeded { round: String, budget: u32 },
    #[error("order regression in round B: center {center}, child {child}")]
    OrderRegression { center: String, child: String },
    #[error("chi requested on a point where it is forced to 0")]
    ChiOnForcedZero,
    #[error("flag set on a point that is not critical")]
    FlagOnNonCritical,
    #[error("inconsistent flags: {0}")]
    InconsistentFlags(String),
    #[error("report is not a successful diagonalization")]
    NotDiagonalized,
    #[error("syntax error at {position}: {message}")]
    SyntaxError { position: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
