use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("schema violation at `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error("non-positive spin count at `n`")]
    NonPositiveN,
    #[error("self-loop ({i},{i}) at `{field}`")]
    SelfLoop { field: String, i: usize },
    #[error("duplicate edge ({i},{j}) at `{field}`")]
    DuplicateEdge { field: String, i: usize, j: usize },
    #[error("network is not in pendant-control form: {0}")]
    NotPendant(String),
    #[error("excitation count {k} out of range for {n} spins")]
    ExcitationOutOfRange { n: usize, k: usize },
    #[error("component is not connected under drift edges")]
    Disconnected,
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("Lie closure dimension >= {0}")]
    ClosureCap(usize),
    #[error("invalid target: {0}")]
    Target(String),
    #[error("target is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("target overlaps |1> with weight {0}")]
    OverlapsPendant(f64),
    #[error("vector is not dark: {0}")]
    NotDark(String),
    #[error("target violates the ASO phase constraint: {0}")]
    PhaseConstraint(String),
    #[error("degenerate equal-overlap pair at |lambda| = {0} needs Raman synthesis, which is disabled")]
    RamanDisabled(f64),
    #[error("sector mismatch: {0}")]
    SectorMismatch(String),
    #[error("normalization drift {0:e} exceeds 1e-6; reduce dt")]
    NormalizationDrift(f64),
    #[error("time step {dt} violates Nyquist limit {limit}")]
    Nyquist { dt: f64, limit: f64 },
    #[error("no resolvable spectral peaks")]
    NoPeaks,
    #[error("overlapping peaks near {0}")]
    OverlappingPeaks(f64),
    #[error("sign slope below noise floor at |lambda| = {0}")]
    SlopeBelowNoise(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
