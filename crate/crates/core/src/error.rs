use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("K must be even and at least 2, got {0}")]
    OddUserCount(usize),
    #[error("coherence interval T = {t} must exceed the user count K = {k}")]
    CoherenceTooShort { t: usize, k: usize },
    #[error("antenna count M must be positive")]
    NoAntennas,
    #[error("trial count must be positive")]
    NoTrials,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be nonnegative and finite, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} has length {got}, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(
        "large-scale fading ordering violated: cell-center user {center} (beta = {center_beta}) \
         is not stronger than cell-edge user {edge} (beta = {edge_beta})"
    )]
    BetaOrdering {
        center: usize,
        edge: usize,
        center_beta: f64,
        edge_beta: f64,
    },
    #[error("placement range [{lo}, {hi}] dB is empty or not finite")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("could not draw an ordered placement in {0} attempts")]
    PlacementExhausted(usize),
    #[error("need M >= {needed} antennas, have M = {m}")]
    TooFewAntennas { m: usize, needed: usize },
    #[error("channel estimate matrix is rank deficient (|R_ii| / max |R_jj| = {0:e})")]
    Singular(f64),
    #[error("at least 2 Monte-Carlo trials are required, got {0}")]
    TooFewTrials(usize),
    #[error("operation requires exactly two users, scenario has K = {0}")]
    NotTwoUser(usize),
    #[error("grid oracle supports K <= 4, got K = {0}")]
    OracleTooLarge(usize),
    #[error("grid oracle resolution {0} is too coarse (need at least 50 points per axis)")]
    OracleTooCoarse(usize),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("unsupported schema_version {0}")]
    SchemaVersion(u32),
    #[error("config: {0}")]
    Config(String),
    #[error("malformed channel dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
