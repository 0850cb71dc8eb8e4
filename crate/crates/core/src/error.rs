use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("field order {0} is not a prime power in [2, 65536]")]
    UnsupportedFieldOrder(u32),

    #[error("value {value} is not an element of GF({order})")]
    ValueOutOfRange { value: u32, order: u32 },

    #[error("operands live in different fields (GF({left}) vs GF({right}))")]
    FieldMismatch { left: u32, right: u32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix has rank {rank} but {rows} rows; full row rank required")]
    NotFullRowRank { rank: usize, rows: usize },

    #[error("MDS construction needs q >= n + 1 (q = {q}, n = {n})")]
    FieldTooSmall { q: u32, n: usize },

    #[error("no secure generator for terminal subset {subset:#x} after {attempts} attempts")]
    GeneratorFailed { subset: u64, attempts: usize },

    #[error("reconciliation design failed after {attempts} attempts")]
    ReconciliationFailed { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid rank sequence: {0}")]
    InvalidRankSequence(String),

    #[error("invalid state distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid gain profile: {0}")]
    InvalidGains(String),

    #[error("index {index} out of range {range}")]
    IndexOutOfRange { index: usize, range: String },

    #[error("boundary tie in closed-form case analysis: {0}")]
    BoundaryTie(String),

    #[error("grid oracle beats the KKT optimum by {gap:e} (tolerance {tolerance:e})")]
    OracleDisagreement { gap: f64, tolerance: f64 },

    #[error("verification failed: {0}")]
    Verification(String),
}
