use thiserror::Error;

/// Crate-wide error type. Variants are named after the condition they
/// report, not after the code path that raised them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("mesh is not a surface with boundary: {0}")]
    NotManifold(String),
    #[error("differential does not square to zero in degree {degree}")]
    InvalidComplex { degree: usize },
    #[error("chain condition fails in degree {degree}")]
    NotAChainMap { degree: usize },
    #[error("sequence is not exact in degree {degree}: {reason}")]
    NotExact { degree: usize, reason: String },
    #[error("twist map is not compatible with the differentials in degree {degree}")]
    TwistNotCompatible { degree: usize },
    #[error("no birth pair recorded for positive boundary critical point {id}")]
    BirthPairMissing { id: usize },
    #[error("surface is not orientable")]
    NotOrientable,
    #[error("degree-flip identification fails at degree {degree}, entry ({row},{col}): {lhs} vs {rhs}")]
    EtaMismatch {
        degree: usize,
        row: usize,
        col: usize,
        lhs: String,
        rhs: String,
    },
    #[error("map is not a quasi-isomorphism (first failing degree {degree})")]
    NotQuasiIso { degree: usize },
    #[error("pairing descent identity violated at degree {degree}, entry ({row},{col})")]
    DescentViolated { degree: usize, row: usize, col: usize },
    #[error("transversality failure: {0}")]
    TransversalityFailure(String),
    #[error("discrete gradient contains a closed V-path through cell {cell}")]
    AcyclicityViolation { cell: String },
    #[error("no admissible interior cofacet for boundary critical cell {cell}")]
    NoAdmissibleCofacet { cell: String },
    #[error("boundary vertex {vertex} has a lower link matching no generic local model")]
    DegenerateBoundaryVertex { vertex: usize },
    #[error("extracted data violates invariant `{which}` (entry {detail})")]
    InvariantViolation { which: String, detail: String },
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
