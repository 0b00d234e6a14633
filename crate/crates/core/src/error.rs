use std::path::PathBuf;

/// Errors produced by the watermarking toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty bytecode")]
    EmptyInput,
    #[error("instructions do not tile the bytecode: expected offset {expected}, found {found}")]
    InconsistentOffsets { expected: usize, found: usize },
    #[error("contract has no watermarkable zone")]
    NoZone,
    #[error("no opcode groups satisfy the gas threshold")]
    NoGroups,
    #[error("byte stream is empty")]
    EmptyStream,
    #[error("insufficient watermarkable blocks: need {needed}, have {available}")]
    InsufficientBlocks { needed: usize, available: usize },
    #[error("runtime bytecode is {size} bytes, above the {limit}-byte code size limit")]
    OversizedContract { size: usize, limit: usize },
    #[error("WRO MAC mismatch: computed {computed}, embedded {embedded}")]
    MacMismatch { computed: String, embedded: String },
    #[error("unknown CFG tool identifier {0:?}")]
    ToolMismatch(String),
    #[error("unknown hash algorithm identifier {0:#04x}")]
    UnknownHashAlgorithm(u8),
    #[error("WRO invariant violated: {0}")]
    InvariantViolation(String),
    #[error("malformed WRO: {0}")]
    MalformedWro(String),
    #[error("creation bytecode already carries a WRO MAC trailer")]
    AlreadyEmbedded,
    #[error("no WRO MAC trailer found")]
    NoMacFound,
    #[error("input of {len} bytes is too short to hold a WRO MAC trailer")]
    TooShort { len: usize },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid hex input: {0}")]
    Hex(#[from] hex::FromHexError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
