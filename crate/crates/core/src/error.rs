use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("invalid background: {0}")]
    InvalidBackground(String),
    #[error("coordinate ({x}, {y}) outside {width}x{height} grid")]
    OutOfRange {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
    #[error("cell index {z} outside grid of {len} cells")]
    IndexOutOfRange { z: usize, len: usize },
    #[error("region {0}")]
    InvalidRegion(String),
    #[error("state has {state} coordinate qubits but grid needs {grid}")]
    DimensionMismatch { state: u32, grid: u32 },
    #[error("{requested} coordinate qubits exceed the limit of {limit}")]
    TooManyQubits { requested: u32, limit: u32 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("amplitude oracle received a populated ancilla |1> branch")]
    AncillaPopulated,
    #[error("switch gate third input must be |0>")]
    SwitchInput,
    #[error("post-selection impossible: the grid has no white cells")]
    PostselectionImpossible,
    #[error("amplitude encoding needs at least one white cell")]
    EmptyGrid,
    #[error("empty sample set")]
    EmptySamples,
    #[error("sample k={k} outside [0, {len})")]
    SampleOutOfRange { k: usize, len: usize },
    #[error("no peaks besides k=0; only a presence statement is possible")]
    NoPeaks,
    #[error("peak centres admit no common spacing within tolerance {tolerance}")]
    InconsistentPeaks { tolerance: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
    let context = context.into();
    move |source| Error::Io { context, source }
}
