use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index {index} out of range for {len} drones")]
    DroneIndex { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("episode already finished; call reset before stepping again")]
    EpisodeOver,

    #[error("could not place drones with the required separation after {0} attempts")]
    Placement(usize),

    #[error("coincident drone positions make the repulsive field singular")]
    Singular,

    #[error("activation cache is stale: parameters changed after the forward pass")]
    StaleCache,

    #[error("landing error requested for an episode that did not succeed")]
    NotLanded,

    #[error("cannot aggregate an empty set of episode records")]
    EmptyRecords,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("checkpoint not found: {}", .0.display())]
    CheckpointNotFound(PathBuf),

    #[error("bad magic in checkpoint header")]
    BadMagic,

    #[error("unsupported checkpoint version {0}")]
    Version(u32),

    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checkpoint layer shapes do not match the network: {0}")]
    ShapeMismatch(String),

    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("resume state: {0}")]
    Resume(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
