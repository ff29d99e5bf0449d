use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested stage lies beyond the derived geometry; derive more stages.
    #[error("stage {requested} requested but geometry only covers stages 1..={available}")]
    ExtensionRequired { requested: usize, available: usize },

    #[error("depth cap of {cap} stages reached: {reason}")]
    DepthCap { cap: usize, reason: String },

    #[error("offset precision of {bits} bits cannot resolve columns: {reason}")]
    Precision { bits: u32, reason: String },

    #[error("window stage {window} too small: escaping mass {escaping} exceeds tolerance, need stage {required}")]
    WindowTooSmall {
        window: usize,
        escaping: String,
        required: usize,
    },

    #[error("group orders differ: {0} vs {1}")]
    OrderMismatch(u64, u64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 3 for depth, extension and precision limits,
    /// 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ExtensionRequired { .. } | Error::DepthCap { .. } | Error::Precision { .. } => 3,
            _ => 2,
        }
    }
}
