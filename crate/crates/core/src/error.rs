use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("price level {level} is outside 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("joint action id {id} is outside 1..={max}")]
    ActionOutOfRange { id: usize, max: usize },

    #[error("{profiles} action profiles exceed the exact-enumeration limit of {limit}; use simulation instead")]
    TooManyProfiles { profiles: u128, limit: u128 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown sweep table `{0}` (expected 1..=5)")]
    UnknownTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
