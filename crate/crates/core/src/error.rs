use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format `{0}` (expected dot or json)")]
    UnsupportedFormat(String),

    #[error("replication {index} failed: {source}")]
    Replication {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}
