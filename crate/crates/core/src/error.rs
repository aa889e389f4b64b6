use thiserror::Error;

/// Errors raised by the scheduling engine and the experiment runner.
#[derive(Debug, Error)]
pub enum BsflError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("client {client} is out of range for {num_clients} clients")]
    UnknownClient { client: usize, num_clients: usize },

    #[error("need at least {required} available clients, found {available}")]
    InsufficientClients { available: usize, required: usize },

    #[error(
        "exhaustive search over {candidates} candidate sets exceeds the cap of {cap}; \
         use an annealing solver instead"
    )]
    EnumerationCapExceeded { candidates: u128, cap: u128 },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("state graph has {states} states, beyond the search limit of {limit}")]
    SearchTooLarge { states: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(serde_json::Error),
}

pub type Result<T, E = BsflError> = std::result::Result<T, E>;

impl From<serde_json::Error> for BsflError {
    fn from(e: serde_json::Error) -> Self {
        BsflError::Json(e)
    }
}

impl BsflError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        BsflError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
