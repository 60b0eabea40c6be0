use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at column {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("missing value for variable `{0}`")]
    MissingVariable(String),

    #[error("noise moment of order {required} needed but model only provides up to {available}")]
    MomentOrder { required: u32, available: u32 },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("state outside the global domain: {0}")]
    OutsideDomain(String),

    #[error("invalid automaton: {0}")]
    Automaton(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("compositionality failure: {0}")]
    Composition(String),

    #[error("region mismatch: {0}")]
    RegionMismatch(String),

    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("missing controller for switching state {0}")]
    MissingController(String),

    #[error("config error in section `{section}`: {msg}")]
    Config { section: String, msg: String },

    #[error("stage `{stage}` failed ({path}): {msg}")]
    Stage { stage: String, path: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(section: &str, msg: impl Into<String>) -> Self {
        Error::Config { section: section.to_string(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
