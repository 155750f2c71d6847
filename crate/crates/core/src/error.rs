use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate item id `{0}`")]
    DuplicateId(String),

    #[error("item `{0}` has no rules")]
    NoRules(String),

    #[error("item `{0}` has an empty source sentence")]
    EmptySource(String),

    #[error("item `{0}`: missing {1}")]
    MissingField(String, &'static str),

    #[error("item `{item_id}`, rule {rule_index}: cannot compile `{pattern}`: {message}")]
    RuleCompile {
        item_id: String,
        rule_index: usize,
        pattern: String,
        message: String,
    },

    #[error("item `{item_id}`, rule {rule_index}: literal sentence rule is empty")]
    EmptyLiteral { item_id: String, rule_index: usize },

    #[error("unknown item id `{0}`")]
    UnknownItem(String),

    #[error("system `{system}` lists item `{item_id}` more than once")]
    DuplicateOutput { system: String, item_id: String },

    #[error("system name is empty")]
    EmptySystemName,

    #[error("system `{0}` appears more than once")]
    DuplicateSystem(String),

    #[error("system `{system}` has no translation for item `{item_id}`")]
    MissingTranslation { system: String, item_id: String },

    #[error("unknown phenomenon `{0}`")]
    UnknownPhenomenon(String),

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("number of trials must be positive")]
    ZeroTrials,

    #[error("successes ({successes}) exceed trials ({trials})")]
    SuccessesExceedTrials { successes: u64, trials: u64 },

    #[error("row is empty")]
    EmptyRow,

    #[error("row `{0}` mixes different item totals")]
    UnequalTotals(String),

    #[error("significance level must lie strictly between 0.5 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("accuracy is undefined: {0}")]
    Undefined(String),

    #[error("runs share no {0} labels")]
    DisjointLabels(&'static str),

    #[error("no cluster row for `{0}`")]
    MissingClusterRow(String),

    #[error("run is empty, nothing to export")]
    EmptyRun,

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 3 for I/O failures, 2 for bad data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
