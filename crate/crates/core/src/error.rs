use std::fmt;

use serde::Serialize;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure family. The CLI maps each class to an exit status and
/// pipelines branch on the class name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Validation,
    Coverage,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Coverage => 3,
            ErrorClass::Io => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Validation => "validation",
            ErrorClass::Coverage => "coverage",
            ErrorClass::Io => "io",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid label {value} for the {scheme} scheme")]
    InvalidLabel { value: i64, scheme: &'static str },

    #[error("item {item_id} has no annotation records")]
    EmptyItem { item_id: String },

    #[error("tally has zero total mass")]
    DegenerateTally,

    #[error("item {item_id} has no clear majority ({n} labels tie)")]
    Unresolvable { item_id: String, n: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: annotator {annotator_id} combined label 0 with other labels on item {item_id}")]
    Contradiction {
        line: usize,
        item_id: String,
        annotator_id: String,
    },

    #[error("line {line}: duplicate annotation of item {item_id} by annotator {annotator_id}")]
    DuplicateAnnotation {
        line: usize,
        item_id: String,
        annotator_id: String,
    },

    #[error("item {item_id}: missing strength from annotators {}", annotators.join(","))]
    MissingStrength {
        item_id: String,
        annotators: Vec<String>,
    },

    #[error("{0}")]
    Contract(String),

    #[error("{what}: {} id(s) missing, {} unexpected", missing.len(), extra.len())]
    Coverage {
        what: String,
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("join failed: {} unmatched id(s)", ids.len())]
    Join { ids: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Coverage { .. } | Error::Join { .. } => ErrorClass::Coverage,
            Error::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }

    /// Item or annotator ids the error is about, if any.
    pub fn offending_ids(&self) -> Vec<String> {
        match self {
            Error::EmptyItem { item_id } | Error::Unresolvable { item_id, .. } => {
                vec![item_id.clone()]
            }
            Error::Contradiction { item_id, .. } | Error::DuplicateAnnotation { item_id, .. } => {
                vec![item_id.clone()]
            }
            Error::MissingStrength { annotators, .. } => annotators.clone(),
            Error::Coverage { missing, extra, .. } => {
                missing.iter().chain(extra.iter()).cloned().collect()
            }
            Error::Join { ids } => ids.clone(),
            _ => Vec::new(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
