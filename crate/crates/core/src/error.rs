use thiserror::Error;

use crate::lang::ast::Type;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("type error in {function}: {message}")]
    Type { function: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallError {
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("function {function} expects {expected} arguments, found {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("argument {param} of {function} expects {expected}, found {found}")]
    ArgumentType {
        function: String,
        param: String,
        expected: Type,
        found: Type,
    },
    #[error("fuel must be positive")]
    ZeroFuel,
    #[error("override target {0} is not a condition")]
    NotACondition(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("patch base fingerprint {expected} does not match program {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("chunk does not fit the base program: {0}")]
    BadChunk(String),
    #[error("patched program is invalid: {0}")]
    Invalid(#[from] ParseError),
    #[error("cannot classify an empty patch")]
    EmptyPatch,
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("malformed tests.json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("test {test}: {source}")]
    Call {
        test: String,
        #[source]
        source: CallError,
    },
    #[error("test {0} has no assertions")]
    Empty(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Parse {
        file: String,
        #[source]
        source: ParseError,
    },
    #[error("{file}: {message}")]
    Format { file: String, message: String },
    #[error("bug {id}: {message}")]
    Invariant { id: String, message: String },
}
