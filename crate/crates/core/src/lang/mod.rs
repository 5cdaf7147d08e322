//! MiniLang: syntax, static checks, rendering and execution.

pub mod ast;
pub mod interp;
mod parser;
pub mod pretty;
pub mod typeck;
pub mod validate;
pub mod value;

pub use ast::*;
pub use interp::{
    evaluate, execute, execute_with_overrides, run, Call, CondSnapshot, ConditionOverrideSchedule, ErrorKind,
    EventKind, ExecOptions, ExecOutcome, ExecTrace, FrameInfo, OverridePolicy, RuntimeError, Termination, TraceEvent,
    TraceLevel, DEFAULT_FUEL,
};
pub use parser::parse;
pub use pretty::{expr_to_string, pretty_print};
pub use value::Value;
