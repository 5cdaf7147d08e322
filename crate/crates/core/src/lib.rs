//! Multi-location repair workbench for MiniLang.
//!
//! The crate is organised bottom-up: [`lang`] (syntax and execution),
//! [`testkit`] (suites, purification, augmentation), [`faultloc`]
//! (spectra, ranking, propagation chains), [`patch`] (diff, apply,
//! classification), [`repair`] (the two search strategies) and
//! [`harness`] (corpus, statistics, benchmarking).

pub mod error;
pub mod faultloc;
pub mod fuzz;
pub mod harness;
pub mod lang;
pub mod patch;
pub mod repair;
pub mod testkit;

pub use error::*;
pub use lang::{parse, pretty_print, Call, ExecTrace, NodeId, Program, Termination, Value};
