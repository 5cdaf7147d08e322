#![allow(dead_code)]

use std::path::PathBuf;

use mlrepair_core::harness::{load_bug, BugEntry};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus"))
}

pub fn bug(id: &str) -> BugEntry {
    load_bug(&corpus_dir().join(id)).unwrap_or_else(|e| panic!("{id}: {e}"))
}
