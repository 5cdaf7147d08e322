//! Statement-level patches: diff, apply, chunk signatures and the
//! multi-location classification.

mod apply;
mod classify;
mod diff;
pub mod signature;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::lang::pretty::{expr_to_string, function_to_string, stmts_to_string};
use crate::lang::*;

pub use apply::apply_patch;
pub use classify::{chunks_related, chunks_similar, classify, classify_with, PatchClass, DEFAULT_SIMILARITY_THRESHOLD};
pub use diff::{align, ast_diff};
pub use signature::{chunk_signature, tree_edit_distance, SigTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Insert,
    Delete,
    Replace,
    Update,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Insert => "Insert",
            Action::Delete => "Delete",
            Action::Replace => "Replace",
            Action::Update => "Update",
        }
    }
}

/// Material removed or added by a chunk.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Fragment {
    Stmts(Vec<Stmt>),
    /// A condition of an `if`/`while` header.
    Cond(Expr),
    Function(Function),
}

impl Fragment {
    pub const EMPTY: Fragment = Fragment::Stmts(Vec::new());

    pub fn is_empty(&self) -> bool {
        matches!(self, Fragment::Stmts(s) if s.is_empty())
    }

    pub fn to_source(&self) -> String {
        match self {
            Fragment::Stmts(s) => stmts_to_string(s),
            Fragment::Cond(e) => expr_to_string(e),
            Fragment::Function(f) => function_to_string(f),
        }
    }
}

/// Where a chunk applies. For statement chunks `start..start + len` is the
/// replaced range of the block at `path` in function `func`. Function chunks
/// use the root path and index the function list: `start` is the base
/// position for deletions and the target position for insertions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChunkLocation {
    pub func: String,
    pub path: BlockPath,
    pub start: usize,
    pub len: usize,
    /// Base lines covered; for insertions, the line the new code precedes.
    pub lines: (u32, u32),
    pub function_level: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chunk {
    pub location: ChunkLocation,
    pub action: Action,
    pub removed: Fragment,
    pub added: Fragment,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Patch {
    pub base_fingerprint: String,
    pub chunks: Vec<Chunk>,
}

impl Patch {
    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "base_fingerprint": self.base_fingerprint,
            "chunks": self.chunks.iter().map(|c| json!({
                "fn": c.location.func,
                "line_span": [c.location.lines.0, c.location.lines.1],
                "action": c.action.name(),
                "removed_src": c.removed.to_source(),
                "added_src": c.added.to_source(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// SHA-256 of the canonical rendering, lowercase hex.
pub fn fingerprint(p: &Program) -> String {
    let digest = Sha256::digest(pretty_print(p).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Last line occupied by a statement, including closing braces.
pub(crate) fn last_line(s: &Stmt) -> u32 {
    match &s.kind {
        StmtKind::If(_, _, Some(e)) => e.close_line,
        StmtKind::If(_, t, None) => t.close_line,
        StmtKind::While(_, b) => b.close_line,
        _ => s.line,
    }
}
