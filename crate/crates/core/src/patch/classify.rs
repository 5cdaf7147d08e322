use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::signature::similarity;
use super::*;
use crate::error::PatchError;

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchClass {
    SingleLocation,
    SimilarExact,
    Similar,
    Relevant,
    Other,
}

impl PatchClass {
    pub const ALL: [PatchClass; 5] = [
        PatchClass::SingleLocation,
        PatchClass::SimilarExact,
        PatchClass::Similar,
        PatchClass::Relevant,
        PatchClass::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PatchClass::SingleLocation => "single_location",
            PatchClass::SimilarExact => "similar_exact",
            PatchClass::Similar => "similar",
            PatchClass::Relevant => "relevant",
            PatchClass::Other => "other",
        }
    }
}

impl fmt::Display for PatchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PatchClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatchClass::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| format!("unknown patch class {s}"))
    }
}

/// `(similar, similarity)`; similar requires the same action kind.
pub fn chunks_similar(a: &Chunk, b: &Chunk, threshold: f64) -> (bool, f64) {
    let sim = similarity(&chunk_signature(a), &chunk_signature(b));
    (a.action == b.action && sim >= threshold, sim)
}

// Identifiers qualified by their scope: functions are global (""), variables
// belong to the function they live in.
type Ident = (String, String);

fn scope_of(c: &Chunk) -> &str {
    &c.location.func
}

fn expr_idents(e: &Expr, scope: &str, out: &mut BTreeSet<Ident>) {
    e.walk(&mut |x| match x {
        Expr::Var(n) | Expr::Index(n, _) => {
            out.insert((scope.to_string(), n.clone()));
        }
        Expr::Call(n, _) => {
            out.insert((String::new(), n.clone()));
        }
        _ => {}
    });
}

fn stmt_idents(s: &Stmt, scope: &str, defs: &mut BTreeSet<Ident>, all: &mut BTreeSet<Ident>) {
    s.walk(&mut |s| {
        match &s.kind {
            StmtKind::Let(n, ..) => {
                defs.insert((scope.to_string(), n.clone()));
            }
            StmtKind::Assign(lv, _) => {
                defs.insert((scope.to_string(), lv.name().to_string()));
            }
            _ => {}
        }
        for e in s.own_exprs() {
            expr_idents(e, scope, all);
        }
    });
}

fn fragment_idents(f: &Fragment, scope: &str, defs: &mut BTreeSet<Ident>, all: &mut BTreeSet<Ident>) {
    match f {
        Fragment::Stmts(ss) => ss.iter().for_each(|s| stmt_idents(s, scope, defs, all)),
        Fragment::Cond(e) => expr_idents(e, scope, all),
        Fragment::Function(func) => {
            defs.insert((String::new(), func.name.clone()));
            for p in &func.params {
                defs.insert((func.name.clone(), p.name.clone()));
            }
            func.body
                .stmts
                .iter()
                .for_each(|s| stmt_idents(s, &func.name, defs, all));
        }
    }
}

fn idents(c: &Chunk) -> (BTreeSet<Ident>, BTreeSet<Ident>) {
    let mut defs = BTreeSet::new();
    let mut all = BTreeSet::new();
    fragment_idents(&c.removed, scope_of(c), &mut defs, &mut all);
    fragment_idents(&c.added, scope_of(c), &mut defs, &mut all);
    all.extend(defs.iter().cloned());
    (defs, all)
}

/// R1: an identifier introduced or assigned by one chunk occurs in the
/// other. R2: both chunks edit the body of the same function.
pub fn chunks_related(a: &Chunk, b: &Chunk, _base: &Program) -> bool {
    let same_body = !a.location.function_level && !b.location.function_level && a.location.func == b.location.func;
    if same_body {
        return true;
    }
    let (da, ua) = idents(a);
    let (db, ub) = idents(b);
    !da.is_disjoint(&ub) || !db.is_disjoint(&ua)
}

pub fn classify(patch: &Patch, base: &Program) -> Result<PatchClass, PatchError> {
    classify_with(patch, base, DEFAULT_SIMILARITY_THRESHOLD)
}

pub fn classify_with(patch: &Patch, base: &Program, threshold: f64) -> Result<PatchClass, PatchError> {
    let chunks = &patch.chunks;
    match chunks.len() {
        0 => return Err(PatchError::EmptyPatch),
        1 => return Ok(PatchClass::SingleLocation),
        _ => {}
    }
    let pairs: Vec<(&Chunk, &Chunk)> = chunks
        .iter()
        .enumerate()
        .flat_map(|(i, a)| chunks[i + 1..].iter().map(move |b| (a, b)))
        .collect();
    if pairs.iter().any(|(a, b)| chunks_related(a, b, base)) {
        return Ok(PatchClass::Relevant);
    }
    let sims: Vec<(bool, f64)> = pairs.iter().map(|(a, b)| chunks_similar(a, b, threshold)).collect();
    Ok(if sims.iter().all(|s| s.0) {
        if sims.iter().all(|s| s.1 == 1.0) {
            PatchClass::SimilarExact
        } else {
            PatchClass::Similar
        }
    } else {
        PatchClass::Other
    })
}
