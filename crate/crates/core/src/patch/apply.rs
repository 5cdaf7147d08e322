use super::*;
use crate::error::PatchError;
use crate::lang::typeck;

fn order_key(loc: &ChunkLocation) -> Vec<usize> {
    let mut key: Vec<usize> = loc.path.0.iter().flat_map(|&(i, b)| [i, b as usize]).collect();
    key.push(loc.start);
    key
}

fn bad(msg: impl Into<String>) -> PatchError {
    PatchError::BadChunk(msg.into())
}

fn apply_stmt_chunk(p: &mut Program, c: &Chunk) -> Result<(), PatchError> {
    let loc = &c.location;
    let fi = p
        .function_index(&loc.func)
        .ok_or_else(|| bad(format!("no function {}", loc.func)))?;
    let block = p
        .block_mut(fi, &loc.path)
        .ok_or_else(|| bad(format!("no block {:?} in {}", loc.path.0, loc.func)))?;
    if loc.start + loc.len > block.stmts.len() {
        return Err(bad(format!(
            "range {}+{} outside block of {}",
            loc.start,
            loc.len,
            block.stmts.len()
        )));
    }
    match (&c.removed, &c.added) {
        (Fragment::Cond(old), Fragment::Cond(new)) => {
            let s = &mut block.stmts[loc.start];
            match &mut s.kind {
                StmtKind::If(cond, ..) | StmtKind::While(cond, _) if cond == old => *cond = new.clone(),
                _ => return Err(bad("condition does not match")),
            }
        }
        (Fragment::Stmts(old), Fragment::Stmts(new)) => {
            let current = &block.stmts[loc.start..loc.start + loc.len];
            if current.len() != old.len() || !current.iter().zip(old).all(|(a, b)| a.same_shape(b)) {
                return Err(bad("removed statements do not match"));
            }
            block.stmts.splice(loc.start..loc.start + loc.len, new.iter().cloned());
        }
        _ => return Err(bad("fragment kinds do not fit a statement chunk")),
    }
    Ok(())
}

/// Applies `patch` to `base`; the result is renumbered and type-checked.
pub fn apply_patch(base: &Program, patch: &Patch) -> Result<Program, PatchError> {
    let found = fingerprint(base);
    if found != patch.base_fingerprint {
        return Err(PatchError::FingerprintMismatch {
            expected: patch.base_fingerprint.clone(),
            found,
        });
    }
    let mut p = base.clone();
    let mut stmt_chunks: Vec<&Chunk> = patch.chunks.iter().filter(|c| !c.location.function_level).collect();
    // later positions first so earlier indices stay valid
    stmt_chunks.sort_by(|a, b| {
        let fa = base.function_index(&a.location.func);
        let fb = base.function_index(&b.location.func);
        (fb, order_key(&b.location)).cmp(&(fa, order_key(&a.location)))
    });
    for c in stmt_chunks {
        apply_stmt_chunk(&mut p, c)?;
    }
    let mut deletions: Vec<&Chunk> = patch
        .chunks
        .iter()
        .filter(|c| c.location.function_level && c.action == Action::Delete)
        .collect();
    deletions.sort_by_key(|c| std::cmp::Reverse(c.location.start));
    for c in deletions {
        let Fragment::Function(f) = &c.removed else {
            return Err(bad("function deletion without a function"));
        };
        match p.functions.get(c.location.start) {
            Some(g) if g.same_shape(f) => {
                p.functions.remove(c.location.start);
            }
            _ => return Err(bad(format!("function {} not at index {}", f.name, c.location.start))),
        }
    }
    let mut insertions: Vec<&Chunk> = patch
        .chunks
        .iter()
        .filter(|c| c.location.function_level && c.action == Action::Insert)
        .collect();
    insertions.sort_by_key(|c| c.location.start);
    for c in insertions {
        let Fragment::Function(f) = &c.added else {
            return Err(bad("function insertion without a function"));
        };
        if c.location.start > p.functions.len() {
            return Err(bad(format!(
                "cannot insert function {} at {}",
                f.name, c.location.start
            )));
        }
        p.functions.insert(c.location.start, f.clone());
    }
    p.renumber();
    typeck::check(&p)?;
    Ok(p)
}
