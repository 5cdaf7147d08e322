use std::collections::BTreeMap;

use super::*;

/// Longest common subsequence as index pairs, ascending.
pub(crate) fn lcs<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if eq(&a[i], &b[j]) {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < n && j < m {
        if eq(&a[i], &b[j]) && dp[i][j] == dp[i + 1][j + 1] + 1 {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn recursable(x: &Stmt, y: &Stmt) -> bool {
    match (&x.kind, &y.kind) {
        (StmtKind::If(c1, t1, e1), StmtKind::If(c2, t2, e2)) => {
            let bodies = t1.same_shape(t2)
                && match (e1, e2) {
                    (Some(a), Some(b)) => a.same_shape(b),
                    (None, None) => true,
                    _ => false,
                };
            e1.is_some() == e2.is_some() && (c1 == c2 || bodies)
        }
        (StmtKind::While(c1, b1), StmtKind::While(c2, b2)) => c1 == c2 || b1.same_shape(b2),
        _ => false,
    }
}

fn map_same(x: &Stmt, y: &Stmt, map: &mut BTreeMap<NodeId, NodeId>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    x.walk(&mut |s| xs.push(s.id));
    y.walk(&mut |s| ys.push(s.id));
    map.extend(xs.into_iter().zip(ys));
}

struct Differ<'a> {
    func: &'a str,
    chunks: Vec<Chunk>,
    map: BTreeMap<NodeId, NodeId>,
}

impl<'a> Differ<'a> {
    fn block(&mut self, b: &Block, t: &Block, path: &BlockPath) {
        let anchors = lcs(&b.stmts, &t.stmts, |x, y| x.same_shape(y));
        let (mut i, mut j) = (0, 0);
        for (ai, aj) in anchors.into_iter().chain([(b.stmts.len(), t.stmts.len())]) {
            self.region(b, t, path, (i, ai), (j, aj));
            if ai < b.stmts.len() {
                map_same(&b.stmts[ai], &t.stmts[aj], &mut self.map);
            }
            i = ai + 1;
            j = aj + 1;
        }
    }

    fn region(&mut self, b: &Block, t: &Block, path: &BlockPath, (i0, i1): (usize, usize), (j0, j1): (usize, usize)) {
        let (n, m) = (i1 - i0, j1 - j0);
        if n == 0 && m == 0 {
            return;
        }
        let removed = &b.stmts[i0..i1];
        let added = &t.stmts[j0..j1];
        if n == m && removed.iter().zip(added).all(|(x, y)| recursable(x, y)) {
            for (k, (x, y)) in removed.iter().zip(added).enumerate() {
                self.pair(x, y, path, i0 + k);
            }
            return;
        }
        for (x, y) in removed.iter().zip(added) {
            self.map.insert(x.id, y.id);
        }
        let action = match (n, m) {
            (0, _) => Action::Insert,
            (_, 0) => Action::Delete,
            _ => Action::Replace,
        };
        let lines = if n > 0 {
            (removed[0].line, last_line(&removed[n - 1]))
        } else {
            let l = b.stmts.get(i0).map_or(b.close_line, |s| s.line);
            (l, l)
        };
        self.chunks.push(Chunk {
            location: ChunkLocation {
                func: self.func.to_string(),
                path: path.clone(),
                start: i0,
                len: n,
                lines,
                function_level: false,
            },
            action,
            removed: Fragment::Stmts(removed.to_vec()),
            added: Fragment::Stmts(added.to_vec()),
        });
    }

    fn pair(&mut self, x: &Stmt, y: &Stmt, path: &BlockPath, idx: usize) {
        self.map.insert(x.id, y.id);
        let (cx, cy) = (x.condition().unwrap(), y.condition().unwrap());
        if cx != cy {
            self.chunks.push(Chunk {
                location: ChunkLocation {
                    func: self.func.to_string(),
                    path: path.clone(),
                    start: idx,
                    len: 1,
                    lines: (x.line, x.line),
                    function_level: false,
                },
                action: Action::Update,
                removed: Fragment::Cond(cx.clone()),
                added: Fragment::Cond(cy.clone()),
            });
        }
        for (bi, (bx, by)) in x.blocks().into_iter().zip(y.blocks()).enumerate() {
            self.block(bx, by, &path.child(idx, bi as u8));
        }
    }
}

fn same_header(a: &Function, b: &Function) -> bool {
    a.name == b.name && a.params == b.params && a.ret == b.ret
}

fn walk_diff(base: &Program, target: &Program) -> (Vec<Chunk>, BTreeMap<NodeId, NodeId>) {
    let pairs = lcs(&base.functions, &target.functions, same_header);
    let mut chunks = Vec::new();
    let mut map = BTreeMap::new();
    for &(bi, ti) in &pairs {
        let (bf, tf) = (&base.functions[bi], &target.functions[ti]);
        let mut d = Differ {
            func: &bf.name,
            chunks: Vec::new(),
            map: BTreeMap::new(),
        };
        d.block(&bf.body, &tf.body, &BlockPath::root());
        d.chunks.sort_by_key(|c| c.location.lines);
        chunks.extend(d.chunks);
        map.extend(d.map);
    }
    for (bi, f) in base.functions.iter().enumerate() {
        if !pairs.iter().any(|&(b, _)| b == bi) {
            chunks.push(Chunk {
                location: ChunkLocation {
                    func: f.name.clone(),
                    path: BlockPath::root(),
                    start: bi,
                    len: 1,
                    lines: (f.line, f.body.close_line),
                    function_level: true,
                },
                action: Action::Delete,
                removed: Fragment::Function(f.clone()),
                added: Fragment::EMPTY,
            });
        }
    }
    let end_line = base.functions.last().map_or(1, |f| f.body.close_line + 2);
    for (ti, f) in target.functions.iter().enumerate() {
        if !pairs.iter().any(|&(_, t)| t == ti) {
            let next = pairs
                .iter()
                .find(|&&(_, t)| t > ti)
                .map(|&(b, _)| base.functions[b].line);
            let l = next.unwrap_or(end_line);
            chunks.push(Chunk {
                location: ChunkLocation {
                    func: f.name.clone(),
                    path: BlockPath::root(),
                    start: ti,
                    len: 0,
                    lines: (l, l),
                    function_level: true,
                },
                action: Action::Insert,
                removed: Fragment::EMPTY,
                added: Fragment::Function(f.clone()),
            });
        }
    }
    (chunks, map)
}

/// Minimal statement-level edit script from `base` to `target`.
pub fn ast_diff(base: &Program, target: &Program) -> Patch {
    Patch {
        base_fingerprint: fingerprint(base),
        chunks: walk_diff(base, target).0,
    }
}

/// Correspondence of statements between two versions of a program: matched
/// and updated statements map to their counterparts, replaced ranges map
/// positionally, and inserted or deleted statements have no image.
pub fn align(base: &Program, target: &Program) -> BTreeMap<NodeId, NodeId> {
    walk_diff(base, target).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcs_basic() {
        let a: Vec<char> = "abcbdab".chars().collect();
        let b: Vec<char> = "bdcaba".chars().collect();
        assert_eq!(lcs(&a, &b, |x, y| x == y).len(), 4);
    }

    #[test]
    fn identical_programs_have_empty_patch() {
        let p = parse("fn f(a: int) -> int { return a; }").unwrap();
        assert!(ast_diff(&p, &p).is_empty());
    }

    #[test]
    fn single_replacement() {
        let a = parse("fn f(a: int) -> int { let b: int = a; return b; }").unwrap();
        let b = parse("fn f(a: int) -> int { let b: int = a + 1; return b; }").unwrap();
        let patch = ast_diff(&a, &b);
        assert_eq!(patch.chunks.len(), 1);
        assert_eq!(patch.chunks[0].action, Action::Replace);
        assert_eq!(patch.chunks[0].location.lines, (2, 2));
    }

    #[test]
    fn header_change_is_update_and_nested_edits_recurse() {
        let a = parse("fn f(a: int) -> int { if (a > 0) { a = 1; } return a; }").unwrap();
        let b = parse("fn f(a: int) -> int { if (a >= 0) { a = 1; } return a; }").unwrap();
        let patch = ast_diff(&a, &b);
        assert_eq!(patch.chunks.len(), 1);
        assert_eq!(patch.chunks[0].action, Action::Update);
        let c = parse("fn f(a: int) -> int { if (a > 0) { a = 2; } return a; }").unwrap();
        let patch = ast_diff(&a, &c);
        assert_eq!(patch.chunks.len(), 1);
        assert_eq!(patch.chunks[0].location.path, BlockPath(vec![(0, 0)]));
    }

    #[test]
    fn contiguous_edits_merge() {
        let a = parse("fn f(a: int) -> int { let b: int = 1; let c: int = 2; return a; }").unwrap();
        let b = parse("fn f(a: int) -> int { let b: int = 3; let c: int = 4; let d: int = 5; return a; }").unwrap();
        let patch = ast_diff(&a, &b);
        assert_eq!(patch.chunks.len(), 1);
        assert_eq!(patch.chunks[0].location.len, 2);
    }

    #[test]
    fn function_insertion_is_whole_function_chunk() {
        let a = parse("fn f(a: int) -> int { return a; }").unwrap();
        let b = parse("fn g() -> int { return 1; }\nfn f(a: int) -> int { return a + g(); }").unwrap();
        let patch = ast_diff(&a, &b);
        assert_eq!(patch.chunks.len(), 2);
        assert!(patch
            .chunks
            .iter()
            .any(|c| c.location.function_level && c.action == Action::Insert));
    }
}
