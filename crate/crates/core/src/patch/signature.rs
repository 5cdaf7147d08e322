//! Abstracted chunk shapes and tree edit distance between them.

use std::collections::HashMap;
use std::fmt;

use super::*;

/// Ordered labeled tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SigTree {
    pub label: String,
    pub children: Vec<SigTree>,
}

impl SigTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            children: Vec::new(),
        }
    }

    pub fn node(label: impl Into<String>, children: Vec<SigTree>) -> Self {
        Self {
            label: label.into(),
            children,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(SigTree::size).sum::<usize>()
    }
}

impl fmt::Display for SigTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)?;
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Abstractor {
    names: HashMap<String, usize>,
}

impl Abstractor {
    fn id(&mut self, name: &str) -> SigTree {
        let next = self.names.len();
        let k = *self.names.entry(name.to_string()).or_insert(next);
        SigTree::leaf(format!("${k}"))
    }

    fn expr(&mut self, e: &Expr) -> SigTree {
        match e {
            Expr::Int(_) => SigTree::leaf("lit"),
            Expr::Bool(b) => SigTree::leaf(b.to_string()),
            Expr::Array(items) => SigTree::node("array", items.iter().map(|x| self.expr(x)).collect()),
            Expr::Var(n) => self.id(n),
            Expr::Index(n, i) => {
                let id = self.id(n);
                SigTree::node("index", vec![id, self.expr(i)])
            }
            Expr::Len(x) => SigTree::node("len", vec![self.expr(x)]),
            Expr::Call(n, args) => {
                let mut ch = vec![self.id(n)];
                ch.extend(args.iter().map(|a| self.expr(a)));
                SigTree::node("call", ch)
            }
            Expr::Unary(UnOp::Not, x) => SigTree::node("!", vec![self.expr(x)]),
            Expr::Unary(UnOp::Neg, x) => SigTree::node("neg", vec![self.expr(x)]),
            Expr::Binary(op, l, r) => {
                let l = self.expr(l);
                SigTree::node(op.symbol(), vec![l, self.expr(r)])
            }
        }
    }

    fn block(&mut self, b: &Block) -> SigTree {
        SigTree::node("block", b.stmts.iter().map(|s| self.stmt(s)).collect())
    }

    fn stmt(&mut self, s: &Stmt) -> SigTree {
        match &s.kind {
            StmtKind::Let(n, t, e) => {
                let id = self.id(n);
                SigTree::node(format!("let:{t}"), vec![id, self.expr(e)])
            }
            StmtKind::Assign(LValue::Var(n), e) => {
                let id = self.id(n);
                SigTree::node("assign", vec![id, self.expr(e)])
            }
            StmtKind::Assign(LValue::Index(n, i), e) => {
                let id = self.id(n);
                let i = self.expr(i);
                SigTree::node("assign-index", vec![id, i, self.expr(e)])
            }
            StmtKind::If(c, t, e) => {
                let mut ch = vec![self.expr(c), self.block(t)];
                if let Some(e) = e {
                    ch.push(self.block(e));
                }
                SigTree::node("if", ch)
            }
            StmtKind::While(c, b) => {
                let c = self.expr(c);
                SigTree::node("while", vec![c, self.block(b)])
            }
            StmtKind::Return(None) => SigTree::leaf("return"),
            StmtKind::Return(Some(e)) => SigTree::node("return", vec![self.expr(e)]),
            StmtKind::Abort(_) => SigTree::node("abort", vec![SigTree::leaf("str")]),
            StmtKind::Expr(e) => SigTree::node("expr", vec![self.expr(e)]),
        }
    }

    fn fragment(&mut self, label: &str, f: &Fragment) -> SigTree {
        let children = match f {
            Fragment::Stmts(s) => s.iter().map(|s| self.stmt(s)).collect(),
            Fragment::Cond(e) => vec![self.expr(e)],
            Fragment::Function(func) => {
                let mut ch = vec![self.id(&func.name)];
                for p in &func.params {
                    let id = self.id(&p.name);
                    ch.push(SigTree::node(format!("param:{}", p.ty), vec![id]));
                }
                ch.push(SigTree::leaf(format!("ret:{}", func.ret)));
                ch.push(self.block(&func.body));
                vec![SigTree::node("fn", ch)]
            }
        };
        SigTree::node(label, children)
    }
}

/// Shape of a chunk with identifiers numbered by first occurrence and
/// literals (integers, abort messages) erased.
pub fn chunk_signature(c: &Chunk) -> SigTree {
    let mut a = Abstractor::default();
    let removed = a.fragment("removed", &c.removed);
    let added = a.fragment("added", &c.added);
    SigTree::node(c.action.name(), vec![removed, added])
}

struct Flat<'a> {
    labels: Vec<&'a str>,
    /// Leftmost leaf descendant, in postorder numbering.
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

fn flatten(t: &SigTree) -> Flat<'_> {
    fn go<'a>(t: &'a SigTree, labels: &mut Vec<&'a str>, lml: &mut Vec<usize>) -> usize {
        let mut first = None;
        for c in &t.children {
            let l = go(c, labels, lml);
            first.get_or_insert(l);
        }
        let me = labels.len();
        labels.push(&t.label);
        let leftmost = first.unwrap_or(me);
        lml.push(leftmost);
        leftmost
    }
    let mut labels = Vec::new();
    let mut lml = Vec::new();
    go(t, &mut labels, &mut lml);
    let n = labels.len();
    let keyroots = (0..n).filter(|&i| !(i + 1..n).any(|j| lml[j] == lml[i])).collect();
    Flat { labels, lml, keyroots }
}

/// Unit-cost ordered tree edit distance (Zhang and Shasha).
pub fn tree_edit_distance(a: &SigTree, b: &SigTree) -> usize {
    let (fa, fb) = (flatten(a), flatten(b));
    let (n, m) = (fa.labels.len(), fb.labels.len());
    let mut td = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];
    for &i in &fa.keyroots {
        for &j in &fb.keyroots {
            let (li, lj) = (fa.lml[i], fb.lml[j]);
            // fd[x][y]: forest lml..x-1 vs lml..y-1, offset by li/lj
            fd[0][0] = 0;
            for x in 1..=i - li + 1 {
                fd[x][0] = fd[x - 1][0] + 1;
            }
            for y in 1..=j - lj + 1 {
                fd[0][y] = fd[0][y - 1] + 1;
            }
            for x in 1..=i - li + 1 {
                for y in 1..=j - lj + 1 {
                    let (ni, nj) = (li + x - 1, lj + y - 1);
                    let del = fd[x - 1][y] + 1;
                    let ins = fd[x][y - 1] + 1;
                    if fa.lml[ni] == li && fb.lml[nj] == lj {
                        let sub = fd[x - 1][y - 1] + usize::from(fa.labels[ni] != fb.labels[nj]);
                        fd[x][y] = del.min(ins).min(sub);
                        td[ni][nj] = fd[x][y];
                    } else {
                        let px = fa.lml[ni] - li;
                        let py = fb.lml[nj] - lj;
                        fd[x][y] = del.min(ins).min(fd[px][py] + td[ni][nj]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// `1 - ted / (|a| + |b|)`, in `[0, 1]`.
pub fn similarity(a: &SigTree, b: &SigTree) -> f64 {
    let total = a.size() + b.size();
    1.0 - tree_edit_distance(a, b) as f64 / total as f64
}
