//! Statement-level mutation operators for the iterative search.

use std::collections::HashSet;
use std::fmt;

use crate::faultloc::Ranking;
use crate::lang::pretty::stmts_to_string;
use crate::lang::typeck;
use crate::lang::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    ReplaceRelOp,
    ReplaceArithOp,
    NegateCondition,
    GuardConjoin,
    GuardDisjoin,
    ReplaceConstant,
    ReplaceVariable,
    InsertGuardAbort,
    InsertGuardReturn,
    DeleteStatement,
    ReplaceWithIngredient,
}

/// A candidate edit: the target statement is replaced by `replacement`
/// (empty for deletion, guard plus original for insertions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationOperator {
    pub kind: MutationKind,
    pub target: NodeId,
    pub replacement: Vec<Stmt>,
    /// Ingredient statement, for [`MutationKind::ReplaceWithIngredient`].
    pub ingredient: Option<NodeId>,
}

impl MutationOperator {
    /// The mutated program, or `None` if it does not type-check.
    pub fn apply(&self, p: &Program) -> Option<Program> {
        let (path, idx) = p.locate(self.target)?;
        let mut q = p.clone();
        let block = q.block_mut(self.target.func as usize, &path)?;
        block.stmts.splice(idx..idx + 1, self.replacement.iter().cloned());
        q.renumber();
        typeck::check(&q).ok()?;
        Some(q)
    }

    pub fn describe(&self, p: &Program) -> String {
        let line = p.stmt(self.target).map_or(0, |s| s.line);
        let new = match self.replacement.first() {
            None => "(deleted)".to_string(),
            Some(s) => stmts_to_string(std::slice::from_ref(s))
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" "),
        };
        format!(
            "{:?} at {}:{} -> {}",
            self.kind,
            p.function_name(self.target),
            line,
            new
        )
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Pre-order positions of sub-expressions satisfying `pred` across a
/// statement's own expressions.
fn positions(s: &Stmt, pred: impl Fn(&Expr) -> bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = 0;
    for e in s.own_exprs() {
        e.walk(&mut |x| {
            if pred(x) {
                out.push(k);
            }
            k += 1;
        });
    }
    out
}

/// Copy of `s` with the `n`-th own sub-expression (pre-order) rewritten.
fn rewrite_at(s: &Stmt, n: usize, f: impl FnOnce(&mut Expr)) -> Stmt {
    let mut out = s.clone();
    let mut k = 0;
    let mut f = Some(f);
    for e in out.own_exprs_mut() {
        e.walk_mut(&mut |x| {
            if k == n {
                if let Some(f) = f.take() {
                    f(x);
                }
            }
            k += 1;
        });
    }
    out
}

fn nth_expr(s: &Stmt, n: usize) -> Option<Expr> {
    let mut k = 0;
    let mut found = None;
    for e in s.own_exprs() {
        e.walk(&mut |x| {
            if k == n {
                found = Some(x.clone());
            }
            k += 1;
        });
    }
    found
}

fn with_condition(s: &Stmt, cond: Expr) -> Stmt {
    let mut out = s.clone();
    match &mut out.kind {
        StmtKind::If(c, ..) | StmtKind::While(c, _) => *c = cond,
        _ => unreachable!("not a condition"),
    }
    out
}

fn guard_stmt(cond: Expr, body: Stmt) -> Stmt {
    Stmt::new(StmtKind::If(cond, Block::new(vec![body]), None))
}

pub(crate) fn constant_pool(f: &Function) -> Vec<i64> {
    let mut pool = vec![-1, 0, 1];
    for c in f.constants() {
        if !pool.contains(&c) {
            pool.push(c);
        }
    }
    pool
}

/// Guard conditions over the variables in scope.
pub fn guard_templates(scope: &[(String, Type)], constants: &[i64]) -> Vec<Expr> {
    let of = |t: Type| -> Vec<&str> {
        scope
            .iter()
            .filter(|(_, vt)| *vt == t)
            .map(|(n, _)| n.as_str())
            .collect()
    };
    let (ints, bools, arrays) = (of(Type::Int), of(Type::Bool), of(Type::IntArray));
    let mut out = Vec::new();
    for v in &ints {
        for op in BinOp::RELATIONAL {
            for &c in constants {
                out.push(Expr::binary(op, Expr::var(*v), Expr::Int(c)));
            }
        }
    }
    for (i, a) in ints.iter().enumerate() {
        for b in &ints[i + 1..] {
            for op in BinOp::RELATIONAL {
                out.push(Expr::binary(op, Expr::var(*a), Expr::var(*b)));
            }
        }
    }
    for b in &bools {
        out.push(Expr::var(*b));
        out.push(Expr::not(Expr::var(*b)));
    }
    for a in &arrays {
        out.push(Expr::binary(
            BinOp::Eq,
            Expr::Len(Box::new(Expr::var(*a))),
            Expr::Int(0),
        ));
    }
    for v in &ints {
        out.push(Expr::binary(BinOp::Lt, Expr::var(*v), Expr::Int(0)));
        for a in &arrays {
            out.push(Expr::binary(
                BinOp::Ge,
                Expr::var(*v),
                Expr::Len(Box::new(Expr::var(*a))),
            ));
        }
    }
    let mut seen = HashSet::new();
    out.retain(|e| seen.insert(e.clone()));
    out
}

pub(crate) fn default_returns(ret: Type) -> Vec<Option<Expr>> {
    match ret {
        Type::Int => vec![Some(Expr::Int(0)), Some(Expr::Int(-1))],
        Type::Bool => vec![Some(Expr::Bool(false)), Some(Expr::Bool(true))],
        Type::IntArray => vec![Some(Expr::Array(Vec::new()))],
        Type::Unit => vec![None],
    }
}

fn ingredients(p: &Program) -> Vec<&Stmt> {
    let mut out: Vec<&Stmt> = Vec::new();
    for s in p.statements() {
        if !s.is_condition() && !out.iter().any(|o| o.same_shape(s)) {
            out.push(s);
        }
    }
    out
}

fn mutations_for(p: &Program, s: &Stmt, scope: &[(String, Type)], out: &mut Vec<MutationOperator>) {
    let func = &p.functions[s.id.func as usize];
    let constants = constant_pool(func);
    let mut push = |kind, replacement: Vec<Stmt>, ingredient: Option<NodeId>| {
        out.push(MutationOperator {
            kind,
            target: s.id,
            replacement,
            ingredient,
        })
    };

    for (kind, ops) in [
        (MutationKind::ReplaceRelOp, &BinOp::RELATIONAL[..]),
        (MutationKind::ReplaceArithOp, &BinOp::ARITHMETIC[..]),
    ] {
        for n in positions(s, |e| matches!(e, Expr::Binary(op, ..) if ops.contains(op))) {
            let Some(Expr::Binary(old, ..)) = nth_expr(s, n) else {
                continue;
            };
            for &op in ops.iter().filter(|&&op| op != old) {
                let m = rewrite_at(s, n, |e| {
                    if let Expr::Binary(o, ..) = e {
                        *o = op;
                    }
                });
                push(kind, vec![m], None);
            }
        }
    }

    let templates = guard_templates(scope, &constants);
    if let Some(cond) = s.condition() {
        let negated = match cond {
            Expr::Unary(UnOp::Not, inner) => (**inner).clone(),
            c => Expr::not(c.clone()),
        };
        push(MutationKind::NegateCondition, vec![with_condition(s, negated)], None);
        for (kind, op) in [
            (MutationKind::GuardConjoin, BinOp::And),
            (MutationKind::GuardDisjoin, BinOp::Or),
        ] {
            for g in &templates {
                push(
                    kind,
                    vec![with_condition(s, Expr::binary(op, cond.clone(), g.clone()))],
                    None,
                );
            }
        }
    }

    for n in positions(s, |e| matches!(e, Expr::Int(_))) {
        let Some(Expr::Int(old)) = nth_expr(s, n) else { continue };
        let mut values = constants.clone();
        for c in [old.wrapping_sub(1), old.wrapping_add(1)] {
            if !values.contains(&c) {
                values.push(c);
            }
        }
        for &c in values.iter().filter(|&&c| c != old) {
            push(
                MutationKind::ReplaceConstant,
                vec![rewrite_at(s, n, |e| *e = Expr::Int(c))],
                None,
            );
        }
    }

    for n in positions(s, |e| matches!(e, Expr::Var(_))) {
        let Some(Expr::Var(old)) = nth_expr(s, n) else { continue };
        let Some(ty) = scope.iter().find(|(v, _)| *v == old).map(|(_, t)| *t) else {
            continue;
        };
        for (v, _) in scope.iter().filter(|(v, t)| *t == ty && *v != old) {
            push(
                MutationKind::ReplaceVariable,
                vec![rewrite_at(s, n, |e| *e = Expr::var(v))],
                None,
            );
        }
    }

    for g in &templates {
        let abort = Stmt::new(StmtKind::Abort("invalid input".into()));
        push(
            MutationKind::InsertGuardAbort,
            vec![guard_stmt(g.clone(), abort), s.clone()],
            None,
        );
    }
    for d in default_returns(func.ret) {
        for g in &templates {
            let ret = Stmt::new(StmtKind::Return(d.clone()));
            push(
                MutationKind::InsertGuardReturn,
                vec![guard_stmt(g.clone(), ret), s.clone()],
                None,
            );
        }
    }

    push(MutationKind::DeleteStatement, vec![], None);

    for ing in ingredients(p) {
        if ing.id != s.id && !ing.same_shape(s) {
            push(MutationKind::ReplaceWithIngredient, vec![ing.clone()], Some(ing.id));
        }
    }
}

/// Candidate edits for the top `top_k` ranked statements, statement by
/// statement in rank order and in [`MutationKind`] order within each.
pub fn enumerate_mutations(p: &Program, ranking: &Ranking, top_k: usize) -> Vec<MutationOperator> {
    let scopes = typeck::scopes(p).unwrap_or_default();
    let mut out = Vec::new();
    for e in ranking.top(top_k) {
        let (Some(s), Some(scope)) = (p.stmt(e.node), scopes.get(&e.node)) else {
            continue;
        };
        mutations_for(p, s, scope, &mut out);
    }
    out
}
