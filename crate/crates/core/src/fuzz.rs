//! Random well-typed MiniLang programs, calls and edits for property tests
//! and benchmarks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::lang::*;

const OPS_CMP: [BinOp; 6] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];
const OPS_ARITH: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem];
const TYPES: [Type; 3] = [Type::Int, Type::Bool, Type::IntArray];

struct Sig {
    name: String,
    params: Vec<Type>,
    ret: Type,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    sigs: Vec<Sig>,
    scopes: Vec<Vec<(String, Type)>>,
    fresh: usize,
}

impl<'r, R: Rng> Gen<'r, R> {
    fn vars_of(&self, t: Type) -> Vec<String> {
        self.scopes
            .iter()
            .flatten()
            .filter(|(_, vt)| *vt == t)
            .map(|(n, _)| n.clone())
            .collect()
    }

    fn pick_var(&mut self, t: Type) -> Option<String> {
        self.vars_of(t).choose(self.rng).cloned()
    }

    fn expr(&mut self, t: Type, depth: u32) -> Expr {
        let leaf = depth == 0 || self.rng.gen_bool(0.35);
        if leaf {
            if self.rng.gen_bool(0.6) {
                if let Some(v) = self.pick_var(t) {
                    return Expr::Var(v);
                }
            }
            return match t {
                Type::Int => Expr::Int(self.rng.gen_range(-3..=5)),
                Type::Bool => Expr::Bool(self.rng.gen()),
                _ => {
                    let n = self.rng.gen_range(0..=3);
                    Expr::Array((0..n).map(|_| Expr::Int(self.rng.gen_range(-2..=4))).collect())
                }
            };
        }
        let d = depth - 1;
        match t {
            Type::Int => match self.rng.gen_range(0..5) {
                0 => match self.pick_var(Type::IntArray) {
                    Some(a) => Expr::Index(a, Box::new(self.expr(Type::Int, d))),
                    None => self.expr(Type::Int, 0),
                },
                1 => Expr::Len(Box::new(self.expr(Type::IntArray, d))),
                2 => Expr::Unary(UnOp::Neg, Box::new(self.expr(Type::Int, d))),
                3 => self.call(Type::Int, d).unwrap_or(Expr::Int(1)),
                _ => {
                    let op = *OPS_ARITH.choose(self.rng).unwrap();
                    Expr::binary(op, self.expr(Type::Int, d), self.expr(Type::Int, d))
                }
            },
            Type::Bool => match self.rng.gen_range(0..5) {
                0 => Expr::not(self.expr(Type::Bool, d)),
                1 => {
                    let op = if self.rng.gen() { BinOp::And } else { BinOp::Or };
                    Expr::binary(op, self.expr(Type::Bool, d), self.expr(Type::Bool, d))
                }
                2 => self.call(Type::Bool, d).unwrap_or(Expr::Bool(false)),
                _ => {
                    let op = *OPS_CMP.choose(self.rng).unwrap();
                    Expr::binary(op, self.expr(Type::Int, d), self.expr(Type::Int, d))
                }
            },
            _ => match self.call(Type::IntArray, d) {
                Some(c) if self.rng.gen_bool(0.3) => c,
                _ => self.expr(Type::IntArray, 0),
            },
        }
    }

    fn call(&mut self, t: Type, depth: u32) -> Option<Expr> {
        let options: Vec<usize> = (0..self.sigs.len()).filter(|&i| self.sigs[i].ret == t).collect();
        let &i = options.choose(self.rng)?;
        let params = self.sigs[i].params.clone();
        let args = params.into_iter().map(|p| self.expr(p, depth)).collect();
        Some(Expr::Call(self.sigs[i].name.clone(), args))
    }

    fn block(&mut self, depth: u32, ret: Type, len: usize) -> Block {
        self.scopes.push(Vec::new());
        let stmts = (0..len).map(|_| self.stmt(depth, ret)).collect();
        self.scopes.pop();
        Block::new(stmts)
    }

    fn stmt(&mut self, depth: u32, ret: Type) -> Stmt {
        let choice = self.rng.gen_range(0..10);
        let kind = match choice {
            0..=2 => {
                let t = *TYPES.choose(self.rng).unwrap();
                let e = self.expr(t, 2);
                let name = format!("v{}", self.fresh);
                self.fresh += 1;
                self.scopes.last_mut().unwrap().push((name.clone(), t));
                StmtKind::Let(name, t, e)
            }
            3..=4 => {
                let t = *TYPES.choose(self.rng).unwrap();
                match self.pick_var(t) {
                    Some(v) if t == Type::IntArray && self.rng.gen() => {
                        StmtKind::Assign(LValue::Index(v, self.expr(Type::Int, 1)), self.expr(Type::Int, 2))
                    }
                    Some(v) => StmtKind::Assign(LValue::Var(v), self.expr(t, 2)),
                    None => StmtKind::Expr(self.expr(Type::Int, 1)),
                }
            }
            5 if depth > 0 => {
                let c = self.expr(Type::Bool, 2);
                let n = self.rng.gen_range(0..3);
                let then = self.block(depth - 1, ret, n);
                let els = self.rng.gen_bool(0.5).then(|| {
                    let n = self.rng.gen_range(0..3);
                    self.block(depth - 1, ret, n)
                });
                StmtKind::If(c, then, els)
            }
            6 if depth > 0 => {
                // a counted loop so random programs usually terminate
                let i = format!("v{}", self.fresh);
                self.fresh += 1;
                let bound = self.rng.gen_range(0..4);
                let cond = Expr::binary(BinOp::Lt, Expr::var(&i), Expr::Int(bound));
                let n = self.rng.gen_range(0..2);
                self.scopes.push(vec![(i.clone(), Type::Int)]);
                let mut body = self.block(depth - 1, ret, n);
                self.scopes.pop();
                body.stmts.push(Stmt::new(StmtKind::Assign(
                    LValue::Var(i.clone()),
                    Expr::binary(BinOp::Add, Expr::var(&i), Expr::Int(1)),
                )));
                let init = Stmt::new(StmtKind::Let(i, Type::Int, Expr::Int(0)));
                return Stmt::new(StmtKind::If(
                    Expr::Bool(true),
                    Block::new(vec![init, Stmt::new(StmtKind::While(cond, body))]),
                    None,
                ));
            }
            7 => {
                if self.rng.gen_bool(0.2) {
                    StmtKind::Abort("stop".into())
                } else {
                    StmtKind::Return(Some(self.expr(ret, 2)))
                }
            }
            _ => {
                let t = *TYPES.choose(self.rng).unwrap();
                StmtKind::Expr(self.expr(t, 2))
            }
        };
        Stmt::new(kind)
    }
}

/// A random program of one to three functions; later functions may call
/// earlier ones, so there is no recursion.
pub fn random_program(rng: &mut impl Rng) -> Program {
    loop {
        if let Some(p) = try_program(rng) {
            return p;
        }
    }
}

fn try_program(rng: &mut impl Rng) -> Option<Program> {
    let nfuncs = rng.gen_range(1..=3);
    let mut g = Gen {
        rng,
        sigs: Vec::new(),
        scopes: Vec::new(),
        fresh: 0,
    };
    let mut functions = Vec::new();
    for fi in 0..nfuncs {
        let nparams = g.rng.gen_range(0..=3);
        let params: Vec<Param> = (0..nparams)
            .map(|i| Param {
                name: format!("p{i}"),
                ty: *TYPES.choose(g.rng).unwrap(),
            })
            .collect();
        let ret = if g.rng.gen_bool(0.7) { Type::Int } else { Type::Bool };
        g.scopes = vec![params.iter().map(|p| (p.name.clone(), p.ty)).collect()];
        g.fresh = 0;
        let len = g.rng.gen_range(1..=5);
        let mut body = g.block(2, ret, len);
        g.scopes = vec![params.iter().map(|p| (p.name.clone(), p.ty)).collect()];
        body.stmts.push(Stmt::new(StmtKind::Return(Some(g.expr(ret, 1)))));
        let name = format!("f{fi}");
        functions.push(Function {
            name: name.clone(),
            params: params.clone(),
            ret,
            body,
            line: 0,
        });
        g.sigs.push(Sig {
            name,
            params: params.iter().map(|p| p.ty).collect(),
            ret,
        });
    }
    let mut p = Program { functions };
    p.renumber();
    crate::lang::typeck::check(&p).ok()?;
    Some(p)
}

pub fn random_value(t: Type, rng: &mut impl Rng) -> Value {
    match t {
        Type::Int => Value::Int(rng.gen_range(-4..=6)),
        Type::Bool => Value::Bool(rng.gen()),
        Type::IntArray => {
            let n = rng.gen_range(0..=4);
            Value::IntArray((0..n).map(|_| rng.gen_range(-3..=5)).collect())
        }
        Type::Unit => Value::UNIT,
    }
}

/// A call to a random function with random arguments.
pub fn random_call(p: &Program, rng: &mut impl Rng) -> Call {
    let f = p.functions.choose(rng).expect("program has functions");
    Call::new(
        f.name.clone(),
        f.params.iter().map(|prm| random_value(prm.ty, rng)).collect(),
    )
}

/// A random condition site of `p`, if any.
pub fn random_condition(p: &Program, rng: &mut impl Rng) -> Option<NodeId> {
    let conds: Vec<NodeId> = p
        .statements()
        .into_iter()
        .filter(|s| s.is_condition())
        .map(|s| s.id)
        .collect();
    conds.choose(rng).copied()
}

/// A well-typed variant of `p` with a few random statement-level edits.
pub fn random_edit(p: &Program, rng: &mut impl Rng) -> Program {
    let edits = rng.gen_range(1..=3);
    let mut out = p.clone();
    for _ in 0..edits {
        for _attempt in 0..20 {
            if let Some(q) = try_edit(&out, rng) {
                out = q;
                break;
            }
        }
    }
    out
}

fn try_edit(p: &Program, rng: &mut impl Rng) -> Option<Program> {
    let stmts = p.statements();
    let target = stmts.choose(rng)?.id;
    let (path, idx) = p.locate(target)?;
    let mut q = p.clone();
    let block = q.block_mut(target.func as usize, &path)?;
    match rng.gen_range(0..5) {
        0 => {
            block.stmts.remove(idx);
        }
        1 => {
            let s = block.stmts[idx].clone();
            block.stmts.insert(idx, s);
        }
        2 => {
            let new_op = *OPS_CMP.choose(rng).unwrap();
            let s = &mut block.stmts[idx];
            let mut exprs = s.own_exprs_mut();
            let e = exprs.choose_mut(rng)?;
            e.walk_mut(&mut |x| match x {
                Expr::Binary(op, ..) if op.is_relational() => *op = new_op,
                Expr::Int(v) => *v += 1,
                _ => {}
            });
        }
        3 => {
            let s = block.stmts[idx].clone();
            let wrapped = Stmt::new(StmtKind::If(Expr::Bool(rng.gen()), Block::new(vec![s]), None));
            block.stmts[idx] = wrapped;
        }
        _ => {
            let s = block.stmts.remove(idx);
            let to = rng.gen_range(0..=block.stmts.len());
            block.stmts.insert(to, s);
        }
    }
    q.renumber();
    crate::lang::typeck::check(&q).ok()?;
    Some(q)
}

const KEYWORDS: [&str; 13] = [
    "fn", "let", "if", "else", "while", "return", "abort", "true", "false", "len", "int", "bool", "unit",
];

/// Consistent token-level renaming of identifiers to `zq{n}` and,
/// optionally, the injective literal map `v -> 7v + 3`. Strings are left
/// alone. `names` carries the mapping across calls.
pub fn rename_source(src: &str, names: &mut BTreeMap<String, String>, literals: bool) -> String {
    let cs: Vec<char> = src.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c == '"' {
            let end = cs[i + 1..]
                .iter()
                .position(|&x| x == '"')
                .map_or(cs.len() - 1, |k| i + 1 + k);
            out.extend(&cs[i..=end]);
            i = end + 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            let w: String = cs[start..i].iter().collect();
            if KEYWORDS.contains(&w.as_str()) {
                out.push_str(&w);
            } else {
                let n = names.len();
                out.push_str(names.entry(w).or_insert_with(|| format!("zq{n}")));
            }
        } else if c.is_ascii_digit() && literals {
            let start = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let v: i64 = cs[start..i].iter().collect::<String>().parse().unwrap_or(0);
            out.push_str(&(v * 7 + 3).to_string());
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}
