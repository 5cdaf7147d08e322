//! Typed syntax tree for MiniLang.
//!
//! Statements carry a [`NodeId`] (function index plus pre-order statement
//! index) and the 1-based line they occupy in the canonical rendering of the
//! program. Both are recomputed by [`Program::renumber`] after every edit, so
//! a freshly parsed or freshly edited program always has canonical metadata.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    IntArray,
    Unit,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Bool => "bool",
            Type::IntArray => "int[]",
            Type::Unit => "unit",
        })
    }
}

/// Identity of a statement: `(function index, pre-order index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub func: u32,
    pub index: u32,
}

impl NodeId {
    pub fn new(func: u32, index: u32) -> Self {
        Self { func, index }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub const RELATIONAL: [BinOp; 6] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];
    pub const ARITHMETIC: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter. All binary operators are
    /// left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_relational(self) -> bool {
        Self::RELATIONAL.contains(&self)
    }

    pub fn is_arithmetic(self) -> bool {
        Self::ARITHMETIC.contains(&self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Array(Vec<Expr>),
    Var(String),
    Index(String, Box<Expr>),
    Len(Box<Expr>),
    Call(String, Vec<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    /// Visits this expression and all sub-expressions in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => {}
            Expr::Array(items) | Expr::Call(_, items) => items.iter().for_each(|e| e.walk(f)),
            Expr::Index(_, idx) => idx.walk(f),
            Expr::Len(e) | Expr::Unary(_, e) => e.walk(f),
            Expr::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
        }
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => {}
            Expr::Array(items) | Expr::Call(_, items) => items.iter_mut().for_each(|e| e.walk_mut(f)),
            Expr::Index(_, idx) => idx.walk_mut(f),
            Expr::Len(e) | Expr::Unary(_, e) => e.walk_mut(f),
            Expr::Binary(_, l, r) => {
                l.walk_mut(f);
                r.walk_mut(f);
            }
        }
    }

    /// Variable names read by this expression, in first-occurrence order.
    pub fn used_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk(&mut |e| {
            let name = match e {
                Expr::Var(n) | Expr::Index(n, _) => n,
                _ => return,
            };
            if !out.iter().any(|o| o == name) {
                out.push(name.clone());
            }
        });
        out
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Let(String, Type, Expr),
    Assign(LValue, Expr),
    If(Expr, Block, Option<Block>),
    While(Expr, Block),
    Return(Option<Expr>),
    Abort(String),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub id: NodeId,
    pub line: u32,
    pub kind: StmtKind,
}

impl Stmt {
    /// A statement with placeholder metadata; call [`Program::renumber`] after
    /// splicing it into a program.
    pub fn new(kind: StmtKind) -> Self {
        Self {
            id: NodeId::new(0, 0),
            line: 0,
            kind,
        }
    }

    /// True for `if` and `while`, whose execution produces branch events.
    pub fn is_condition(&self) -> bool {
        matches!(self.kind, StmtKind::If(..) | StmtKind::While(..))
    }

    pub fn condition(&self) -> Option<&Expr> {
        match &self.kind {
            StmtKind::If(c, ..) | StmtKind::While(c, _) => Some(c),
            _ => None,
        }
    }

    /// Expressions owned directly by this statement (not by nested blocks).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Let(_, _, e) | StmtKind::Expr(e) => vec![e],
            StmtKind::Assign(LValue::Var(_), e) => vec![e],
            StmtKind::Assign(LValue::Index(_, i), e) => vec![i, e],
            StmtKind::If(c, ..) | StmtKind::While(c, _) => vec![c],
            StmtKind::Return(Some(e)) => vec![e],
            StmtKind::Return(None) | StmtKind::Abort(_) => vec![],
        }
    }

    pub fn own_exprs_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            StmtKind::Let(_, _, e) | StmtKind::Expr(e) => vec![e],
            StmtKind::Assign(LValue::Var(_), e) => vec![e],
            StmtKind::Assign(LValue::Index(_, i), e) => vec![i, e],
            StmtKind::If(c, ..) | StmtKind::While(c, _) => vec![c],
            StmtKind::Return(Some(e)) => vec![e],
            StmtKind::Return(None) | StmtKind::Abort(_) => vec![],
        }
    }

    /// Nested blocks in source order (then, else / loop body).
    pub fn blocks(&self) -> Vec<&Block> {
        match &self.kind {
            StmtKind::If(_, t, e) => std::iter::once(t).chain(e.as_ref()).collect(),
            StmtKind::While(_, b) => vec![b],
            _ => vec![],
        }
    }

    /// Visits this statement and every nested statement in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        for b in self.blocks() {
            for s in &b.stmts {
                s.walk(f);
            }
        }
    }

    /// Structural equality ignoring node ids and lines.
    pub fn same_shape(&self, other: &Stmt) -> bool {
        match (&self.kind, &other.kind) {
            (StmtKind::If(c1, t1, e1), StmtKind::If(c2, t2, e2)) => {
                c1 == c2
                    && t1.same_shape(t2)
                    && match (e1, e2) {
                        (None, None) => true,
                        (Some(a), Some(b)) => a.same_shape(b),
                        _ => false,
                    }
            }
            (StmtKind::While(c1, b1), StmtKind::While(c2, b2)) => c1 == c2 && b1.same_shape(b2),
            (StmtKind::If(..), _) | (StmtKind::While(..), _) => false,
            (a, b) => a == b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    /// Line of the closing brace.
    pub close_line: u32,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Self { stmts, close_line: 0 }
    }

    pub fn same_shape(&self, other: &Block) -> bool {
        self.stmts.len() == other.stmts.len() && self.stmts.iter().zip(&other.stmts).all(|(a, b)| a.same_shape(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Block,
    pub line: u32,
}

impl Function {
    pub fn same_shape(&self, other: &Function) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.ret == other.ret
            && self.body.same_shape(&other.body)
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        for s in &self.body.stmts {
            s.walk(f);
        }
    }

    /// Integer literals occurring anywhere in the function, sorted and deduplicated.
    pub fn constants(&self) -> Vec<i64> {
        let mut out = Vec::new();
        self.walk(&mut |s| {
            for e in s.own_exprs() {
                e.walk(&mut |x| {
                    if let Expr::Int(v) = x {
                        out.push(*v);
                    }
                });
            }
        });
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Position of a block inside a function: each step selects a statement in
/// the current block and one of its nested blocks (0 = then/body, 1 = else).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct BlockPath(pub Vec<(usize, u8)>);

impl BlockPath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn child(&self, stmt: usize, branch: u8) -> Self {
        let mut v = self.0.clone();
        v.push((stmt, branch));
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Program {
    pub functions: Vec<Function>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    pub fn function_name(&self, id: NodeId) -> &str {
        &self.functions[id.func as usize].name
    }

    /// Assigns canonical node ids and line numbers. Lines follow the layout
    /// produced by the pretty-printer: one statement per line, `} else {` on
    /// its own line, and a blank line between functions.
    pub fn renumber(&mut self) {
        let mut line = 1u32;
        for (fi, func) in self.functions.iter_mut().enumerate() {
            func.line = line;
            line += 1;
            let mut index = 0u32;
            number_block(&mut func.body, fi as u32, &mut index, &mut line);
            // closing brace, then a blank separator line
            line += 2;
        }
    }

    pub fn stmt(&self, id: NodeId) -> Option<&Stmt> {
        let func = self.functions.get(id.func as usize)?;
        let mut found = None;
        func.walk(&mut |s| {
            if s.id == id {
                found = Some(s);
            }
        });
        found
    }

    pub fn stmt_mut(&mut self, id: NodeId) -> Option<&mut Stmt> {
        let func = self.functions.get_mut(id.func as usize)?;
        find_in_block_mut(&mut func.body, id)
    }

    /// Statement at a canonical `(function, line)` position.
    pub fn stmt_at_line(&self, func: &str, line: u32) -> Option<&Stmt> {
        let f = self.function(func)?;
        let mut found = None;
        f.walk(&mut |s| {
            if s.line == line {
                found = Some(s);
            }
        });
        found
    }

    /// All statements in program order.
    pub fn statements(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for f in &self.functions {
            f.walk(&mut |s| out.push(s));
        }
        out
    }

    pub fn block(&self, func: usize, path: &BlockPath) -> Option<&Block> {
        let mut block = &self.functions.get(func)?.body;
        for &(i, branch) in &path.0 {
            block = *block.stmts.get(i)?.blocks().get(branch as usize)?;
        }
        Some(block)
    }

    pub fn block_mut(&mut self, func: usize, path: &BlockPath) -> Option<&mut Block> {
        let mut block = &mut self.functions.get_mut(func)?.body;
        for &(i, branch) in &path.0 {
            let stmt = block.stmts.get_mut(i)?;
            block = match (&mut stmt.kind, branch) {
                (StmtKind::If(_, t, _), 0) => t,
                (StmtKind::If(_, _, Some(e)), 1) => e,
                (StmtKind::While(_, b), 0) => b,
                _ => return None,
            };
        }
        Some(block)
    }

    /// Locates the block containing `id` and the statement's index in it.
    pub fn locate(&self, id: NodeId) -> Option<(BlockPath, usize)> {
        let func = self.functions.get(id.func as usize)?;
        locate_in(&func.body, id, &BlockPath::root())
    }

    /// Structural equality ignoring ids and lines.
    pub fn same_shape(&self, other: &Program) -> bool {
        self.functions.len() == other.functions.len()
            && self
                .functions
                .iter()
                .zip(&other.functions)
                .all(|(a, b)| a.same_shape(b))
    }
}

fn number_block(block: &mut Block, func: u32, index: &mut u32, line: &mut u32) {
    for stmt in &mut block.stmts {
        stmt.id = NodeId::new(func, *index);
        *index += 1;
        stmt.line = *line;
        *line += 1;
        match &mut stmt.kind {
            StmtKind::If(_, then, els) => {
                number_block(then, func, index, line);
                if let Some(els) = els {
                    // `} else {` occupies then's closing line
                    then.close_line = *line;
                    *line += 1;
                    number_block(els, func, index, line);
                    els.close_line = *line;
                } else {
                    then.close_line = *line;
                }
                *line += 1;
            }
            StmtKind::While(_, body) => {
                number_block(body, func, index, line);
                body.close_line = *line;
                *line += 1;
            }
            _ => {}
        }
    }
    block.close_line = *line;
}

fn find_in_block_mut(block: &mut Block, id: NodeId) -> Option<&mut Stmt> {
    for stmt in &mut block.stmts {
        if stmt.id == id {
            return Some(stmt);
        }
        let found = match &mut stmt.kind {
            StmtKind::If(_, t, e) => {
                find_in_block_mut(t, id).or_else(|| e.as_mut().and_then(|e| find_in_block_mut(e, id)))
            }
            StmtKind::While(_, b) => find_in_block_mut(b, id),
            _ => None,
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

fn locate_in(block: &Block, id: NodeId, path: &BlockPath) -> Option<(BlockPath, usize)> {
    for (i, stmt) in block.stmts.iter().enumerate() {
        if stmt.id == id {
            return Some((path.clone(), i));
        }
        for (b, inner) in stmt.blocks().into_iter().enumerate() {
            if let Some(hit) = locate_in(inner, id, &path.child(i, b as u8)) {
                return Some(hit);
            }
        }
    }
    None
}
