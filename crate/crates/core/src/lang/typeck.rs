//! Static checks: scoping, typing and definite return.

use std::collections::HashMap;

use super::ast::*;
use crate::error::ParseError;

/// Called with each statement and the scopes visible before it.
type ScopeVisitor<'v> = dyn FnMut(&Stmt, &[Vec<(String, Type)>]) + 'v;

struct Sig<'a> {
    params: Vec<Type>,
    ret: Type,
    _name: &'a str,
}

struct Checker<'a> {
    sigs: HashMap<&'a str, Sig<'a>>,
    func: &'a Function,
    scopes: Vec<Vec<(String, Type)>>,
}

fn type_err(func: &str, message: impl Into<String>) -> ParseError {
    ParseError::Type {
        function: func.to_string(),
        message: message.into(),
    }
}

impl<'a> Checker<'a> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        type_err(&self.func.name, message)
    }

    fn lookup(&self, name: &str) -> Option<Type> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, t)| *t)
    }

    fn declare(&mut self, name: &str, ty: Type) -> Result<(), ParseError> {
        if self.lookup(name).is_some() {
            return Err(self.err(format!("variable {name} already declared")));
        }
        self.scopes.last_mut().unwrap().push((name.to_string(), ty));
        Ok(())
    }

    fn var(&self, name: &str) -> Result<Type, ParseError> {
        self.lookup(name)
            .ok_or_else(|| self.err(format!("undeclared variable {name}")))
    }

    fn expect(&self, want: Type, got: Type, what: &str) -> Result<(), ParseError> {
        if want == got {
            Ok(())
        } else {
            Err(self.err(format!("type mismatch in {what}: expected {want}, found {got}")))
        }
    }

    fn expr(&self, e: &Expr) -> Result<Type, ParseError> {
        Ok(match e {
            Expr::Int(_) => Type::Int,
            Expr::Bool(_) => Type::Bool,
            Expr::Array(items) => {
                for item in items {
                    let t = self.expr(item)?;
                    self.expect(Type::Int, t, "array element")?;
                }
                Type::IntArray
            }
            Expr::Var(n) => self.var(n)?,
            Expr::Index(n, idx) => {
                let t = self.var(n)?;
                self.expect(Type::IntArray, t, "indexed variable")?;
                let it = self.expr(idx)?;
                self.expect(Type::Int, it, "array index")?;
                Type::Int
            }
            Expr::Len(inner) => {
                let t = self.expr(inner)?;
                self.expect(Type::IntArray, t, "len argument")?;
                Type::Int
            }
            Expr::Call(name, args) => {
                let sig = self
                    .sigs
                    .get(name.as_str())
                    .ok_or_else(|| self.err(format!("call to undefined function {name}")))?;
                if sig.params.len() != args.len() {
                    return Err(self.err(format!(
                        "function {name} expects {} arguments, found {}",
                        sig.params.len(),
                        args.len()
                    )));
                }
                for (want, arg) in sig.params.iter().zip(args) {
                    let t = self.expr(arg)?;
                    self.expect(*want, t, &format!("argument to {name}"))?;
                }
                sig.ret
            }
            Expr::Unary(UnOp::Not, inner) => {
                let t = self.expr(inner)?;
                self.expect(Type::Bool, t, "operand of !")?;
                Type::Bool
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let t = self.expr(inner)?;
                self.expect(Type::Int, t, "operand of unary -")?;
                Type::Int
            }
            Expr::Binary(op, l, r) => {
                let lt = self.expr(l)?;
                let rt = self.expr(r)?;
                let what = format!("operand of {}", op.symbol());
                match op {
                    BinOp::And | BinOp::Or => {
                        self.expect(Type::Bool, lt, &what)?;
                        self.expect(Type::Bool, rt, &what)?;
                        Type::Bool
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if lt == Type::Unit {
                            return Err(self.err(format!("cannot compare unit values with {}", op.symbol())));
                        }
                        self.expect(lt, rt, &what)?;
                        Type::Bool
                    }
                    _ if op.is_relational() => {
                        self.expect(Type::Int, lt, &what)?;
                        self.expect(Type::Int, rt, &what)?;
                        Type::Bool
                    }
                    _ => {
                        self.expect(Type::Int, lt, &what)?;
                        self.expect(Type::Int, rt, &what)?;
                        Type::Int
                    }
                }
            }
        })
    }

    fn block(&mut self, b: &Block, visit: &mut ScopeVisitor) -> Result<(), ParseError> {
        self.scopes.push(Vec::new());
        for s in &b.stmts {
            self.stmt(s, visit)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, visit: &mut ScopeVisitor) -> Result<(), ParseError> {
        visit(s, &self.scopes);
        match &s.kind {
            StmtKind::Let(name, ty, e) => {
                if *ty == Type::Unit {
                    return Err(self.err(format!("variable {name} cannot have type unit")));
                }
                let t = self.expr(e)?;
                self.expect(*ty, t, &format!("initializer of {name}"))?;
                self.declare(name, *ty)?;
            }
            StmtKind::Assign(lv, e) => {
                let t = self.expr(e)?;
                match lv {
                    LValue::Var(n) => {
                        let vt = self.var(n)?;
                        self.expect(vt, t, &format!("assignment to {n}"))?;
                    }
                    LValue::Index(n, idx) => {
                        let vt = self.var(n)?;
                        self.expect(Type::IntArray, vt, "indexed assignment target")?;
                        let it = self.expr(idx)?;
                        self.expect(Type::Int, it, "array index")?;
                        self.expect(Type::Int, t, &format!("element assignment to {n}"))?;
                    }
                }
            }
            StmtKind::If(c, then, els) => {
                let t = self.expr(c)?;
                self.expect(Type::Bool, t, "if condition")?;
                self.block(then, visit)?;
                if let Some(els) = els {
                    self.block(els, visit)?;
                }
            }
            StmtKind::While(c, body) => {
                let t = self.expr(c)?;
                self.expect(Type::Bool, t, "while condition")?;
                self.block(body, visit)?;
            }
            StmtKind::Return(e) => {
                let t = match e {
                    Some(e) => self.expr(e)?,
                    None => Type::Unit,
                };
                self.expect(self.func.ret, t, "return value")?;
            }
            StmtKind::Abort(_) => {}
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
        }
        Ok(())
    }
}

fn definitely_returns(b: &Block) -> bool {
    b.stmts.iter().any(|s| match &s.kind {
        StmtKind::Return(_) | StmtKind::Abort(_) => true,
        StmtKind::If(_, t, Some(e)) => definitely_returns(t) && definitely_returns(e),
        _ => false,
    })
}

fn check_impl(program: &Program, visit: &mut ScopeVisitor) -> Result<(), ParseError> {
    let mut sigs = HashMap::new();
    for f in &program.functions {
        let sig = Sig {
            params: f.params.iter().map(|p| p.ty).collect(),
            ret: f.ret,
            _name: &f.name,
        };
        if sigs.insert(f.name.as_str(), sig).is_some() {
            return Err(type_err(&f.name, format!("function {} defined twice", f.name)));
        }
    }
    for func in &program.functions {
        let mut ck = Checker {
            sigs: std::mem::take(&mut sigs),
            func,
            scopes: vec![Vec::new()],
        };
        for p in &func.params {
            if p.ty == Type::Unit {
                return Err(ck.err(format!("parameter {} cannot have type unit", p.name)));
            }
            ck.declare(&p.name, p.ty)?;
        }
        ck.block(&func.body, visit)?;
        if func.ret != Type::Unit && !definitely_returns(&func.body) {
            return Err(ck.err(format!("missing return in function {}", func.name)));
        }
        sigs = ck.sigs;
    }
    Ok(())
}

/// Type-checks a whole program.
pub fn check(program: &Program) -> Result<(), ParseError> {
    check_impl(program, &mut |_, _| {})
}

/// Variables in scope immediately before `id` executes, in declaration
/// order (parameters first). Returns `None` if the statement does not exist
/// or the program does not type-check.
pub fn scope_at(program: &Program, id: NodeId) -> Option<Vec<(String, Type)>> {
    let mut found = None;
    check_impl(program, &mut |s, scopes| {
        if s.id == id {
            found = Some(scopes.iter().flatten().cloned().collect());
        }
    })
    .ok()?;
    found
}

/// Scopes for every statement at once.
pub fn scopes(program: &Program) -> Option<HashMap<NodeId, Vec<(String, Type)>>> {
    let mut out = HashMap::new();
    check_impl(program, &mut |s, scopes| {
        out.insert(s.id, scopes.iter().flatten().cloned().collect());
    })
    .ok()?;
    Some(out)
}
