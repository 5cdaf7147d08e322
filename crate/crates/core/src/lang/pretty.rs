//! Canonical rendering. The layout here must agree with
//! [`Program::renumber`](super::ast::Program::renumber).

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "  ";

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for (i, f) in p.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_function(&mut out, f);
    }
    out
}

pub fn function_to_string(f: &Function) -> String {
    let mut out = String::new();
    write_function(&mut out, f);
    out
}

fn write_function(out: &mut String, f: &Function) {
    let params: Vec<String> = f.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    let _ = writeln!(out, "fn {}({}) -> {} {{", f.name, params.join(", "), f.ret);
    write_block(out, &f.body, 1);
    out.push_str("}\n");
}

fn write_block(out: &mut String, b: &Block, depth: usize) {
    for s in &b.stmts {
        write_stmt(out, s, depth);
    }
}

fn pad(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    pad(out, depth);
    match &s.kind {
        StmtKind::If(c, then, els) => {
            let _ = writeln!(out, "if ({}) {{", expr_to_string(c));
            write_block(out, then, depth + 1);
            pad(out, depth);
            if let Some(els) = els {
                out.push_str("} else {\n");
                write_block(out, els, depth + 1);
                pad(out, depth);
            }
            out.push_str("}\n");
        }
        StmtKind::While(c, body) => {
            let _ = writeln!(out, "while ({}) {{", expr_to_string(c));
            write_block(out, body, depth + 1);
            pad(out, depth);
            out.push_str("}\n");
        }
        _ => {
            out.push_str(&simple_stmt_to_string(s));
            out.push('\n');
        }
    }
}

/// One-line rendering of a statement; compound statements render as their
/// header only (`if (c) {`).
pub fn stmt_header(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::If(c, ..) => format!("if ({}) {{", expr_to_string(c)),
        StmtKind::While(c, _) => format!("while ({}) {{", expr_to_string(c)),
        _ => simple_stmt_to_string(s),
    }
}

fn simple_stmt_to_string(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Let(n, t, e) => format!("let {n}: {t} = {};", expr_to_string(e)),
        StmtKind::Assign(LValue::Var(n), e) => format!("{n} = {};", expr_to_string(e)),
        StmtKind::Assign(LValue::Index(n, i), e) => {
            format!("{n}[{}] = {};", expr_to_string(i), expr_to_string(e))
        }
        StmtKind::Return(None) => "return;".into(),
        StmtKind::Return(Some(e)) => format!("return {};", expr_to_string(e)),
        StmtKind::Abort(msg) => format!("abort({});", quote(msg)),
        StmtKind::Expr(e) => format!("{};", expr_to_string(e)),
        StmtKind::If(..) | StmtKind::While(..) => unreachable!("compound statement"),
    }
}

/// Multi-line canonical rendering of a statement sequence at indent 0.
pub fn stmts_to_string(stmts: &[Stmt]) -> String {
    let mut out = String::new();
    for s in stmts {
        write_stmt(&mut out, s, 0);
    }
    out
}

fn quote(msg: &str) -> String {
    let mut s = String::with_capacity(msg.len() + 2);
    s.push('"');
    for c in msg.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            c => s.push(c),
        }
    }
    s.push('"');
    s
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

// Unary operators bind tighter than any binary operator.
const UNARY_PREC: u8 = 7;

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Expr::Var(n) => out.push_str(n),
        Expr::Array(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        Expr::Index(n, i) => {
            out.push_str(n);
            out.push('[');
            write_expr(out, i, 0);
            out.push(']');
        }
        Expr::Len(inner) => {
            out.push_str("len(");
            write_expr(out, inner, 0);
            out.push(')');
        }
        Expr::Call(n, args) => {
            out.push_str(n);
            out.push('(');
            write_list(out, args);
            out.push(')');
        }
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            // `-7` would re-parse as a literal, so negated literals keep parens
            let needs_parens =
                matches!(**inner, Expr::Binary(..)) || (*op == UnOp::Neg && matches!(**inner, Expr::Int(_)));
            if needs_parens {
                out.push('(');
                write_expr(out, inner, 0);
                out.push(')');
            } else {
                write_expr(out, inner, UNARY_PREC);
            }
        }
        Expr::Binary(op, l, r) => {
            let prec = op.precedence();
            let parens = prec < min_prec;
            if parens {
                out.push('(');
            }
            write_expr(out, l, prec);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, r, prec + 1);
            if parens {
                out.push(')');
            }
        }
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, item, 0);
    }
}
