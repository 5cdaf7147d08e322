//! Lexer and recursive-descent parser for MiniLang source text.

use super::ast::*;
use super::typeck;
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    Fn,
    Let,
    If,
    Else,
    While,
    Return,
    Abort,
    True,
    False,
    Len,
    TyInt,
    TyBool,
    TyUnit,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Arrow,
    Assign,
    Bang,
    Minus,
    Plus,
    Star,
    Slash,
    Percent,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn syntax(line: u32, col: u32, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        col,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, col: &mut u32, n: usize| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(&mut i, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let tok = match word.as_str() {
                "fn" => Tok::Fn,
                "let" => Tok::Let,
                "if" => Tok::If,
                "else" => Tok::Else,
                "while" => Tok::While,
                "return" => Tok::Return,
                "abort" => Tok::Abort,
                "true" => Tok::True,
                "false" => Tok::False,
                "len" => Tok::Len,
                "int" => Tok::TyInt,
                "bool" => Tok::TyBool,
                "unit" => Tok::TyUnit,
                _ => Tok::Ident(word),
            };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let v: u64 = digits
                .parse()
                .map_err(|_| syntax(tl, tc, format!("integer literal {digits} out of range")))?;
            if v > i64::MAX as u64 + 1 {
                return Err(syntax(tl, tc, format!("integer literal {digits} out of range")));
            }
            out.push(Token {
                tok: Tok::Int(v),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(syntax(tl, tc, "unterminated string literal")),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            _ => return Err(syntax(line, col, "invalid escape in string literal")),
                        };
                        s.push(esc);
                        i += 2;
                        col += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, n) = match (c, next) {
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('=', Some('=')) => (Tok::EqEq, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('&', Some('&')) => (Tok::AndAnd, 2),
            ('|', Some('|')) => (Tok::OrOr, 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (',', _) => (Tok::Comma, 1),
            (':', _) => (Tok::Colon, 1),
            (';', _) => (Tok::Semi, 1),
            ('=', _) => (Tok::Assign, 1),
            ('!', _) => (Tok::Bang, 1),
            ('-', _) => (Tok::Minus, 1),
            ('+', _) => (Tok::Plus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('%', _) => (Tok::Percent, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            _ => return Err(syntax(tl, tc, format!("unexpected character {c:?}"))),
        };
        advance(&mut i, &mut col, n);
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        syntax(t.line, t.col, message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => Err(self.error(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut functions = Vec::new();
        while *self.peek() != Tok::Eof {
            functions.push(self.function()?);
        }
        Ok(Program { functions })
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        self.expect(Tok::Fn, "`fn`")?;
        let name = self.ident()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let pname = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                params.push(Param { name: pname, ty });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Arrow, "`->`")?;
        let ret = self.ty()?;
        let body = self.block()?;
        Ok(Function {
            name,
            params,
            ret,
            body,
            line: 0,
        })
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        match self.bump() {
            Tok::TyInt => {
                if *self.peek() == Tok::LBracket && *self.peek_at(1) == Tok::RBracket {
                    self.bump();
                    self.bump();
                    Ok(Type::IntArray)
                } else {
                    Ok(Type::Int)
                }
            }
            Tok::TyBool => Ok(Type::Bool),
            Tok::TyUnit => Ok(Type::Unit),
            other => {
                self.pos -= 1;
                Err(self.error(format!("expected type, found {}", describe(&other))))
            }
        }
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error("unexpected end of input, expected `}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(Block::new(stmts))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let kind = match self.peek().clone() {
            Tok::Let => {
                self.bump();
                let name = self.ident()?;
                self.expect(Tok::Colon, "`:`")?;
                let ty = self.ty()?;
                self.expect(Tok::Assign, "`=`")?;
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Let(name, ty, e)
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let c = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let then = self.block()?;
                let els = if *self.peek() == Tok::Else {
                    self.bump();
                    Some(self.block()?)
                } else {
                    None
                };
                StmtKind::If(c, then, els)
            }
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let c = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                StmtKind::While(c, self.block()?)
            }
            Tok::Return => {
                self.bump();
                let e = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(e)
            }
            Tok::Abort => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let msg = match self.bump() {
                    Tok::Str(s) => s,
                    other => {
                        self.pos -= 1;
                        return Err(self.error(format!("expected string literal, found {}", describe(&other))));
                    }
                };
                self.expect(Tok::RParen, "`)`")?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Abort(msg)
            }
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::Assign | Tok::LBracket) => {
                // `x = e;` or `x[i] = e;` — but `x[i];` / `x[i] + 1;` are expressions
                if *self.peek_at(1) == Tok::Assign {
                    self.bump();
                    self.bump();
                    let e = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    StmtKind::Assign(LValue::Var(name), e)
                } else {
                    let save = self.pos;
                    self.bump();
                    self.bump();
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    if *self.peek() == Tok::Assign {
                        self.bump();
                        let e = self.expr()?;
                        self.expect(Tok::Semi, "`;`")?;
                        StmtKind::Assign(LValue::Index(name, idx), e)
                    } else {
                        self.pos = save;
                        let e = self.expr()?;
                        self.expect(Tok::Semi, "`;`")?;
                        StmtKind::Expr(e)
                    }
                }
            }
            _ => {
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Expr(e)
            }
        };
        Ok(Stmt::new(kind))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            Tok::Minus => {
                self.bump();
                // `-7` is a literal; `-(7)` and `-x` are negations
                if let Tok::Int(v) = *self.peek() {
                    self.bump();
                    return Ok(Expr::Int((v as i64).wrapping_neg()));
                }
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            Tok::Int(v) => {
                if v > i64::MAX as u64 {
                    self.pos -= 1;
                    return Err(self.error("integer literal out of range"));
                }
                Ok(Expr::Int(v as i64))
            }
            Tok::True => Ok(Expr::Bool(true)),
            Tok::False => Ok(Expr::Bool(false)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBracket => {
                let items = self.list(Tok::RBracket, "`]`")?;
                Ok(Expr::Array(items))
            }
            Tok::Len => {
                self.expect(Tok::LParen, "`(`")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Len(Box::new(e)))
            }
            Tok::Ident(name) => match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let args = self.list(Tok::RParen, "`)`")?;
                    Ok(Expr::Call(name, args))
                }
                Tok::LBracket => {
                    self.bump();
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Expr::Index(name, Box::new(idx)))
                }
                _ => Ok(Expr::Var(name)),
            },
            other => {
                self.pos -= 1;
                Err(self.error(format!("expected expression, found {}", describe(&other))))
            }
        }
    }

    fn list(&mut self, close: Tok, what: &str) -> Result<Vec<Expr>, ParseError> {
        let mut items = Vec::new();
        if *self.peek() != close {
            loop {
                items.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(close, what)?;
        Ok(items)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(n) => format!("identifier `{n}`"),
        Tok::Int(v) => format!("integer {v}"),
        Tok::Str(_) => "string literal".into(),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

/// Parses and type-checks a MiniLang compilation unit. The returned program
/// carries canonical node ids and line numbers.
pub fn parse(src: &str) -> Result<Program, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut program = p.program()?;
    program.renumber();
    typeck::check(&program)?;
    Ok(program)
}
