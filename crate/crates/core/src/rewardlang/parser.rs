use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::{BinOp, Expr, Func, RewardProgram, Term};
use super::{RewardError, MAX_DEPTH, MAX_SOURCE_BYTES, MAX_TERMS};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Op(&'static str),
    Newline,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const KEYWORDS: [&str; 5] = ["term", "weight", "if", "then", "else"];

fn lex(src: &str) -> Result<Vec<Token>, RewardError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, m: String| RewardError::Parse { line, col, message: m };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            out.push(Token { tok: Tok::Newline, line, col });
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let v: f64 = text.parse().map_err(|_| err(l0, c0, format!("malformed number `{text}`")))?;
            if !v.is_finite() {
                return Err(err(l0, c0, format!("number `{text}` out of range")));
            }
            out.push(Token { tok: Tok::Num(v), line: l0, col: c0 });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let op = match two.as_str() {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "==" => Some("=="),
            "!=" => Some("!="),
            _ => None,
        };
        if let Some(op) = op {
            out.push(Token { tok: Tok::Op(op), line: l0, col: c0 });
            i += 2;
            col += 2;
            continue;
        }
        let op = match c {
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '/' => "/",
            '(' => "(",
            ')' => ")",
            ',' => ",",
            '=' => "=",
            '<' => "<",
            '>' => ">",
            _ => return Err(err(l0, c0, format!("unexpected character `{c}`"))),
        };
        out.push(Token { tok: Tok::Op(op), line: l0, col: c0 });
        i += 1;
        col += 1;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    nesting: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(x) => format!("number {x}"),
        Tok::Op(o) => format!("`{o}`"),
        Tok::Newline => "end of line".to_string(),
        Tok::Eof => "end of input".to_string(),
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: String) -> RewardError {
        let t = self.peek();
        RewardError::Parse { line: t.line, col: t.col, message }
    }

    fn expected(&self, what: &str) -> RewardError {
        let found = describe(&self.peek().tok);
        self.error_here(format!("expected {what}, found {found}"))
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek().tok, Tok::Op(o) if o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_op(&mut self, op: &str) -> Result<(), RewardError> {
        if self.is_op(op) {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&format!("`{op}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), RewardError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&format!("`{kw}`")))
        }
    }

    fn enter(&mut self) -> Result<(), RewardError> {
        self.nesting += 1;
        if self.nesting > 2 * MAX_DEPTH {
            return Err(RewardError::Limit(format!("expression nesting exceeds {MAX_DEPTH}")));
        }
        Ok(())
    }

    fn program(&mut self) -> Result<RewardProgram, RewardError> {
        let mut terms: Vec<Term> = Vec::new();
        loop {
            while matches!(self.peek().tok, Tok::Newline) {
                self.bump();
            }
            if matches!(self.peek().tok, Tok::Eof) {
                break;
            }
            let (line, col) = (self.peek().line, self.peek().col);
            let term = self.term()?;
            if terms.iter().any(|t| t.name == term.name) {
                return Err(RewardError::Parse { line, col, message: format!("duplicate term name `{}`", term.name) });
            }
            if terms.len() == MAX_TERMS {
                return Err(RewardError::Limit(format!("program exceeds {MAX_TERMS} terms")));
            }
            terms.push(term);
            match self.peek().tok {
                Tok::Newline | Tok::Eof => {}
                _ => return Err(self.expected("end of line")),
            }
        }
        Ok(RewardProgram { terms })
    }

    fn term(&mut self) -> Result<Term, RewardError> {
        self.expect_kw("term")?;
        let name = match &self.peek().tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => s.clone(),
            _ => return Err(self.expected("term name")),
        };
        self.bump();
        self.expect_kw("weight")?;
        let neg = if self.is_op("-") {
            self.bump();
            true
        } else {
            false
        };
        let weight = match self.peek().tok {
            Tok::Num(x) => x,
            _ => return Err(self.expected("weight")),
        };
        self.bump();
        self.expect_op("=")?;
        let expr = self.expr()?;
        let d = expr.depth();
        if d > MAX_DEPTH {
            return Err(RewardError::Limit(format!("term `{name}` has depth {d}, limit {MAX_DEPTH}")));
        }
        Ok(Term { name, weight: if neg { -weight } else { weight }, expr })
    }

    fn expr(&mut self) -> Result<Expr, RewardError> {
        self.enter()?;
        let e = if self.is_kw("if") {
            self.bump();
            let c = self.expr()?;
            self.expect_kw("then")?;
            let a = self.expr()?;
            self.expect_kw("else")?;
            let b = self.expr()?;
            Expr::If(Box::new(c), Box::new(a), Box::new(b))
        } else {
            self.comparison()?
        };
        self.nesting -= 1;
        Ok(e)
    }

    fn comparison(&mut self) -> Result<Expr, RewardError> {
        let lhs = self.additive()?;
        let op = match self.peek().tok {
            Tok::Op("<") => BinOp::Lt,
            Tok::Op("<=") => BinOp::Le,
            Tok::Op(">") => BinOp::Gt,
            Tok::Op(">=") => BinOp::Ge,
            Tok::Op("==") => BinOp::Eq,
            Tok::Op("!=") => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        if matches!(self.peek().tok, Tok::Op("<" | "<=" | ">" | ">=" | "==" | "!=")) {
            return Err(self.error_here("comparisons do not chain; add parentheses".to_string()));
        }
        Ok(Expr::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<Expr, RewardError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, RewardError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, RewardError> {
        if self.is_op("-") {
            self.bump();
            self.enter()?;
            let e = self.unary()?;
            self.nesting -= 1;
            return Ok(Expr::Neg(Box::new(e)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, RewardError> {
        match self.peek().tok.clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::Op("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_op(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    self.expect_op("(")?;
                    let mut args = Vec::new();
                    if !self.is_op(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.is_op(",") {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    if args.len() != func.arity() {
                        return Err(self.error_here(format!("`{}` takes {} argument(s), got {}", func.name(), func.arity(), args.len())));
                    }
                    self.expect_op(")")?;
                    Ok(Expr::Call(func, args))
                } else if KEYWORDS.contains(&name.as_str()) {
                    Err(self.expected("expression"))
                } else {
                    self.bump();
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.expected("expression")),
        }
    }
}

pub fn parse_program(text: &str) -> Result<RewardProgram, RewardError> {
    if text.len() > MAX_SOURCE_BYTES {
        return Err(RewardError::Limit(format!("source exceeds {MAX_SOURCE_BYTES} bytes")));
    }
    if text.trim().is_empty() {
        return Err(RewardError::Parse { line: 1, col: 1, message: "empty reward program".to_string() });
    }
    let toks = lex(text)?;
    Parser { toks, pos: 0, nesting: 0 }.program()
}
