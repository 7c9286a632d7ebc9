use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
            _ => PREC_CMP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Min,
    Max,
    Abs,
    Exp,
    Tanh,
    Clip,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Min, Func::Max, Func::Abs, Func::Exp, Func::Tanh, Func::Clip];

    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Clip => "clip",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            Func::Abs | Func::Exp | Func::Tanh => 1,
            Func::Clip => 3,
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

pub(crate) const PREC_IF: u8 = 0;
pub(crate) const PREC_CMP: u8 = 1;
pub(crate) const PREC_ADD: u8 = 2;
pub(crate) const PREC_MUL: u8 = 3;
pub(crate) const PREC_UNARY: u8 = 4;

impl Expr {
    /// Tree height; a leaf has height 1.
    pub fn depth(&self) -> usize {
        1 + match self {
            Expr::Num(_) | Expr::Var(_) => 0,
            Expr::Neg(e) => e.depth(),
            Expr::Bin(_, a, b) => a.depth().max(b.depth()),
            Expr::Call(_, args) => args.iter().map(Expr::depth).max().unwrap_or(0),
            Expr::If(c, a, b) => c.depth().max(a.depth()).max(b.depth()),
        }
    }

    /// Calls `f` on every variable name, left to right.
    pub fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => f(v),
            Expr::Neg(e) => e.visit_vars(f),
            Expr::Bin(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.visit_vars(f)),
            Expr::If(c, a, b) => {
                c.visit_vars(f);
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::If(..) => PREC_IF,
            Expr::Bin(op, ..) => op.precedence(),
            Expr::Neg(_) => PREC_UNARY,
            _ => PREC_UNARY + 1,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.prec() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(x) => write!(f, "{x:?}")?,
            Expr::Var(v) => f.write_str(v)?,
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write(f, PREC_UNARY)?;
            }
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                // comparisons do not chain; arithmetic is left-associative
                let (lp, rp) = if p == PREC_CMP { (p + 1, p + 1) } else { (p, p + 1) };
                a.write(f, lp)?;
                write!(f, " {} ", op.symbol())?;
                b.write(f, rp)?;
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.write(f, PREC_IF)?;
                }
                f.write_str(")")?;
            }
            Expr::If(c, a, b) => {
                f.write_str("if ")?;
                c.write(f, PREC_IF)?;
                f.write_str(" then ")?;
                a.write(f, PREC_IF)?;
                f.write_str(" else ")?;
                b.write(f, PREC_IF)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, PREC_IF)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub weight: f64,
    pub expr: Expr,
}

/// Ordered, uniquely named weighted terms. `Display` is the canonical form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardProgram {
    pub terms: Vec<Term>,
}

impl RewardProgram {
    /// Canonical text, one term per line.
    pub fn print(&self) -> String {
        alloc::format!("{self}")
    }

    /// Names referenced by any term, first occurrence order, deduplicated.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.terms {
            t.expr.visit_vars(&mut |v| {
                if !out.contains(&v) {
                    out.push(v)
                }
            });
        }
        out
    }

    /// Same program with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        RewardProgram { terms: self.terms.iter().map(|t| Term { weight: t.weight * c, ..t.clone() }).collect() }
    }
}

impl fmt::Display for RewardProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "term {} weight {:?} = {}", t.name, t.weight, t.expr)?;
        }
        Ok(())
    }
}
