//! Sandboxed reward-program language.
//!
//! A program is a list of weighted terms, one per line:
//!
//! ```text
//! term progress weight 1.0 = delta_s
//! term lane     weight 0.2 = exp(-abs(dy))
//! term crash    weight -10 = collision_flag
//! ```
//!
//! Expressions combine registry variables and literals with `+ - * /`,
//! comparisons (yielding 1 or 0), `if c then a else b` and the functions
//! `min max abs exp tanh clip`. Evaluation is total: division by zero yields
//! 0 and every intermediate value saturates, so finite inputs always give a
//! finite reward.

mod ast;
mod parser;

pub use ast::{BinOp, Expr, Func, RewardProgram, Term};
pub use parser::parse_program;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::vars;

pub const MAX_DEPTH: usize = 32;
pub const MAX_TERMS: usize = 32;
pub const MAX_SOURCE_BYTES: usize = 64 * 1024;
pub const BLOCK_TAG: &str = "REWARD";

/// Saturation bound for every intermediate value.
const VALUE_BOUND: f64 = 1e9;
/// Saturation bound for weighted contributions and the total.
const TOTAL_BOUND: f64 = 1e15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("missing variable `{0}` at evaluation time")]
    MissingVariable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    pub unit: String,
    pub description: String,
}

/// Observation variables reward programs may reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRegistry {
    pub entries: Vec<RegistryEntry>,
    pub version: u32,
}

impl ObservationRegistry {
    /// Expert-seeded starting registry, version 1.
    pub fn initial() -> Self {
        let entries = vars::INITIAL
            .iter()
            .map(|n| {
                let spec = &vars::CATALOG[vars::lookup(n).expect("initial variables are catalogued")];
                RegistryEntry { name: spec.name.into(), unit: spec.unit.into(), description: spec.description.into() }
            })
            .collect();
        Self { entries, version: 1 }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Exposes a catalogued simulator variable; bumps the version.
    /// Returns false when the name is not implementable or already present.
    pub fn expose(&mut self, name: &str) -> bool {
        if self.contains(name) {
            return false;
        }
        let Some(i) = vars::lookup(name) else { return false };
        let spec = &vars::CATALOG[i];
        self.entries.push(RegistryEntry { name: spec.name.into(), unit: spec.unit.into(), description: spec.description.into() });
        self.version += 1;
        true
    }

    /// Listing for prompts.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = writeln!(s, "{} [{}]: {}", e.name, e.unit, e.description);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalStatus {
    Pending,
    Approved,
    Rejected,
}

/// Request to expose a variable a generated term referenced but the registry lacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationProposal {
    pub variable: String,
    pub term: String,
    pub stage: u32,
    pub justification: String,
    pub status: ProposalStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Ok,
    OkWithProposals,
}

/// Program together with the terms it can evaluate under a given registry.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedProgram {
    pub program: RewardProgram,
    /// Per term: true when it references a variable absent from the registry.
    pub suspended: Vec<bool>,
    pub proposals: Vec<AugmentationProposal>,
    pub registry_version: u32,
}

impl CheckedProgram {
    pub fn status(&self) -> CheckStatus {
        if self.proposals.is_empty() {
            CheckStatus::Ok
        } else {
            CheckStatus::OkWithProposals
        }
    }

    pub fn evaluable_terms(&self) -> impl Iterator<Item = &Term> {
        self.program.terms.iter().zip(&self.suspended).filter(|(_, s)| !**s).map(|(t, _)| t)
    }

    pub fn suspended_terms(&self) -> impl Iterator<Item = &Term> {
        self.program.terms.iter().zip(&self.suspended).filter(|(_, s)| **s).map(|(t, _)| t)
    }

    /// Resolves variables to simulator catalog slots for fast per-step evaluation.
    pub fn bind(&self) -> BoundProgram {
        let terms = self
            .program
            .terms
            .iter()
            .zip(&self.suspended)
            .map(|(t, &s)| if s { None } else { Some((t.weight, compile(&t.expr))) })
            .collect();
        BoundProgram { terms, names: self.program.terms.iter().map(|t| t.name.clone()).collect() }
    }
}

/// Checks `p` against `reg`. Never fails: unknown variables become proposals and
/// suspend the terms that use them.
pub fn check(p: &RewardProgram, reg: &ObservationRegistry, stage: u32) -> CheckedProgram {
    let mut proposals: Vec<AugmentationProposal> = Vec::new();
    let mut suspended = Vec::with_capacity(p.terms.len());
    for t in &p.terms {
        let mut missing = false;
        t.expr.visit_vars(&mut |v| {
            if !reg.contains(v) {
                missing = true;
                if !proposals.iter().any(|q| q.variable == v) {
                    proposals.push(AugmentationProposal {
                        variable: v.to_string(),
                        term: t.name.clone(),
                        stage,
                        justification: format!(
                            "term `{}` ({}) references `{}`, which the observation registry does not expose",
                            t.name, t.expr, v
                        ),
                        status: ProposalStatus::Pending,
                    });
                }
            }
        });
        suspended.push(missing);
    }
    CheckedProgram { program: p.clone(), suspended, proposals, registry_version: reg.version }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub total: f64,
    /// Weighted contribution per term name; suspended terms contribute 0.
    pub breakdown: BTreeMap<String, f64>,
}

fn sat(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-VALUE_BOUND, VALUE_BOUND)
    }
}

fn sat_total(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-TOTAL_BOUND, TOTAL_BOUND)
    }
}

fn apply_bin(op: BinOp, a: f64, b: f64) -> f64 {
    let t = |c: bool| if c { 1.0 } else { 0.0 };
    sat(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                0.0
            } else {
                a / b
            }
        }
        BinOp::Lt => t(a < b),
        BinOp::Le => t(a <= b),
        BinOp::Gt => t(a > b),
        BinOp::Ge => t(a >= b),
        BinOp::Eq => t(a == b),
        BinOp::Ne => t(a != b),
    })
}

fn apply_func(f: Func, args: &[f64]) -> f64 {
    sat(match f {
        Func::Min => args[0].min(args[1]),
        Func::Max => args[0].max(args[1]),
        Func::Abs => libm::fabs(args[0]),
        Func::Exp => libm::exp(args[0]),
        Func::Tanh => libm::tanh(args[0]),
        Func::Clip => {
            let (lo, hi) = if args[1] <= args[2] { (args[1], args[2]) } else { (args[2], args[1]) };
            args[0].clamp(lo, hi)
        }
    })
}

fn eval_expr(e: &Expr, lookup: &impl Fn(&str) -> Option<f64>) -> Result<f64, RewardError> {
    Ok(match e {
        Expr::Num(x) => sat(*x),
        Expr::Var(v) => sat(lookup(v).ok_or_else(|| RewardError::MissingVariable(v.clone()))?),
        Expr::Neg(a) => -eval_expr(a, lookup)?,
        Expr::Bin(op, a, b) => apply_bin(*op, eval_expr(a, lookup)?, eval_expr(b, lookup)?),
        Expr::Call(f, args) => {
            let vals = args.iter().map(|a| eval_expr(a, lookup)).collect::<Result<Vec<_>, _>>()?;
            apply_func(*f, &vals)
        }
        Expr::If(c, a, b) => {
            if eval_expr(c, lookup)? != 0.0 {
                eval_expr(a, lookup)?
            } else {
                eval_expr(b, lookup)?
            }
        }
    })
}

/// Evaluates the checked program over named variables.
pub fn evaluate(p: &CheckedProgram, vars: &BTreeMap<String, f64>) -> Result<Evaluation, RewardError> {
    let lookup = |n: &str| vars.get(n).copied();
    let mut total = 0.0;
    let mut breakdown = BTreeMap::new();
    for (t, &s) in p.program.terms.iter().zip(&p.suspended) {
        let c = if s { 0.0 } else { sat_total(t.weight * eval_expr(&t.expr, &lookup)?) };
        total = sat_total(total + c);
        breakdown.insert(t.name.clone(), c);
    }
    Ok(Evaluation { total, breakdown })
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Slot(usize),
    Unknown(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    If(Box<Node>, Box<Node>, Box<Node>),
}

fn compile(e: &Expr) -> Node {
    match e {
        Expr::Num(x) => Node::Num(*x),
        Expr::Var(v) => match vars::lookup(v) {
            Some(i) => Node::Slot(i),
            None => Node::Unknown(v.clone()),
        },
        Expr::Neg(a) => Node::Neg(Box::new(compile(a))),
        Expr::Bin(op, a, b) => Node::Bin(*op, Box::new(compile(a)), Box::new(compile(b))),
        Expr::Call(f, args) => Node::Call(*f, args.iter().map(compile).collect()),
        Expr::If(c, a, b) => Node::If(Box::new(compile(c)), Box::new(compile(a)), Box::new(compile(b))),
    }
}

fn eval_node(n: &Node, slots: &[f64]) -> Result<f64, RewardError> {
    Ok(match n {
        Node::Num(x) => sat(*x),
        Node::Slot(i) => sat(slots[*i]),
        Node::Unknown(v) => return Err(RewardError::MissingVariable(v.clone())),
        Node::Neg(a) => -eval_node(a, slots)?,
        Node::Bin(op, a, b) => apply_bin(*op, eval_node(a, slots)?, eval_node(b, slots)?),
        Node::Call(f, args) => {
            let mut vals = [0.0; 3];
            for (v, a) in vals.iter_mut().zip(args) {
                *v = eval_node(a, slots)?;
            }
            apply_func(*f, &vals[..args.len()])
        }
        Node::If(c, a, b) => {
            if eval_node(c, slots)? != 0.0 {
                eval_node(a, slots)?
            } else {
                eval_node(b, slots)?
            }
        }
    })
}

/// Program bound to the simulator's variable catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundProgram {
    terms: Vec<Option<(f64, Node)>>,
    names: Vec<String>,
}

impl BoundProgram {
    pub fn term_names(&self) -> &[String] {
        &self.names
    }

    /// Total and per-term weighted contributions for one step's variables.
    pub fn evaluate(&self, slots: &[f64; vars::N_VARS], contributions: &mut Vec<f64>) -> Result<f64, RewardError> {
        contributions.clear();
        let mut total = 0.0;
        for t in &self.terms {
            let c = match t {
                Some((w, n)) => sat_total(w * eval_node(n, slots)?),
                None => 0.0,
            };
            contributions.push(c);
            total = sat_total(total + c);
        }
        Ok(total)
    }
}

/// Grammar summary embedded in generator prompts.
pub const GRAMMAR: &str = "\
program := one term per line; `#` starts a comment
term    := term NAME weight NUMBER = expr
expr    := if expr then expr else expr | sum [(< | <= | > | >= | == | !=) sum]
sum     := product ((+ | -) product)*
product := unary ((* | /) unary)*
unary   := - unary | NUMBER | VARIABLE | (expr) | FUNC(expr, ...)
FUNC    := min(a, b) | max(a, b) | abs(x) | exp(x) | tanh(x) | clip(x, lo, hi)
Comparisons yield 1 or 0; `if` takes the then-branch when its condition is nonzero.
Division by zero yields 0. At most 32 terms and nesting depth 32.
";

/// Reward used by the baseline experiments: progress, lane keeping, speed
/// and terminal bonuses and penalties over the initial registry.
pub const EXPERT_REWARD: &str = "\
term progress weight 0.1 = delta_s
term lane_keep weight 0.02 = exp(-abs(dy)) - 1
term heading weight 0.02 = -abs(dpsi)
term proximity weight 0.05 = -clip(1 - dist_nearest_sv / 10, 0, 1)
term success weight 5 = success_flag
term collision weight -5 = collision_flag
term timeout weight -2 = timeout_flag
";

pub fn expert_program() -> RewardProgram {
    parse_program(EXPERT_REWARD).expect("expert reward parses")
}
