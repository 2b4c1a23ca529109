//! Linear temporal logic over kernel states: syntax, parsing, a
//! tableau-based translation to Büchi automata and a nested-DFS checker.

mod buchi;
mod check;
mod props;

use std::fmt;

pub use buchi::{to_buchi, Buchi, BuchiState, Literal};
pub use check::{check_labeled, model_check, LabeledVerdict, Verdict};
pub use props::{eval_prop, Prop, PropError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ltl {
    True,
    False,
    Atom(Prop),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Implies(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Release(Box<Ltl>, Box<Ltl>),
    Globally(Box<Ltl>),
    Finally(Box<Ltl>),
}

impl Ltl {
    pub fn atom(p: Prop) -> Ltl {
        Ltl::Atom(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Ltl) -> Ltl {
        Ltl::Not(Box::new(a))
    }

    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        Ltl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Implies(Box::new(a), Box::new(b))
    }

    pub fn next(a: Ltl) -> Ltl {
        Ltl::Next(Box::new(a))
    }

    pub fn until(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Release(Box::new(a), Box::new(b))
    }

    pub fn globally(a: Ltl) -> Ltl {
        Ltl::Globally(Box::new(a))
    }

    pub fn finally(a: Ltl) -> Ltl {
        Ltl::Finally(Box::new(a))
    }

    /// Negation normal form over `True, False, Atom, Not(Atom), And, Or,
    /// Next, Until, Release`.
    pub fn nnf(&self) -> Ltl {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pos: bool) -> Ltl {
        use Ltl::*;
        match (self, pos) {
            (True, true) | (False, false) => True,
            (True, false) | (False, true) => False,
            (Atom(p), true) => Atom(p.clone()),
            (Atom(p), false) => Ltl::not(Atom(p.clone())),
            (Not(a), _) => a.nnf_pol(!pos),
            (And(a, b), true) | (Or(a, b), false) => Ltl::and(a.nnf_pol(pos), b.nnf_pol(pos)),
            (Or(a, b), true) | (And(a, b), false) => Ltl::or(a.nnf_pol(pos), b.nnf_pol(pos)),
            (Implies(a, b), true) => Ltl::or(a.nnf_pol(false), b.nnf_pol(true)),
            (Implies(a, b), false) => Ltl::and(a.nnf_pol(true), b.nnf_pol(false)),
            (Next(a), _) => Ltl::next(a.nnf_pol(pos)),
            (Until(a, b), true) | (Release(a, b), false) => Ltl::until(a.nnf_pol(pos), b.nnf_pol(pos)),
            (Release(a, b), true) | (Until(a, b), false) => Ltl::release(a.nnf_pol(pos), b.nnf_pol(pos)),
            (Globally(a), true) | (Finally(a), false) => Ltl::release(False, a.nnf_pol(pos)),
            (Finally(a), true) | (Globally(a), false) => Ltl::until(True, a.nnf_pol(pos)),
        }
    }

    /// Atomic propositions, in first-occurrence order.
    pub fn atoms(&self) -> Vec<Prop> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Prop>) {
        match self {
            Ltl::True | Ltl::False => {}
            Ltl::Atom(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Ltl::Not(a) | Ltl::Next(a) | Ltl::Globally(a) | Ltl::Finally(a) => a.collect_atoms(out),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Truth at position 0 of the ultimately periodic word of length `n`
    /// whose last position is followed by position `loop_start`.
    /// `holds(i, p)` gives the valuation. Computed by fixpoint iteration per
    /// subformula, independently of any automaton.
    pub fn eval_lasso(&self, n: usize, loop_start: usize, holds: &dyn Fn(usize, &Prop) -> bool) -> bool {
        assert!(n > 0 && loop_start < n, "a lasso needs at least one position and a loop inside it");
        self.eval_all(n, loop_start, holds)[0]
    }

    fn eval_all(&self, n: usize, ls: usize, holds: &dyn Fn(usize, &Prop) -> bool) -> Vec<bool> {
        let succ = |i: usize| if i + 1 < n { i + 1 } else { ls };
        let fix = |a: &[bool], b: &[bool], until: bool| {
            let mut v = vec![!until; n];
            loop {
                let mut changed = false;
                for i in (0..n).rev() {
                    let nv = if until { b[i] || (a[i] && v[succ(i)]) } else { b[i] && (a[i] || v[succ(i)]) };
                    if nv != v[i] {
                        v[i] = nv;
                        changed = true;
                    }
                }
                if !changed {
                    return v;
                }
            }
        };
        match self {
            Ltl::True => vec![true; n],
            Ltl::False => vec![false; n],
            Ltl::Atom(p) => (0..n).map(|i| holds(i, p)).collect(),
            Ltl::Not(a) => a.eval_all(n, ls, holds).into_iter().map(|x| !x).collect(),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) => {
                let (x, y) = (a.eval_all(n, ls, holds), b.eval_all(n, ls, holds));
                (0..n)
                    .map(|i| match self {
                        Ltl::And(..) => x[i] && y[i],
                        Ltl::Or(..) => x[i] || y[i],
                        _ => !x[i] || y[i],
                    })
                    .collect()
            }
            Ltl::Next(a) => {
                let x = a.eval_all(n, ls, holds);
                (0..n).map(|i| x[succ(i)]).collect()
            }
            Ltl::Until(a, b) => fix(&a.eval_all(n, ls, holds), &b.eval_all(n, ls, holds), true),
            Ltl::Release(a, b) => fix(&a.eval_all(n, ls, holds), &b.eval_all(n, ls, holds), false),
            Ltl::Globally(a) => fix(&vec![false; n], &a.eval_all(n, ls, holds), false),
            Ltl::Finally(a) => fix(&vec![true; n], &a.eval_all(n, ls, holds), true),
        }
    }
}

impl fmt::Display for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ltl::True => write!(f, "true"),
            Ltl::False => write!(f, "false"),
            Ltl::Atom(p) => write!(f, "{p}"),
            Ltl::Not(a) => write!(f, "!{}", Paren(a)),
            Ltl::And(a, b) => write!(f, "{} && {}", Paren(a), Paren(b)),
            Ltl::Or(a, b) => write!(f, "{} || {}", Paren(a), Paren(b)),
            Ltl::Implies(a, b) => write!(f, "{} -> {}", Paren(a), Paren(b)),
            Ltl::Next(a) => write!(f, "X {}", Paren(a)),
            Ltl::Until(a, b) => write!(f, "{} U {}", Paren(a), Paren(b)),
            Ltl::Release(a, b) => write!(f, "{} R {}", Paren(a), Paren(b)),
            Ltl::Globally(a) => write!(f, "[] {}", Paren(a)),
            Ltl::Finally(a) => write!(f, "<> {}", Paren(a)),
        }
    }
}

/// Prints binary subformulas in parentheses so `Display` output reparses
/// to the same tree.
struct Paren<'a>(&'a Ltl);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Ltl::And(..) | Ltl::Or(..) | Ltl::Implies(..) | Ltl::Until(..) | Ltl::Release(..) => {
                write!(f, "({})", self.0)
            }
            other => write!(f, "{other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("column {col}: {message}")]
pub struct LtlSyntaxError {
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum T {
    Ident(String),
    Int(u32),
    Sym(&'static str),
}

fn lex(src: &str) -> Result<Vec<(T, usize)>, LtlSyntaxError> {
    const SYMS: [&str; 12] = ["[]", "<>", "->", "&&", "||", "!", "(", ")", ",", "&", "|", "~"];
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((T::Ident(chars[start..i].iter().collect()), col));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let n = text.parse().map_err(|_| LtlSyntaxError { col, message: format!("number `{text}` too large") })?;
            out.push((T::Int(n), col));
            continue;
        }
        for s in SYMS {
            let len = s.chars().count();
            if chars[i..].iter().take(len).copied().eq(s.chars()) {
                let canon = match s {
                    "&" => "&&",
                    "|" => "||",
                    "~" => "!",
                    other => other,
                };
                out.push((T::Sym(canon), col));
                i += len;
                continue 'outer;
            }
        }
        return Err(LtlSyntaxError { col, message: format!("unexpected character `{c}`") });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(T, usize)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&T> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.idx).map(|(_, c)| *c).unwrap_or(self.end)
    }

    fn err<X>(&self, message: impl Into<String>) -> Result<X, LtlSyntaxError> {
        Err(LtlSyntaxError { col: self.col(), message: message.into() })
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(T::Sym(x)) if *x == s) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(T::Ident(x)) if x == s) {
            self.idx += 1;
            true
        } else {
            false
        }
    }

    fn implies(&mut self) -> Result<Ltl, LtlSyntaxError> {
        let lhs = self.or()?;
        if self.eat_sym("->") {
            Ok(Ltl::implies(lhs, self.implies()?))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Ltl, LtlSyntaxError> {
        let mut lhs = self.and()?;
        while self.eat_sym("||") {
            lhs = Ltl::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Ltl, LtlSyntaxError> {
        let mut lhs = self.until()?;
        while self.eat_sym("&&") {
            lhs = Ltl::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Ltl, LtlSyntaxError> {
        let lhs = self.unary()?;
        if self.eat_ident("U") {
            Ok(Ltl::until(lhs, self.until()?))
        } else if self.eat_ident("R") {
            Ok(Ltl::release(lhs, self.until()?))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<Ltl, LtlSyntaxError> {
        if self.eat_sym("!") {
            return Ok(Ltl::not(self.unary()?));
        }
        if self.eat_sym("[]") || self.eat_ident("G") {
            return Ok(Ltl::globally(self.unary()?));
        }
        if self.eat_sym("<>") || self.eat_ident("F") {
            return Ok(Ltl::finally(self.unary()?));
        }
        if self.eat_ident("X") {
            return Ok(Ltl::next(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Ltl, LtlSyntaxError> {
        if self.eat_sym("(") {
            let f = self.implies()?;
            if !self.eat_sym(")") {
                return self.err("expected `)`");
            }
            return Ok(f);
        }
        let col = self.col();
        let name = match self.peek() {
            Some(T::Ident(s)) if !matches!(s.as_str(), "U" | "R") => s.clone(),
            Some(_) => return self.err("expected a proposition"),
            None => return self.err("unexpected end of formula"),
        };
        self.idx += 1;
        match name.as_str() {
            "true" => return Ok(Ltl::True),
            "false" => return Ok(Ltl::False),
            _ => {}
        }
        let mut args = Vec::new();
        if self.eat_sym("(") {
            loop {
                match self.peek().cloned() {
                    Some(T::Ident(a)) => args.push(a),
                    Some(T::Int(n)) => args.push(n.to_string()),
                    _ => return self.err("expected an argument"),
                }
                self.idx += 1;
                if self.eat_sym(")") {
                    break;
                }
                if !self.eat_sym(",") {
                    return self.err("expected `,` or `)`");
                }
            }
        }
        Prop::from_parts(&name, &args).map(Ltl::Atom).map_err(|message| LtlSyntaxError { col, message })
    }
}

/// Parses `G F X U R`, `[] <>`, `! && || ->` (also `~ & |`), parentheses,
/// `true`, `false` and atomic propositions such as `running(T)` or `p`.
/// Precedence, tightest first: unary operators, `U`/`R`, `&&`, `||`, `->`.
pub fn parse_ltl(src: &str) -> Result<Ltl, LtlSyntaxError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, idx: 0, end: src.chars().count() + 1 };
    if p.peek().is_none() {
        return p.err("empty formula");
    }
    let f = p.implies()?;
    if p.peek().is_some() {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedFormula {
    pub name: String,
    pub formula: Ltl,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, {error}")]
pub struct FormulaFileError {
    pub line: usize,
    pub error: LtlSyntaxError,
}

/// One formula per line, optionally prefixed by `name:`; `#` starts a
/// comment. Unnamed formulas are called `f1`, `f2`, ... by position.
pub fn parse_formula_file(src: &str) -> Result<Vec<NamedFormula>, FormulaFileError> {
    let mut out = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, body) = match line.split_once(':') {
            Some((n, b)) if !n.trim().is_empty() && n.trim().chars().all(|c| c.is_alphanumeric() || c == '_') => {
                (n.trim().to_string(), b)
            }
            _ => (format!("f{}", out.len() + 1), line),
        };
        let formula = parse_ltl(body).map_err(|error| FormulaFileError { line: i + 1, error })?;
        out.push(NamedFormula { name, formula });
    }
    Ok(out)
}
