//! The local expression language.
//!
//! Leaves are generalized distributions (`name[D:t|A:t]`) or the constant
//! `1` over a subspace (`1[D:t]`); interior nodes are n-ary prefix operators
//! `(* ...)`, `(+ ...)` and `(- first rest...)`. The surface syntax is
//!
//! ```text
//! leaf       = IDENT '[' assignlist ( '|' assignlist )? ']'  |  '1' '[' assignlist? ']'
//! assignlist = VAR ':' VAL (',' VAL)* ( VAR ':' VAL (',' VAL)* )*
//! compound   = '(' ('+' | '-' | '*') expr expr+ ')'
//! ```
//!
//! with whitespace allowed between any two tokens.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::factor::{Factor, ScopeEntry, Variable};

/// A variable restricted to a set of its values inside a leaf.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub variable: String,
    pub values: Vec<String>,
}

impl Assignment {
    pub fn new<S: Into<String>>(variable: &str, values: impl IntoIterator<Item = S>) -> Self {
        Assignment {
            variable: variable.to_string(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    /// The assignment covering every value of `v`.
    pub fn full(v: &Variable) -> Self {
        Assignment::new(v.name(), v.domain().iter().cloned())
    }
}

/// Reference to a named (possibly partial, possibly conditional) distribution.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DistRef {
    pub name: String,
    pub conditioned: Vec<Assignment>,
    pub conditioning: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expression {
    Dist(DistRef),
    /// The constant 1.0 over a subspace; the empty subspace is the scalar 1.
    One(Vec<Assignment>),
    Product(Vec<Expression>),
    Sum(Vec<Expression>),
    /// First term minus the rest.
    Difference(Vec<Expression>),
}

impl Expression {
    pub fn dist(name: &str, conditioned: Vec<Assignment>, conditioning: Vec<Assignment>) -> Self {
        Expression::Dist(DistRef {
            name: name.to_string(),
            conditioned,
            conditioning,
        })
    }

    pub fn one(subspace: Vec<Assignment>) -> Self {
        Expression::One(subspace)
    }

    /// Product of `terms`, collapsing the one-term case.
    pub fn product(mut terms: Vec<Expression>) -> Self {
        match terms.len() {
            0 => Expression::One(Vec::new()),
            1 => terms.pop().unwrap(),
            _ => Expression::Product(terms),
        }
    }

    pub fn sum(mut terms: Vec<Expression>) -> Self {
        assert!(!terms.is_empty(), "empty sum");
        if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expression::Sum(terms)
        }
    }

    pub fn difference(first: Expression, rest: Vec<Expression>) -> Self {
        if rest.is_empty() {
            return first;
        }
        let mut terms = vec![first];
        terms.extend(rest);
        Expression::Difference(terms)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expression::Dist(_) | Expression::One(_))
    }

    pub fn children(&self) -> &[Expression] {
        match self {
            Expression::Product(t) | Expression::Sum(t) | Expression::Difference(t) => t,
            _ => &[],
        }
    }

    /// All variable names mentioned anywhere in the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit_leaves(&mut |leaf| {
            for a in leaf_assignments(leaf) {
                out.insert(a.variable.clone());
            }
        });
        out
    }

    pub fn visit_leaves<'a>(&'a self, f: &mut impl FnMut(&'a Expression)) {
        if self.is_leaf() {
            f(self)
        } else {
            for c in self.children() {
                c.visit_leaves(f);
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(Expression::size).sum::<usize>()
    }

    /// Number of structurally distinct subexpressions (the tree stored with
    /// shared subterms).
    pub fn dag_size(&self) -> usize {
        fn walk<'a>(e: &'a Expression, seen: &mut HashSet<&'a Expression>) {
            if seen.insert(e) {
                for c in e.children() {
                    walk(c, seen);
                }
            }
        }
        let mut seen = HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }

    /// Per-variable value sets outside of which the expression is zero.
    /// Variables left unconstrained by some additive branch are omitted.
    pub fn subspace(&self) -> BTreeMap<String, BTreeSet<String>> {
        match self {
            Expression::Dist(_) | Expression::One(_) => {
                let mut m: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
                for a in leaf_assignments(self) {
                    let vals: BTreeSet<String> = a.values.iter().cloned().collect();
                    m.entry(a.variable.clone())
                        .and_modify(|s| *s = s.intersection(&vals).cloned().collect())
                        .or_insert(vals);
                }
                m
            }
            Expression::Product(terms) => {
                let mut m: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
                for t in terms {
                    for (v, vals) in t.subspace() {
                        m.entry(v)
                            .and_modify(|s| *s = s.intersection(&vals).cloned().collect())
                            .or_insert(vals);
                    }
                }
                m
            }
            Expression::Sum(terms) | Expression::Difference(terms) => {
                let subs: Vec<_> = terms.iter().map(Expression::subspace).collect();
                let mut m = subs[0].clone();
                m.retain(|v, vals| {
                    subs[1..].iter().all(|s| match s.get(v) {
                        Some(other) => {
                            vals.extend(other.iter().cloned());
                            true
                        }
                        None => false,
                    })
                });
                m
            }
        }
    }

    /// True when the subspace analysis proves the expression identically zero.
    pub fn is_structurally_zero(&self) -> bool {
        self.subspace().values().any(BTreeSet::is_empty)
    }
}

fn leaf_assignments(e: &Expression) -> impl Iterator<Item = &Assignment> {
    let (a, b): (&[Assignment], &[Assignment]) = match e {
        Expression::Dist(d) => (&d.conditioned, &d.conditioning),
        Expression::One(s) => (s, &[]),
        _ => (&[], &[]),
    };
    a.iter().chain(b)
}

/// `(conditioned, conditioning)` variables, unioned over all leaves. A
/// variable may occur in both sets.
pub fn free_variables(e: &Expression) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut conditioned = BTreeSet::new();
    let mut conditioning = BTreeSet::new();
    e.visit_leaves(&mut |leaf| match leaf {
        Expression::Dist(d) => {
            conditioned.extend(d.conditioned.iter().map(|a| a.variable.clone()));
            conditioning.extend(d.conditioning.iter().map(|a| a.variable.clone()));
        }
        Expression::One(s) => conditioned.extend(s.iter().map(|a| a.variable.clone())),
        _ => {}
    });
    (conditioned, conditioning)
}

// ---------------------------------------------------------------------------
// printing

fn write_assignments(f: &mut fmt::Formatter<'_>, list: &[Assignment]) -> fmt::Result {
    for (i, a) in list.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        write!(f, "{}:{}", a.variable, a.values.join(","))?;
    }
    Ok(())
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (op, terms) = match self {
            Expression::Dist(d) => {
                write!(f, "{}[", d.name)?;
                write_assignments(f, &d.conditioned)?;
                if !d.conditioning.is_empty() {
                    write!(f, "|")?;
                    write_assignments(f, &d.conditioning)?;
                }
                return write!(f, "]");
            }
            Expression::One(s) => {
                write!(f, "1[")?;
                write_assignments(f, s)?;
                return write!(f, "]");
            }
            Expression::Product(t) => ('*', t),
            Expression::Sum(t) => ('+', t),
            Expression::Difference(t) => ('-', t),
        };
        write!(f, "({op}")?;
        for t in terms {
            write!(f, " {t}")?;
        }
        write!(f, ")")
    }
}

/// Canonical text form; `parse(&print(e))` reproduces `e`.
pub fn print(e: &Expression) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Open,
    Close,
    LBracket,
    RBracket,
    Bar,
    Colon,
    Comma,
    Op(char),
    Word(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        let tok = match c {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '(' => Tok::Open,
            ')' => Tok::Close,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '|' => Tok::Bar,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            c if c.is_ascii_punctuation() => Tok::Op(c),
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        word.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((pos, Tok::Word(word)));
                continue;
            }
            other => {
                return Err(Error::Syntax {
                    position: pos,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        chars.next();
        out.push((pos, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn word(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn expression(&mut self) -> Result<Expression> {
        match self.peek() {
            Some(Tok::Open) => self.compound(),
            Some(Tok::Word(_)) => self.leaf(),
            Some(_) => self.err("expected `(` or a distribution"),
            None => self.err("unexpected end of input"),
        }
    }

    fn compound(&mut self) -> Result<Expression> {
        self.expect(Tok::Open, "`(`")?;
        let op = match self.peek() {
            Some(Tok::Op(c)) if matches!(c, '+' | '-' | '*') => *c,
            Some(Tok::Op(c)) => return self.err(format!("unknown operator `{c}`")),
            _ => return self.err("expected an operator `+`, `-` or `*`"),
        };
        self.pos += 1;
        let mut terms = vec![self.expression()?];
        while self.peek() != Some(&Tok::Close) {
            if self.peek().is_none() {
                return self.err("unclosed `(`");
            }
            terms.push(self.expression()?);
        }
        if terms.len() < 2 {
            return self.err("term-set requires at least one term after the first");
        }
        self.pos += 1;
        Ok(match op {
            '*' => Expression::Product(terms),
            '+' => Expression::Sum(terms),
            _ => Expression::Difference(terms),
        })
    }

    fn leaf(&mut self) -> Result<Expression> {
        let name = self.word("distribution name")?;
        let is_one = name == "1";
        if !is_one && !name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_') {
            self.pos -= 1;
            return self.err(format!("invalid distribution name `{name}`"));
        }
        self.expect(Tok::LBracket, "`[`")?;
        if is_one {
            let subspace = if self.peek() == Some(&Tok::RBracket) {
                Vec::new()
            } else {
                self.assignlist()?
            };
            self.expect(Tok::RBracket, "`]`")?;
            return Ok(Expression::One(subspace));
        }
        let conditioned = self.assignlist()?;
        let conditioning = if self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            self.assignlist()?
        } else {
            Vec::new()
        };
        self.expect(Tok::RBracket, "`]`")?;
        Ok(Expression::Dist(DistRef {
            name,
            conditioned,
            conditioning,
        }))
    }

    fn assignlist(&mut self) -> Result<Vec<Assignment>> {
        let mut out = Vec::new();
        loop {
            let variable = self.word("variable name")?;
            self.expect(Tok::Colon, "`:`")?;
            let mut values = vec![self.word("value")?];
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                values.push(self.word("value")?);
            }
            out.push(Assignment { variable, values });
            if !matches!(self.peek(), Some(Tok::Word(_))) {
                return Ok(out);
            }
        }
    }
}

/// Parses one expression in the surface syntax.
pub fn parse(text: &str) -> Result<Expression> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
        end: text.len(),
    };
    let e = p.expression()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// parameter bindings

/// Numeric values for named distributions. The values of `name` fill the
/// subspace of every leaf that references `name`, row-major over the leaf's
/// conditioned then conditioning entries, so two leaves over equally sized
/// subspaces can share one binding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bindings {
    values: BTreeMap<String, Vec<f64>>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>) -> Option<Vec<f64>> {
        self.values.insert(name.to_string(), values)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.values.get(name).map(Vec::as_slice)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn extend(&mut self, other: Bindings) {
        self.values.extend(other.values);
    }
}

/// Lookup of declared variables by name.
pub trait VariableScope {
    fn variable(&self, name: &str) -> Option<&Variable>;
}

impl VariableScope for BTreeMap<String, Variable> {
    fn variable(&self, name: &str) -> Option<&Variable> {
        self.get(name)
    }
}

impl VariableScope for [Variable] {
    fn variable(&self, name: &str) -> Option<&Variable> {
        self.iter().find(|v| v.name() == name)
    }
}

fn scope_of(list: &[Assignment], vars: &(impl VariableScope + ?Sized)) -> Result<Vec<ScopeEntry>> {
    list.iter()
        .map(|a| {
            let v = vars
                .variable(&a.variable)
                .ok_or_else(|| Error::UnknownVariable(a.variable.clone()))?;
            ScopeEntry::from_values(v, &a.values)
        })
        .collect()
}

/// The numeric factor for a leaf.
pub fn leaf_factor(
    leaf: &Expression,
    vars: &(impl VariableScope + ?Sized),
    bindings: &Bindings,
) -> Result<Factor> {
    match leaf {
        Expression::One(s) => Ok(Factor::ones("1", scope_of(s, vars)?)),
        Expression::Dist(d) => {
            let mut scope = scope_of(&d.conditioned, vars)?;
            scope.extend(scope_of(&d.conditioning, vars)?);
            let values = bindings
                .get(&d.name)
                .ok_or_else(|| Error::Model(format!("missing binding `{}`", d.name)))?;
            Factor::new(&d.name, scope, values.to_vec())
        }
        _ => Err(Error::Model("not a leaf".into())),
    }
}

// ---------------------------------------------------------------------------
// noisy-or

/// Builds the noisy-or local expression for a binary `child` whose first value
/// means "present". Parents are binary too; `params[i]` is the probability
/// that `parents[i]` alone produces the child. The result is
///
/// ```text
/// (+ (- 1[D:t] (* (- 1[D:t] c_D_A[D:t|A:t]) ...))
///    (* (- 1[D:f] c_D_A[D:f|A:t]) ...))
/// ```
///
/// Both polarities of a parameter reference the same binding `c_<child>_<parent>`.
/// A leak adds `(- 1[D:t] leak_D[D:t])` and `(- 1[D:f] leak_D[D:f])` to the two
/// products; see [`noisy_or_bindings`].
pub fn build_noisy_or(
    child: &Variable,
    parents: &[Variable],
    params: &[f64],
    leak: Option<f64>,
) -> Result<Expression> {
    check_noisy_or(child, parents, params, leak)?;
    let (on, off) = (&child.domain()[0], &child.domain()[1]);
    let component = |value: &str| -> Vec<Expression> {
        let one = Expression::one(vec![Assignment::new(child.name(), [value])]);
        let mut factors: Vec<Expression> = parents
            .iter()
            .map(|p| {
                Expression::difference(
                    one.clone(),
                    vec![Expression::dist(
                        &noisy_or_param_name(child, p),
                        vec![Assignment::new(child.name(), [value])],
                        vec![Assignment::new(p.name(), [p.domain()[0].as_str()])],
                    )],
                )
            })
            .collect();
        if leak.is_some() {
            factors.push(Expression::difference(
                one.clone(),
                vec![Expression::dist(
                    &leak_name(child),
                    vec![Assignment::new(child.name(), [value])],
                    vec![],
                )],
            ));
        }
        factors
    };
    let present = Expression::difference(
        Expression::one(vec![Assignment::new(child.name(), [on.as_str()])]),
        vec![Expression::product(component(on))],
    );
    let absent = Expression::product(component(off));
    Ok(Expression::Sum(vec![present, absent]))
}

/// Bindings referenced by [`build_noisy_or`]. The leak leaf holds the leak
/// probability itself, so `(- 1[D:t] leak_D[D:t])` is the chance that the
/// background cause stays silent.
pub fn noisy_or_bindings(
    child: &Variable,
    parents: &[Variable],
    params: &[f64],
    leak: Option<f64>,
) -> Result<Bindings> {
    check_noisy_or(child, parents, params, leak)?;
    let mut b = Bindings::new();
    for (p, &c) in parents.iter().zip(params) {
        b.insert(&noisy_or_param_name(child, p), vec![c]);
    }
    if let Some(l) = leak {
        b.insert(&leak_name(child), vec![l]);
    }
    Ok(b)
}

pub fn noisy_or_param_name(child: &Variable, parent: &Variable) -> String {
    format!("c_{}_{}", child.name(), parent.name())
}

fn leak_name(child: &Variable) -> String {
    format!("leak_{}", child.name())
}

fn check_noisy_or(
    child: &Variable,
    parents: &[Variable],
    params: &[f64],
    leak: Option<f64>,
) -> Result<()> {
    if child.cardinality() != 2 {
        return Err(Error::Model(format!(
            "noisy-or child `{}` is not binary",
            child.name()
        )));
    }
    if let Some(p) = parents.iter().find(|p| p.cardinality() != 2) {
        return Err(Error::Model(format!(
            "noisy-or parent `{}` is not binary",
            p.name()
        )));
    }
    if parents.len() != params.len() {
        return Err(Error::Model("one parameter per parent is required".into()));
    }
    if parents.is_empty() && leak.is_none() {
        return Err(Error::Model(format!(
            "noisy-or `{}` has neither parents nor leak",
            child.name()
        )));
    }
    let names: BTreeSet<&str> = parents.iter().map(Variable::name).collect();
    if names.len() != parents.len() || names.contains(child.name()) {
        return Err(Error::Model(format!(
            "noisy-or `{}` has repeated parents",
            child.name()
        )));
    }
    for &c in params.iter().chain(leak.as_ref()) {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Model(format!(
                "noisy-or parameter {c} is outside [0, 1]"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// validation

/// Checks that every leaf references declared variables and values and that
/// every distribution has a binding of the right length. Returns one message
/// per problem; empty means valid.
pub fn validate(
    e: &Expression,
    vars: &(impl VariableScope + ?Sized),
    bindings: &Bindings,
) -> Vec<String> {
    let mut out = Vec::new();
    e.visit_leaves(&mut |leaf| {
        let mut seen = BTreeSet::new();
        let mut cells = 1usize;
        let mut ok = true;
        for a in leaf_assignments(leaf) {
            if !seen.insert(a.variable.as_str()) {
                out.push(format!("variable `{}` repeated in `{}`", a.variable, leaf));
            }
            match vars.variable(&a.variable) {
                None => {
                    ok = false;
                    out.push(format!("unknown variable `{}` in `{}`", a.variable, leaf));
                }
                Some(v) => {
                    let distinct: BTreeSet<&String> = a.values.iter().collect();
                    if distinct.len() != a.values.len() {
                        out.push(format!("repeated value for `{}` in `{}`", a.variable, leaf));
                    }
                    for val in &a.values {
                        if v.value_index(val).is_none() {
                            ok = false;
                            out.push(format!(
                                "unknown value `{}` for `{}` in `{}`",
                                val, a.variable, leaf
                            ));
                        }
                    }
                    cells *= distinct.len();
                }
            }
        }
        if let Expression::Dist(d) = leaf {
            if d.conditioned.is_empty() {
                out.push(format!("`{}` has no conditioned variables", leaf));
            }
            match bindings.get(&d.name) {
                None => out.push(format!("missing binding `{}`", d.name)),
                Some(vals) if ok && vals.len() != cells => out.push(format!(
                    "binding `{}` has {} values, `{}` needs {}",
                    d.name,
                    vals.len(),
                    leaf,
                    cells
                )),
                Some(vals) => {
                    if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        out.push(format!(
                            "binding `{}` has a negative or non-finite value",
                            d.name
                        ));
                    }
                }
            }
        }
    });
    out
}
