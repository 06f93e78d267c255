//! Generalized distributions.
//!
//! A [`Factor`] is a dense, nonnegative table defined over a *subspace* of
//! one or more variables: each scope entry names a variable together with the
//! subset of its values the table covers. Outside that subspace the factor is
//! implicitly zero, so `1[D:t]` over a binary `D` behaves like `{1.0, 0.0}`.
//!
//! All operations are pure and return new factors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Negative entries in `[-NEGATIVE_TOLERANCE, 0)` are rounding noise and are
/// clamped to zero after a subtraction.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// A discrete random variable with a fixed, ordered domain of value labels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Variable {
    name: Arc<str>,
    domain: Arc<[String]>,
}

impl Variable {
    pub fn new<I, S>(name: &str, domain: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let domain: Vec<String> = domain.into_iter().map(Into::into).collect();
        if domain.len() < 2 {
            return Err(Error::InvalidVariable {
                name: name.to_string(),
                reason: "domain needs at least two values".into(),
            });
        }
        let distinct: BTreeSet<&String> = domain.iter().collect();
        if distinct.len() != domain.len() {
            return Err(Error::InvalidVariable {
                name: name.to_string(),
                reason: "duplicate value label".into(),
            });
        }
        Ok(Variable {
            name: name.into(),
            domain: domain.into(),
        })
    }

    /// A two-valued variable with domain `t, f`.
    pub fn binary(name: &str) -> Self {
        Variable::new(name, ["t", "f"]).expect("binary domain is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }

    pub fn cardinality(&self) -> usize {
        self.domain.len()
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.domain.iter().position(|v| v == value)
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{{}}}", self.name, self.domain.join(","))
    }
}

/// A variable restricted to a nonempty, order-preserving subset of its domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScopeEntry {
    variable: Variable,
    /// Strictly increasing indices into `variable.domain()`.
    subdomain: Vec<usize>,
}

impl ScopeEntry {
    pub fn full(variable: &Variable) -> Self {
        ScopeEntry {
            subdomain: (0..variable.cardinality()).collect(),
            variable: variable.clone(),
        }
    }

    pub fn new(variable: &Variable, mut subdomain: Vec<usize>) -> Result<Self> {
        subdomain.sort_unstable();
        subdomain.dedup();
        if subdomain.is_empty() || subdomain.iter().any(|&i| i >= variable.cardinality()) {
            return Err(Error::InvalidVariable {
                name: variable.name().to_string(),
                reason: "subdomain must be a nonempty subset of the domain".into(),
            });
        }
        Ok(ScopeEntry {
            variable: variable.clone(),
            subdomain,
        })
    }

    pub fn from_values<S: AsRef<str>>(variable: &Variable, values: &[S]) -> Result<Self> {
        let indices = values
            .iter()
            .map(|v| {
                variable
                    .value_index(v.as_ref())
                    .ok_or_else(|| Error::UnknownValue {
                        variable: variable.name().to_string(),
                        value: v.as_ref().to_string(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        ScopeEntry::new(variable, indices)
    }

    pub fn variable(&self) -> &Variable {
        &self.variable
    }

    pub fn name(&self) -> &str {
        self.variable.name()
    }

    pub fn subdomain(&self) -> &[usize] {
        &self.subdomain
    }

    pub fn len(&self) -> usize {
        self.subdomain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomain.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.subdomain.len() == self.variable.cardinality()
    }

    /// Position of domain index `value` within this subdomain.
    fn position(&self, value: usize) -> Option<usize> {
        self.subdomain.binary_search(&value).ok()
    }

    pub fn values(&self) -> impl Iterator<Item = &str> + '_ {
        self.subdomain
            .iter()
            .map(move |&i| self.variable.domain()[i].as_str())
    }
}

/// A named, dense nonnegative table over a scope of subdomains, row-major in
/// scope order (the last scope entry varies fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    name: String,
    scope: Vec<ScopeEntry>,
    table: Vec<f64>,
}

impl Factor {
    pub fn new(name: &str, scope: Vec<ScopeEntry>, table: Vec<f64>) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidFactor {
            name: name.to_string(),
            reason,
        };
        let names: BTreeSet<&str> = scope.iter().map(ScopeEntry::name).collect();
        if names.len() != scope.len() {
            return Err(invalid("repeated variable in scope".into()));
        }
        let expected: usize = scope.iter().map(ScopeEntry::len).product();
        if table.len() != expected {
            return Err(invalid(format!(
                "table has {} entries, scope needs {}",
                table.len(),
                expected
            )));
        }
        if let Some(bad) = table.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!(
                "entry {bad} is not a finite nonnegative real"
            )));
        }
        Ok(Factor {
            name: name.to_string(),
            scope,
            table,
        })
    }

    pub(crate) fn from_parts(name: &str, scope: Vec<ScopeEntry>, table: Vec<f64>) -> Self {
        debug_assert_eq!(
            table.len(),
            scope.iter().map(ScopeEntry::len).product::<usize>()
        );
        Factor {
            name: name.to_string(),
            scope,
            table,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Factor::from_parts("scalar", Vec::new(), vec![value])
    }

    /// The constant `1` over a subspace.
    pub fn ones(name: &str, scope: Vec<ScopeEntry>) -> Self {
        let n = scope.iter().map(ScopeEntry::len).product();
        Factor::from_parts(name, scope, vec![1.0; n])
    }

    /// A full-domain table that is zero everywhere.
    pub fn zeros(name: &str, variables: &[Variable]) -> Self {
        let scope: Vec<ScopeEntry> = variables.iter().map(ScopeEntry::full).collect();
        let n = scope.iter().map(ScopeEntry::len).product();
        Factor::from_parts(name, scope, vec![0.0; n])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn scope(&self) -> &[ScopeEntry] {
        &self.scope
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.scope.iter().map(ScopeEntry::name)
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.scope.iter().any(|e| e.name() == name)
    }

    fn entry(&self, name: &str) -> Option<&ScopeEntry> {
        self.scope.iter().find(|e| e.name() == name)
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }

    /// Value at a full assignment given as `(variable, value)` pairs. Cells
    /// outside the subspace read as zero.
    pub fn value(&self, assignment: &[(&str, &str)]) -> Result<f64> {
        let mut flat = 0;
        for entry in &self.scope {
            let (_, label) = assignment
                .iter()
                .find(|(n, _)| *n == entry.name())
                .ok_or_else(|| Error::UnknownVariable(entry.name().to_string()))?;
            let idx = entry
                .variable()
                .value_index(label)
                .ok_or_else(|| Error::UnknownValue {
                    variable: entry.name().to_string(),
                    value: label.to_string(),
                })?;
            match entry.position(idx) {
                Some(p) => flat = flat * entry.len() + p,
                None => return Ok(0.0),
            }
        }
        Ok(self.table[flat])
    }

    /// Iterates `(assignment as domain indices in scope order, value)`.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let dims: Vec<usize> = self.scope.iter().map(ScopeEntry::len).collect();
        let mut odo = Odometer::new(dims);
        self.table.iter().map(move |&v| {
            let digits = odo.current().to_vec();
            odo.advance();
            let labels = digits
                .iter()
                .zip(&self.scope)
                .map(|(&d, e)| e.subdomain()[d])
                .collect();
            (labels, v)
        })
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.name)?;
        for (i, (assignment, v)) in self.cells().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            let parts: Vec<String> = assignment
                .iter()
                .zip(&self.scope)
                .map(|(&d, e)| format!("{}={}", e.name(), e.variable().domain()[d]))
                .collect();
            write!(f, " ({}):{}", parts.join(","), v)?;
        }
        write!(f, " }}")
    }
}

/// Row-major multi-index counter.
struct Odometer {
    dims: Vec<usize>,
    digits: Vec<usize>,
}

impl Odometer {
    fn new(dims: Vec<usize>) -> Self {
        let digits = vec![0; dims.len()];
        Odometer { dims, digits }
    }

    fn current(&self) -> &[usize] {
        &self.digits
    }

    fn advance(&mut self) {
        for i in (0..self.dims.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.dims[i] {
                return;
            }
            self.digits[i] = 0;
        }
    }
}

/// For every result-scope position, maps the result subdomain position to the
/// operand's subdomain position (or `None` when the value lies outside it).
/// Result variables missing from the operand map to a constant stride of 0.
struct Alignment {
    /// Per result variable: `None` if the operand lacks it, else per-position
    /// offset contributions.
    maps: Vec<Option<Vec<Option<usize>>>>,
}

impl Alignment {
    fn new(result: &[ScopeEntry], operand: &Factor) -> Self {
        let mut strides = vec![0usize; operand.scope.len()];
        let mut acc = 1;
        for (i, e) in operand.scope.iter().enumerate().rev() {
            strides[i] = acc;
            acc *= e.len();
        }
        let maps = result
            .iter()
            .map(|r| {
                operand
                    .scope
                    .iter()
                    .position(|e| e.name() == r.name())
                    .map(|oi| {
                        let oe = &operand.scope[oi];
                        r.subdomain()
                            .iter()
                            .map(|&v| oe.position(v).map(|p| p * strides[oi]))
                            .collect()
                    })
            })
            .collect();
        Alignment { maps }
    }

    fn offset(&self, digits: &[usize]) -> Option<usize> {
        let mut off = 0;
        for (map, &d) in self.maps.iter().zip(digits) {
            if let Some(m) = map {
                off += m[d]?;
            }
        }
        Some(off)
    }
}

fn check_same_variable(a: &Variable, b: &Variable) -> Result<()> {
    if a.domain() != b.domain() {
        return Err(Error::InvalidVariable {
            name: a.name().to_string(),
            reason: "two different domains for one variable".into(),
        });
    }
    Ok(())
}

/// Re-lays `f` onto `scope`, which must cover the same variables with
/// subdomains that contain f's. Cells outside f's subspace become 0.
fn relayout(f: &Factor, scope: Vec<ScopeEntry>, name: &str) -> Factor {
    let align = Alignment::new(&scope, f);
    let dims: Vec<usize> = scope.iter().map(ScopeEntry::len).collect();
    let n = dims.iter().product();
    let mut odo = Odometer::new(dims);
    let mut table = Vec::with_capacity(n);
    for _ in 0..n {
        table.push(align.offset(odo.current()).map_or(0.0, |o| f.table[o]));
        odo.advance();
    }
    Factor::from_parts(name, scope, table)
}

/// Extends `f` to the full domain of each of its variables, as given by
/// `targets`. Values outside f's subspace are 0.0.
pub fn zero_extend(f: &Factor, targets: &[Variable]) -> Result<Factor> {
    let mut scope = Vec::with_capacity(f.scope.len());
    for entry in &f.scope {
        let target = targets
            .iter()
            .find(|t| t.name() == entry.name())
            .ok_or_else(|| Error::UnknownVariable(entry.name().to_string()))?;
        // Map by label so a target with a differently ordered domain is handled.
        for label in entry.values() {
            if target.value_index(label).is_none() {
                return Err(Error::SubdomainMismatch(entry.name().to_string()));
            }
        }
        if target.domain() != entry.variable().domain() {
            return Err(Error::SubdomainMismatch(entry.name().to_string()));
        }
        scope.push(ScopeEntry::full(target));
    }
    Ok(relayout(f, scope, &f.name))
}

/// `f` on full domains with its variables in the order `names`, which must
/// list exactly f's variables.
pub fn arrange<S: AsRef<str>>(f: &Factor, names: &[S]) -> Result<Factor> {
    if names.len() != f.scope.len() {
        return Err(Error::Query(format!(
            "cannot arrange `{}` over {} variables",
            f.name,
            names.len()
        )));
    }
    let mut scope = Vec::with_capacity(names.len());
    for n in names {
        let e = f
            .entry(n.as_ref())
            .ok_or_else(|| Error::UnknownVariable(n.as_ref().to_string()))?;
        scope.push(ScopeEntry::full(e.variable()));
    }
    Ok(relayout(f, scope, &f.name))
}

/// Pointwise product over the union of both scopes. Shared variables whose
/// subdomains differ are widened to their full domain; the operands are
/// zero-extended first, so only values where both are defined can be nonzero.
///
/// Result scope order: shared variables in `a`'s order, then `a`-only, then
/// `b`-only.
pub fn conformal_product(a: &Factor, b: &Factor) -> Factor {
    let mut shared = Vec::new();
    let mut a_only = Vec::new();
    for ea in &a.scope {
        match b.entry(ea.name()) {
            Some(eb) => {
                debug_assert!(check_same_variable(ea.variable(), eb.variable()).is_ok());
                if ea.subdomain == eb.subdomain {
                    shared.push(ea.clone());
                } else {
                    shared.push(ScopeEntry::full(ea.variable()));
                }
            }
            None => a_only.push(ea.clone()),
        }
    }
    let b_only = b
        .scope
        .iter()
        .filter(|e| !a.has_variable(e.name()))
        .cloned();
    let scope: Vec<ScopeEntry> = shared.into_iter().chain(a_only).chain(b_only).collect();

    let align_a = Alignment::new(&scope, a);
    let align_b = Alignment::new(&scope, b);
    let dims: Vec<usize> = scope.iter().map(ScopeEntry::len).collect();
    let n = dims.iter().product();
    let mut odo = Odometer::new(dims);
    let mut table = Vec::with_capacity(n);
    for _ in 0..n {
        let d = odo.current();
        let v = match (align_a.offset(d), align_b.offset(d)) {
            (Some(i), Some(j)) => a.table[i] * b.table[j],
            _ => 0.0,
        };
        table.push(v);
        odo.advance();
    }
    let name = format!("{}*{}", a.name, b.name);
    Factor::from_parts(&name, scope, table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AdditiveOp {
    Plus,
    Minus,
}

/// What to do with negative entries produced by a subtraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NegativePolicy {
    /// Clamp entries down to `-NEGATIVE_TOLERANCE`, fail below that.
    Reject,
    /// Clamp every negative entry to zero and count the ones below tolerance.
    Clamp,
}

/// Sum or difference of two generalized distributions.
///
/// Operands over different variable sets are first brought to a common set:
/// for every variable in `marginals` that occurs in either operand, *both*
/// operands are multiplied by its marginal. Every variable present in only one
/// operand must have a marginal. Both operands are then zero-extended to full
/// domains and combined pointwise. The result is a joint over the union scope;
/// callers sum out what they do not need.
pub fn additive_combine(
    op: AdditiveOp,
    a: &Factor,
    b: &Factor,
    marginals: &BTreeMap<String, Factor>,
) -> Result<Factor> {
    additive_combine_with(op, a, b, marginals, NegativePolicy::Reject).map(|(f, _)| f)
}

/// [`additive_combine`] with an explicit policy; also returns how many
/// entries fell below `-NEGATIVE_TOLERANCE`.
pub fn additive_combine_with(
    op: AdditiveOp,
    a: &Factor,
    b: &Factor,
    marginals: &BTreeMap<String, Factor>,
    policy: NegativePolicy,
) -> Result<(Factor, usize)> {
    for e in a.scope.iter().chain(&b.scope) {
        let in_both = a.has_variable(e.name()) && b.has_variable(e.name());
        if !in_both && !marginals.contains_key(e.name()) {
            return Err(Error::MissingMarginal(e.name().to_string()));
        }
    }
    let mut a2 = a.clone();
    let mut b2 = b.clone();
    for (var, marginal) in marginals {
        if a.has_variable(var) || b.has_variable(var) {
            a2 = conformal_product(&a2, marginal);
            b2 = conformal_product(&b2, marginal);
        }
    }
    let mut scope: Vec<ScopeEntry> = a2
        .scope
        .iter()
        .map(|e| ScopeEntry::full(e.variable()))
        .collect();
    for e in &b2.scope {
        if !a2.has_variable(e.name()) {
            scope.push(ScopeEntry::full(e.variable()));
        }
    }
    let ea = relayout(&a2, scope.clone(), "");
    let eb = relayout(&b2, scope.clone(), "");
    let mut negatives = 0;
    let mut table = Vec::with_capacity(ea.table.len());
    for (x, y) in ea.table.iter().zip(&eb.table) {
        let mut v = match op {
            AdditiveOp::Plus => x + y,
            AdditiveOp::Minus => x - y,
        };
        if v < 0.0 {
            if v < -NEGATIVE_TOLERANCE {
                if policy == NegativePolicy::Reject {
                    return Err(Error::NegativeEntry { value: v });
                }
                negatives += 1;
            }
            v = 0.0;
        }
        table.push(v);
    }
    let sym = match op {
        AdditiveOp::Plus => "+",
        AdditiveOp::Minus => "-",
    };
    let name = format!("({}{}{})", a.name, sym, b.name);
    Ok((Factor::from_parts(&name, scope, table), negatives))
}

/// Sums `vars` out of `f`.
pub fn sum_out<S: AsRef<str>>(f: &Factor, vars: &[S]) -> Result<Factor> {
    for v in vars {
        if !f.has_variable(v.as_ref()) {
            return Err(Error::UnknownVariable(v.as_ref().to_string()));
        }
    }
    let drop: BTreeSet<&str> = vars.iter().map(AsRef::as_ref).collect();
    if drop.is_empty() {
        return Ok(f.clone());
    }
    let keep: Vec<ScopeEntry> = f
        .scope
        .iter()
        .filter(|e| !drop.contains(e.name()))
        .cloned()
        .collect();
    let keep_pos: Vec<usize> = f
        .scope
        .iter()
        .enumerate()
        .filter(|(_, e)| !drop.contains(e.name()))
        .map(|(i, _)| i)
        .collect();
    let n: usize = keep.iter().map(ScopeEntry::len).product();
    let mut table = vec![0.0; n];
    let mut odo = Odometer::new(f.scope.iter().map(ScopeEntry::len).collect());
    for &v in &f.table {
        let d = odo.current();
        let mut flat = 0;
        for (&p, e) in keep_pos.iter().zip(&keep) {
            flat = flat * e.len() + d[p];
        }
        table[flat] += v;
        odo.advance();
    }
    Ok(Factor::from_parts(&f.name, keep, table))
}

/// Scales `f` to total mass 1.
pub fn normalize(f: &Factor) -> Result<Factor> {
    let total = f.total();
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    let table = f.table.iter().map(|v| v / total).collect();
    Ok(Factor::from_parts(&f.name, f.scope.clone(), table))
}

/// True iff both factors range over the same variables and, once both are
/// zero-extended to full domains, no entry differs by more than `tol`.
pub fn approx_equal(a: &Factor, b: &Factor, tol: f64) -> bool {
    if a.scope.len() != b.scope.len() {
        return false;
    }
    let mut scope = Vec::with_capacity(a.scope.len());
    for e in &a.scope {
        match b.entry(e.name()) {
            Some(other) if other.variable().domain() == e.variable().domain() => {
                scope.push(ScopeEntry::full(e.variable()))
            }
            _ => return false,
        }
    }
    let ea = relayout(a, scope.clone(), "");
    let eb = relayout(b, scope, "");
    ea.table
        .iter()
        .zip(&eb.table)
        .all(|(x, y)| (x - y).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d() -> Variable {
        Variable::binary("D")
    }
    fn a() -> Variable {
        Variable::binary("A")
    }
    fn b() -> Variable {
        Variable::binary("B")
    }

    fn one_dt() -> Factor {
        Factor::ones("1", vec![ScopeEntry::from_values(&d(), &["t"]).unwrap()])
    }

    fn c_dt_at(c: f64) -> Factor {
        Factor::new(
            "c",
            vec![
                ScopeEntry::from_values(&d(), &["t"]).unwrap(),
                ScopeEntry::from_values(&a(), &["t"]).unwrap(),
            ],
            vec![c],
        )
        .unwrap()
    }

    fn p_a() -> Factor {
        Factor::new("pA", vec![ScopeEntry::full(&a())], vec![0.1, 0.9]).unwrap()
    }

    fn get(f: &Factor, asg: &[(&str, &str)]) -> f64 {
        f.value(asg).unwrap()
    }

    #[test]
    fn variable_rejects_bad_domains() {
        assert!(Variable::new("X", ["t"]).is_err());
        assert!(Variable::new("X", ["t", "t"]).is_err());
        assert!(Variable::new("X", ["lo", "mid", "hi"]).is_ok());
    }

    #[test]
    fn factor_rejects_bad_tables() {
        let s = vec![ScopeEntry::full(&a())];
        assert!(Factor::new("x", s.clone(), vec![0.5]).is_err());
        assert!(Factor::new("x", s.clone(), vec![0.5, -0.1]).is_err());
        assert!(Factor::new("x", s, vec![0.5, f64::NAN]).is_err());
    }

    #[test]
    fn zero_extend_constant_one() {
        let f = zero_extend(&one_dt(), &[d()]).unwrap();
        assert_eq!(f.table(), &[1.0, 0.0]);
    }

    #[test]
    fn zero_extend_full_is_identity() {
        let f = zero_extend(&p_a(), &[a()]).unwrap();
        assert_eq!(f.table(), p_a().table());
    }

    #[test]
    fn zero_extend_two_variables() {
        let f = zero_extend(&c_dt_at(0.7), &[d(), a()]).unwrap();
        // (D,A) row-major: tt, tf, ft, ff
        assert_eq!(f.table(), &[0.7, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_extend_errors() {
        assert!(matches!(
            zero_extend(&c_dt_at(0.7), &[d()]),
            Err(Error::UnknownVariable(_))
        ));
        let other_d = Variable::new("D", ["yes", "no"]).unwrap();
        assert!(matches!(
            zero_extend(&one_dt(), &[other_d]),
            Err(Error::SubdomainMismatch(_))
        ));
    }

    #[test]
    fn product_of_partial_conditional_and_prior() {
        let f = conformal_product(&c_dt_at(0.7), &p_a());
        assert!((get(&f, &[("D", "t"), ("A", "t")]) - 0.07).abs() < 1e-15);
        assert_eq!(get(&f, &[("D", "t"), ("A", "f")]), 0.0);
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn product_with_unit_scalar_is_identity() {
        let f = conformal_product(&p_a(), &Factor::scalar(1.0));
        assert!(approx_equal(&f, &p_a(), 0.0));
    }

    #[test]
    fn product_builds_joint() {
        // p(B|A) with scope (B, A): rows B=t: .8 .3, B=f: .2 .7
        let pba = Factor::new(
            "pBA",
            vec![ScopeEntry::full(&b()), ScopeEntry::full(&a())],
            vec![0.8, 0.3, 0.2, 0.7],
        )
        .unwrap();
        let pa = Factor::new("pA", vec![ScopeEntry::full(&a())], vec![0.5, 0.5]).unwrap();
        let j = conformal_product(&pba, &pa);
        assert_eq!(get(&j, &[("B", "t"), ("A", "t")]), 0.4);
        assert_eq!(get(&j, &[("B", "f"), ("A", "t")]), 0.1);
        assert_eq!(get(&j, &[("B", "t"), ("A", "f")]), 0.15);
        assert_eq!(get(&j, &[("B", "f"), ("A", "f")]), 0.35);
        let pb = sum_out(&j, &["A"]).unwrap();
        assert!((get(&pb, &[("B", "t")]) - 0.55).abs() < 1e-15);
        assert!((get(&pb, &[("B", "f")]) - 0.45).abs() < 1e-15);
    }

    #[test]
    fn subtraction_with_domain_normalization() {
        let mut m = BTreeMap::new();
        m.insert("A".to_string(), p_a());
        let r = additive_combine(AdditiveOp::Minus, &one_dt(), &c_dt_at(0.7), &m).unwrap();
        assert!((get(&r, &[("D", "t"), ("A", "t")]) - 0.03).abs() <= 1e-15);
        assert!((get(&r, &[("D", "t"), ("A", "f")]) - 0.9).abs() <= 1e-15);
        assert_eq!(get(&r, &[("D", "f"), ("A", "t")]), 0.0);
    }

    #[test]
    fn addition_identity_and_disjoint_subspaces() {
        let zero = Factor::zeros("0", &[a()]);
        let r = additive_combine(AdditiveOp::Plus, &p_a(), &zero, &BTreeMap::new()).unwrap();
        assert!(approx_equal(&r, &p_a(), 0.0));

        let t = Factor::new(
            "x",
            vec![ScopeEntry::from_values(&d(), &["t"]).unwrap()],
            vec![0.85],
        )
        .unwrap();
        let f = Factor::new(
            "y",
            vec![ScopeEntry::from_values(&d(), &["f"]).unwrap()],
            vec![0.15],
        )
        .unwrap();
        let r = additive_combine(AdditiveOp::Plus, &t, &f, &BTreeMap::new()).unwrap();
        assert_eq!(r.table(), &[0.85, 0.15]);
    }

    #[test]
    fn additive_errors() {
        assert!(matches!(
            additive_combine(AdditiveOp::Minus, &one_dt(), &c_dt_at(0.7), &BTreeMap::new()),
            Err(Error::MissingMarginal(v)) if v == "A"
        ));
        let big = Factor::new("x", vec![ScopeEntry::full(&a())], vec![0.1, 0.1]).unwrap();
        assert!(matches!(
            additive_combine(AdditiveOp::Minus, &big, &p_a(), &BTreeMap::new()),
            Err(Error::NegativeEntry { .. })
        ));
        let (r, n) = additive_combine_with(
            AdditiveOp::Minus,
            &big,
            &p_a(),
            &BTreeMap::new(),
            NegativePolicy::Clamp,
        )
        .unwrap();
        assert_eq!(n, 1);
        assert_eq!(r.table()[1], 0.0);
    }

    #[test]
    fn sum_out_cases() {
        let f = conformal_product(&c_dt_at(0.7), &p_a());
        let r = sum_out(&f, &["A"]).unwrap();
        assert!((get(&r, &[("D", "t")]) - 0.07).abs() < 1e-15);
        let same = sum_out::<&str>(&f, &[]).unwrap();
        assert_eq!(same, f);
        assert!(sum_out(&f, &["Z"]).is_err());
    }

    #[test]
    fn normalize_cases() {
        let f = Factor::new("x", vec![ScopeEntry::full(&a())], vec![0.2, 0.6]).unwrap();
        let n = normalize(&f).unwrap();
        assert!((n.table()[0] - 0.25).abs() < 1e-15 && (n.table()[1] - 0.75).abs() < 1e-15);
        assert!(approx_equal(&normalize(&n).unwrap(), &n, 1e-15));
        assert_eq!(normalize(&Factor::zeros("z", &[a()])), Err(Error::ZeroMass));
    }

    #[test]
    fn approx_equal_cases() {
        assert!(approx_equal(&p_a(), &p_a(), 0.0));
        let full = Factor::new("x", vec![ScopeEntry::full(&d())], vec![1.0, 0.0]).unwrap();
        assert!(approx_equal(&one_dt(), &full, 0.0));
        let x = Factor::new("x", vec![ScopeEntry::full(&a())], vec![0.03, 0.9]).unwrap();
        let y = Factor::new("y", vec![ScopeEntry::full(&a())], vec![0.03, 0.91]).unwrap();
        assert!(!approx_equal(&x, &y, 1e-9));
    }
}
