//! Belief networks: variables, local models, structural checks and the
//! line-oriented net file format.
//!
//! ```text
//! # comment
//! var A : t,f
//! cpt A { 0.1 0.9 }
//! cpt B | A { 0.8 0.3
//!             0.2 0.7 }          # one row per child value, parents row-major
//! noisyor D | A:0.7 B:0.5 [leak:0.01]
//! expr E : (+ ...)               # any local expression
//! bind c_E = { 0.4 }
//! partition { (root: D,E (A) (B) (C)) }
//! ```
//!
//! A statement may continue over several lines while brackets are open.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::expr::{self, Assignment, Bindings, Expression};
use crate::factor::{Factor, ScopeEntry, Variable};
use crate::partition::{self, PartitionSpec};

/// Tolerance on the column sums of a CPT.
pub const CPT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyOr {
    pub parents: Vec<String>,
    pub params: Vec<f64>,
    pub leak: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LocalModel {
    /// Full conditional table, scope `(child, parents...)` on full domains.
    Cpt(Factor),
    /// An algebraic local expression. Noisy-or nodes keep their parameters so
    /// the oracle can expand them independently.
    Expr {
        expression: Expression,
        noisy_or: Option<NoisyOr>,
    },
}

#[derive(Clone, Debug)]
pub struct BeliefNetwork {
    variables: Vec<Variable>,
    lookup: BTreeMap<String, Variable>,
    models: BTreeMap<String, LocalModel>,
    parents: BTreeMap<String, Vec<String>>,
    bindings: Bindings,
    partition: Option<PartitionSpec>,
}

impl BeliefNetwork {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_map(&self) -> &BTreeMap<String, Variable> {
        &self.lookup
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        self.lookup
            .get(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(Variable::name)
    }

    pub fn model(&self, name: &str) -> Result<&LocalModel> {
        self.models
            .get(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Parents in model order.
    pub fn parents(&self, name: &str) -> Result<&[String]> {
        self.parents
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn children(&self, name: &str) -> Vec<&str> {
        self.parents
            .iter()
            .filter(|(_, ps)| ps.iter().any(|p| p == name))
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    /// The partition tree given in the net file, if any.
    pub fn partition_spec(&self) -> Option<&PartitionSpec> {
        self.partition.as_ref()
    }

    /// The local expression of `name`; a CPT node yields its single table
    /// reference `p_<name>[name:...|parents...]`.
    pub fn local_expression(&self, name: &str) -> Result<Expression> {
        match self.model(name)? {
            LocalModel::Expr { expression, .. } => Ok(expression.clone()),
            LocalModel::Cpt(f) => {
                let mut entries = f.scope().iter().map(|e| Assignment::full(e.variable()));
                let child = entries.next().expect("cpt has a child entry");
                Ok(Expression::dist(
                    &cpt_binding_name(name),
                    vec![child],
                    entries.collect(),
                ))
            }
        }
    }

    /// Variables ordered parents-first, ties broken by name.
    pub fn topological_order(&self) -> Result<Vec<String>> {
        let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
        for v in self.names() {
            let n = self.parents[v]
                .iter()
                .filter(|p| self.lookup.contains_key(*p))
                .count();
            indegree.insert(v, n);
        }
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(v, _)| *v)
            .collect();
        let mut order = Vec::with_capacity(self.variables.len());
        while let Some(v) = ready.pop_first() {
            order.push(v.to_string());
            for c in self.children(v) {
                let d = indegree.get_mut(c).expect("declared child");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != self.variables.len() {
            let stuck = indegree
                .iter()
                .find(|(v, &d)| d > 0 && !order.iter().any(|o| o == *v))
                .map(|(v, _)| v.to_string())
                .unwrap_or_default();
            return Err(Error::Cycle(stuck));
        }
        Ok(order)
    }
}

pub fn cpt_binding_name(var: &str) -> String {
    format!("p_{var}")
}

pub fn parents_of<'a>(net: &'a BeliefNetwork, v: &str) -> Result<BTreeSet<&'a str>> {
    Ok(net.parents(v)?.iter().map(String::as_str).collect())
}

/// Structural diagnostics; empty iff the network is valid.
pub fn validate_network(net: &BeliefNetwork) -> Vec<String> {
    let mut out = Vec::new();
    for v in &net.variables {
        let name = v.name();
        let Some(model) = net.models.get(name) else {
            out.push(format!("variable `{name}` has no local model"));
            continue;
        };
        for p in &net.parents[name] {
            if !net.lookup.contains_key(p) {
                out.push(format!("`{name}` has undeclared parent `{p}`"));
            }
        }
        match model {
            LocalModel::Cpt(f) => out.extend(cpt_diagnostics(name, f)),
            LocalModel::Expr { expression, .. } => {
                out.extend(
                    expr::validate(expression, &net.lookup, &net.bindings)
                        .into_iter()
                        .map(|m| format!("`{name}`: {m}")),
                );
                let (conditioned, _) = expr::free_variables(expression);
                if conditioned.len() != 1 || !conditioned.contains(name) {
                    out.push(format!(
                        "expression for `{name}` must be conditioned on `{name}` only, found {conditioned:?}"
                    ));
                }
            }
        }
    }
    if let Err(Error::Cycle(v)) = net.topological_order() {
        out.push(format!("cycle through variable `{v}`"));
    } else if out.is_empty() {
        if let Some(spec) = &net.partition {
            match partition::PartitionTree::from_spec(net, spec) {
                Ok(tree) => out.extend(partition::validate_partition_tree(net, &tree)),
                Err(e) => out.push(e.to_string()),
            }
        }
    }
    out
}

fn cpt_diagnostics(name: &str, f: &Factor) -> Vec<String> {
    let child = f.scope()[0].len();
    let columns = f.len() / child;
    let mut out = Vec::new();
    for col in 0..columns {
        let s: f64 = (0..child).map(|r| f.table()[r * columns + col]).sum();
        if (s - 1.0).abs() > CPT_TOLERANCE {
            out.push(format!(
                "cpt for `{name}`: column {col} sums to {s}, not 1 (rows must be normalized per parent assignment)"
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// builder

enum ModelSpec {
    Cpt {
        parents: Vec<String>,
        table: Vec<f64>,
    },
    NoisyOr(NoisyOr),
    Expr(Expression),
}

/// Programmatic construction. Errors are collected and reported by `build`.
#[derive(Default)]
pub struct NetworkBuilder {
    variables: Vec<Variable>,
    models: Vec<(String, ModelSpec)>,
    bindings: Vec<(String, Vec<f64>)>,
    partition: Option<PartitionSpec>,
    errors: Vec<Error>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable<S: Into<String>>(
        &mut self,
        name: &str,
        domain: impl IntoIterator<Item = S>,
    ) -> &mut Self {
        match Variable::new(name, domain) {
            Ok(v) => self.variables.push(v),
            Err(e) => self.errors.push(e),
        }
        self
    }

    pub fn binary(&mut self, name: &str) -> &mut Self {
        self.variables.push(Variable::binary(name));
        self
    }

    /// `table` is child-major: one row per child value, each row over the
    /// parent assignments in row-major order.
    pub fn cpt(&mut self, child: &str, parents: &[&str], table: Vec<f64>) -> &mut Self {
        let parents = parents.iter().map(|p| p.to_string()).collect();
        self.models
            .push((child.to_string(), ModelSpec::Cpt { parents, table }));
        self
    }

    pub fn noisy_or(
        &mut self,
        child: &str,
        parents: &[(&str, f64)],
        leak: Option<f64>,
    ) -> &mut Self {
        let spec = NoisyOr {
            parents: parents.iter().map(|(p, _)| p.to_string()).collect(),
            params: parents.iter().map(|(_, c)| *c).collect(),
            leak,
        };
        self.models
            .push((child.to_string(), ModelSpec::NoisyOr(spec)));
        self
    }

    pub fn expression(&mut self, child: &str, e: Expression) -> &mut Self {
        self.models.push((child.to_string(), ModelSpec::Expr(e)));
        self
    }

    pub fn bind(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        self.bindings.push((name.to_string(), values));
        self
    }

    pub fn partition(&mut self, spec: PartitionSpec) -> &mut Self {
        self.partition = Some(spec);
        self
    }

    /// Builds and validates.
    pub fn build(&self) -> Result<BeliefNetwork> {
        let net = self.build_unchecked()?;
        let diags = validate_network(&net);
        if let Some(v) = diags
            .iter()
            .find_map(|d| d.strip_prefix("cycle through variable `"))
        {
            return Err(Error::Cycle(v.trim_end_matches('`').to_string()));
        }
        if !diags.is_empty() {
            return Err(Error::Model(diags.join("; ")));
        }
        Ok(net)
    }

    /// Builds without the checks of [`validate_network`]; only problems that
    /// make the network unrepresentable are errors.
    pub fn build_unchecked(&self) -> Result<BeliefNetwork> {
        if let Some(e) = self.errors.first() {
            return Err(e.clone());
        }
        let mut lookup = BTreeMap::new();
        for v in &self.variables {
            if lookup.insert(v.name().to_string(), v.clone()).is_some() {
                return Err(Error::Model(format!(
                    "variable `{}` declared twice",
                    v.name()
                )));
            }
        }
        let var = |n: &str| {
            lookup
                .get(n)
                .cloned()
                .ok_or_else(|| Error::UnknownVariable(n.to_string()))
        };
        let mut bindings = Bindings::new();
        let bind = |bindings: &mut Bindings, name: &str, values: Vec<f64>| {
            if bindings.insert(name, values).is_some() {
                Err(Error::Model(format!("binding `{name}` defined twice")))
            } else {
                Ok(())
            }
        };
        for (n, vals) in &self.bindings {
            bind(&mut bindings, n, vals.clone())?;
        }
        let mut models = BTreeMap::new();
        let mut parents = BTreeMap::new();
        for (child, spec) in &self.models {
            let child_var = var(child)?;
            let (model, ps) = match spec {
                ModelSpec::Cpt { parents: ps, table } => {
                    let mut scope = vec![ScopeEntry::full(&child_var)];
                    for p in ps {
                        scope.push(ScopeEntry::full(&var(p).map_err(|_| {
                            Error::Model(format!("`{child}` has undeclared parent `{p}`"))
                        })?));
                    }
                    let f = Factor::new(&cpt_binding_name(child), scope, table.clone())?;
                    bind(&mut bindings, &cpt_binding_name(child), table.clone())?;
                    (LocalModel::Cpt(f), ps.clone())
                }
                ModelSpec::NoisyOr(no) => {
                    let pvars = no
                        .parents
                        .iter()
                        .map(|p| {
                            var(p).map_err(|_| {
                                Error::Model(format!("`{child}` has undeclared parent `{p}`"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let e = expr::build_noisy_or(&child_var, &pvars, &no.params, no.leak)?;
                    for (n, v) in
                        expr::noisy_or_bindings(&child_var, &pvars, &no.params, no.leak)?.iter()
                    {
                        bind(&mut bindings, n, v.to_vec())?;
                    }
                    let model = LocalModel::Expr {
                        expression: e,
                        noisy_or: Some(no.clone()),
                    };
                    (model, no.parents.clone())
                }
                ModelSpec::Expr(e) => {
                    let (_, given) = expr::free_variables(e);
                    let ps: Vec<String> = given.into_iter().filter(|p| p != child).collect();
                    let model = LocalModel::Expr {
                        expression: e.clone(),
                        noisy_or: None,
                    };
                    (model, ps)
                }
            };
            if models.insert(child.clone(), model).is_some() {
                return Err(Error::Model(format!(
                    "variable `{child}` has two local models"
                )));
            }
            parents.insert(child.clone(), ps);
        }
        for v in &self.variables {
            parents.entry(v.name().to_string()).or_default();
        }
        Ok(BeliefNetwork {
            variables: self.variables.clone(),
            lookup,
            models,
            parents,
            bindings,
            partition: self.partition.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// net file

/// Parses and validates a net file.
pub fn load_network(text: &str) -> Result<BeliefNetwork> {
    parse_network(text)?.build()
}

/// Parses a net file into a builder without validating the model.
pub fn parse_network(text: &str) -> Result<NetworkBuilder> {
    let mut b = NetworkBuilder::new();
    for (line, stmt) in statements(text)? {
        let err = |message: String| Error::NetFile { line, message };
        let (keyword, rest) = stmt
            .split_once(char::is_whitespace)
            .unwrap_or((stmt.as_str(), ""));
        let rest = rest.trim();
        match keyword {
            "var" => {
                let (name, domain) = rest
                    .split_once(':')
                    .ok_or_else(|| err("expected `var NAME : v1,v2,...`".into()))?;
                let name = ident(name.trim()).map_err(err)?;
                let values: Vec<&str> = domain.split(',').map(str::trim).collect();
                for v in &values {
                    ident(v).map_err(err)?;
                }
                let v = Variable::new(name, values).map_err(|e| err(e.to_string()))?;
                b.variables.push(v);
            }
            "cpt" => {
                let (head, body) = rest
                    .split_once('{')
                    .ok_or_else(|| err("expected `cpt NAME | PARENTS { numbers }`".into()))?;
                let body = body
                    .trim_end()
                    .strip_suffix('}')
                    .ok_or_else(|| err("unterminated `{`".into()))?;
                let (name, parents) = match head.split_once('|') {
                    Some((n, ps)) => (n.trim(), ps.split_whitespace().collect::<Vec<_>>()),
                    None => (head.trim(), Vec::new()),
                };
                let name = ident(name).map_err(err)?;
                let table = numbers(body).map_err(err)?;
                b.cpt(name, &parents, table);
            }
            "noisyor" => {
                let (name, params) = rest
                    .split_once('|')
                    .ok_or_else(|| err("expected `noisyor NAME | P:c ...`".into()))?;
                let name = ident(name.trim()).map_err(err)?;
                let mut parents = Vec::new();
                let mut leak = None;
                for item in params.split_whitespace() {
                    let item = item.trim_start_matches('[').trim_end_matches(']');
                    let (p, c) = item
                        .split_once(':')
                        .ok_or_else(|| err(format!("expected `PARENT:prob`, found `{item}`")))?;
                    let c: f64 = c.parse().map_err(|_| err(format!("bad number `{c}`")))?;
                    if p == "leak" {
                        leak = Some(c);
                    } else {
                        parents.push((ident(p).map_err(err)?, c));
                    }
                }
                b.noisy_or(name, &parents, leak);
            }
            "expr" => {
                let (name, text) = rest
                    .split_once(':')
                    .ok_or_else(|| err("expected `expr NAME : expression`".into()))?;
                let name = ident(name.trim()).map_err(err)?;
                let e = expr::parse(text).map_err(|e| err(e.to_string()))?;
                b.expression(name, e);
            }
            "bind" => {
                let (name, body) = rest
                    .split_once('=')
                    .ok_or_else(|| err("expected `bind NAME = { numbers }`".into()))?;
                let name = ident(name.trim()).map_err(err)?;
                let body = body
                    .trim()
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| err("expected `{ numbers }`".into()))?;
                b.bind(name, numbers(body).map_err(err)?);
            }
            "partition" => {
                let body = rest
                    .strip_prefix('{')
                    .and_then(|s| s.strip_suffix('}'))
                    .ok_or_else(|| err("expected `partition { tree }`".into()))?;
                let spec = partition::parse_spec(body).map_err(|e| err(e.to_string()))?;
                b.partition(spec);
            }
            other => return Err(err(format!("unknown statement `{other}`"))),
        }
    }
    Ok(b)
}

fn ident(s: &str) -> std::result::Result<&str, String> {
    let ok = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(s)
    } else {
        Err(format!("invalid identifier `{s}`"))
    }
}

fn numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number `{t}`")))
        .collect()
}

/// Splits the file into `(first line number, statement)` pairs, joining lines
/// while brackets are unbalanced.
fn statements(text: &str) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut depth: i64 = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() && depth == 0 {
            continue;
        }
        if current.is_empty() {
            start = i + 1;
        } else {
            current.push(' ');
        }
        current.push_str(line.trim());
        for c in line.chars() {
            match c {
                '(' | '[' | '{' => depth += 1,
                ')' | ']' | '}' => depth -= 1,
                _ => {}
            }
        }
        if depth < 0 {
            return Err(Error::NetFile {
                line: i + 1,
                message: "unbalanced closing bracket".into(),
            });
        }
        if depth == 0 {
            out.push((start, std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        return Err(Error::NetFile {
            line: start,
            message: "unterminated statement".into(),
        });
    }
    Ok(out)
}
