//! Contraction of an expression against child-partition results.
//!
//! [`Contractor::contract`] computes the sum over every variable not in
//! `keep` of `expression x product(weights)`. Weights (joints returned by
//! child subqueries) are pushed into both operands of `+` and `-`, which is
//! the "bring both operands to a common scope, then sum out early" path, and
//! conformal products are split into components that share no summed
//! variable. Inside a component, variables are eliminated greedily, always
//! picking the one whose elimination yields the smallest intermediate.
//!
//! The same walk runs over real factors ([`FactorBackend`]) and over
//! variable sets alone ([`ScopeBackend`]), so a plan can predict the cost of
//! evaluation exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::Result;
use crate::expr::{leaf_factor, Bindings, Expression};
use crate::factor::{self, AdditiveOp, Factor, ScopeEntry, Variable};

/// Operation counters of one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Table cells produced by conformal products.
    pub multiplications: u64,
    /// Cells combined by `+`/`-` plus cells folded by summing out.
    pub additions: u64,
    /// Largest number of variables in any table touched.
    pub largest_scope: usize,
    /// Largest number of cells in any table touched.
    pub peak_cells: u64,
    pub subqueries: u64,
    /// Distinct subexpressions of the evaluated (rewritten) expressions.
    pub ast_size: u64,
}

impl EvalStats {
    pub fn absorb(&mut self, other: &EvalStats) {
        self.multiplications += other.multiplications;
        self.additions += other.additions;
        self.largest_scope = self.largest_scope.max(other.largest_scope);
        self.peak_cells = self.peak_cells.max(other.peak_cells);
        self.subqueries += other.subqueries;
        self.ast_size += other.ast_size;
    }

    fn touch(&mut self, vars: usize, cells: u64) {
        self.largest_scope = self.largest_scope.max(vars);
        self.peak_cells = self.peak_cells.max(cells);
    }

    /// `key value` pairs in a fixed order.
    pub fn entries(&self) -> [(&'static str, u64); 6] {
        [
            ("multiplications", self.multiplications),
            ("additions", self.additions),
            ("largest_intermediate_scope", self.largest_scope as u64),
            ("peak_cells", self.peak_cells),
            ("subqueries", self.subqueries),
            ("ast_size", self.ast_size),
        ]
    }
}

/// Table operations the contraction is written against.
pub trait Backend {
    type Table: Clone;
    fn leaf(&mut self, e: &Expression) -> Result<Self::Table>;
    fn scalar(&mut self, value: f64) -> Self::Table;
    fn vars(&self, t: &Self::Table) -> BTreeSet<String>;
    fn multiply(&mut self, a: &Self::Table, b: &Self::Table) -> Self::Table;
    fn sum_out(&mut self, t: &Self::Table, vars: &[String]) -> Result<Self::Table>;
    fn combine(&mut self, op: AdditiveOp, a: &Self::Table, b: &Self::Table) -> Result<Self::Table>;
    fn stats(&self) -> &EvalStats;
}

/// Numeric evaluation over [`Factor`]s.
pub struct FactorBackend<'a> {
    variables: &'a BTreeMap<String, Variable>,
    bindings: &'a Bindings,
    leaves: HashMap<Expression, Factor>,
    pub stats: EvalStats,
}

impl<'a> FactorBackend<'a> {
    pub fn new(variables: &'a BTreeMap<String, Variable>, bindings: &'a Bindings) -> Self {
        FactorBackend {
            variables,
            bindings,
            leaves: HashMap::new(),
            stats: EvalStats::default(),
        }
    }

    fn touch(&mut self, f: &Factor) {
        self.stats.touch(f.scope().len(), f.len() as u64);
    }
}

impl Backend for FactorBackend<'_> {
    type Table = Factor;

    fn leaf(&mut self, e: &Expression) -> Result<Factor> {
        if let Some(f) = self.leaves.get(e) {
            return Ok(f.clone());
        }
        let f = leaf_factor(e, self.variables, self.bindings)?;
        self.touch(&f);
        self.leaves.insert(e.clone(), f.clone());
        Ok(f)
    }

    fn scalar(&mut self, value: f64) -> Factor {
        Factor::scalar(value)
    }

    fn vars(&self, t: &Factor) -> BTreeSet<String> {
        t.variable_names().map(str::to_string).collect()
    }

    fn multiply(&mut self, a: &Factor, b: &Factor) -> Factor {
        let f = factor::conformal_product(a, b);
        self.stats.multiplications += f.len() as u64;
        self.touch(&f);
        f
    }

    fn sum_out(&mut self, t: &Factor, vars: &[String]) -> Result<Factor> {
        if vars.is_empty() {
            return Ok(t.clone());
        }
        self.stats.additions += t.len() as u64;
        factor::sum_out(t, vars)
    }

    fn combine(&mut self, op: AdditiveOp, a: &Factor, b: &Factor) -> Result<Factor> {
        // A variable missing from one operand means that operand is constant
        // in it: broadcast with an all-ones marginal.
        let mut ones = BTreeMap::new();
        for e in a.scope().iter().chain(b.scope()) {
            if !(a.has_variable(e.name()) && b.has_variable(e.name())) {
                let full = ScopeEntry::full(e.variable());
                ones.insert(e.name().to_string(), Factor::ones("1", vec![full]));
            }
        }
        let f = factor::additive_combine(op, a, b, &ones)?;
        self.stats.additions += f.len() as u64;
        self.touch(&f);
        Ok(f)
    }

    fn stats(&self) -> &EvalStats {
        &self.stats
    }
}

/// Symbolic evaluation over variable sets; counts what the numeric backend
/// would do, assuming full domains.
pub struct ScopeBackend<'a> {
    cardinality: &'a BTreeMap<String, Variable>,
    pub stats: EvalStats,
}

impl<'a> ScopeBackend<'a> {
    pub fn new(variables: &'a BTreeMap<String, Variable>) -> Self {
        ScopeBackend {
            cardinality: variables,
            stats: EvalStats::default(),
        }
    }

    fn cells(&self, vars: &BTreeSet<String>) -> u64 {
        vars.iter()
            .map(|v| {
                self.cardinality
                    .get(v)
                    .map_or(1, |x| x.cardinality() as u64)
            })
            .product()
    }

    fn touch(&mut self, vars: &BTreeSet<String>) {
        let cells = self.cells(vars);
        self.stats.touch(vars.len(), cells);
    }
}

impl Backend for ScopeBackend<'_> {
    type Table = BTreeSet<String>;

    fn leaf(&mut self, e: &Expression) -> Result<Self::Table> {
        let vars = e.variables();
        self.touch(&vars);
        Ok(vars)
    }

    fn scalar(&mut self, _: f64) -> Self::Table {
        BTreeSet::new()
    }

    fn vars(&self, t: &Self::Table) -> BTreeSet<String> {
        t.clone()
    }

    fn multiply(&mut self, a: &Self::Table, b: &Self::Table) -> Self::Table {
        let u: BTreeSet<String> = a.union(b).cloned().collect();
        self.stats.multiplications += self.cells(&u);
        self.touch(&u);
        u
    }

    fn sum_out(&mut self, t: &Self::Table, vars: &[String]) -> Result<Self::Table> {
        if !vars.is_empty() {
            self.stats.additions += self.cells(t);
        }
        Ok(t.iter().filter(|v| !vars.contains(v)).cloned().collect())
    }

    fn combine(&mut self, _: AdditiveOp, a: &Self::Table, b: &Self::Table) -> Result<Self::Table> {
        let u: BTreeSet<String> = a.union(b).cloned().collect();
        self.stats.additions += self.cells(&u);
        self.touch(&u);
        Ok(u)
    }

    fn stats(&self) -> &EvalStats {
        &self.stats
    }
}

/// A table together with its variable set.
#[derive(Clone, Debug)]
pub struct Item<T> {
    pub table: T,
    pub vars: BTreeSet<String>,
}

/// Runs contractions on a backend and records the order in which variables
/// were summed out.
pub struct Contractor<B: Backend> {
    pub backend: B,
    pub eliminated: Vec<String>,
}

impl<B: Backend> Contractor<B> {
    pub fn new(backend: B) -> Self {
        Contractor {
            backend,
            eliminated: Vec::new(),
        }
    }

    pub fn item(&self, table: B::Table) -> Item<B::Table> {
        let vars = self.backend.vars(&table);
        Item { table, vars }
    }

    /// Sum over every variable outside `keep` of `e x product(weights)`.
    pub fn contract(
        &mut self,
        e: &Expression,
        weights: &[Item<B::Table>],
        keep: &BTreeSet<String>,
    ) -> Result<Item<B::Table>> {
        match e {
            Expression::Dist(_) | Expression::One(_) => {
                let leaf = self.backend.leaf(e)?;
                let mut items = vec![self.item(leaf)];
                items.extend(weights.iter().cloned());
                self.eliminate(items, keep)
            }
            Expression::Sum(terms) | Expression::Difference(terms) => {
                let op = match e {
                    Expression::Sum(_) => AdditiveOp::Plus,
                    _ => AdditiveOp::Minus,
                };
                let mut acc = self.contract(&terms[0], weights, keep)?;
                for t in &terms[1..] {
                    let r = self.contract(t, weights, keep)?;
                    let table = self.backend.combine(op, &acc.table, &r.table)?;
                    acc = self.item(table);
                }
                Ok(acc)
            }
            Expression::Product(terms) => self.contract_product(terms, weights, keep),
        }
    }

    fn contract_product(
        &mut self,
        terms: &[Expression],
        weights: &[Item<B::Table>],
        keep: &BTreeSet<String>,
    ) -> Result<Item<B::Table>> {
        let term_vars: Vec<BTreeSet<String>> = terms.iter().map(Expression::variables).collect();
        let all_vars: Vec<&BTreeSet<String>> = term_vars
            .iter()
            .chain(weights.iter().map(|w| &w.vars))
            .collect();
        let mut results = Vec::new();
        for component in components(&all_vars, keep) {
            let (ts, ws): (Vec<usize>, Vec<usize>) =
                component.iter().partition(|&&i| i < terms.len());
            let ws: Vec<usize> = ws.into_iter().map(|i| i - terms.len()).collect();
            if ts.len() == 1 {
                let w: Vec<_> = ws.iter().map(|&i| weights[i].clone()).collect();
                results.push(self.contract(&terms[ts[0]], &w, keep)?);
                continue;
            }
            // A weight whose summed variables all sit in one term goes inside
            // that term; the rest stay at this level.
            let mut owned: Vec<Vec<usize>> = vec![Vec::new(); ts.len()];
            let mut shared = Vec::new();
            for &w in &ws {
                let free: Vec<&String> = weights[w].vars.difference(keep).collect();
                let hits: Vec<usize> = (0..ts.len())
                    .filter(|&k| free.iter().any(|v| term_vars[ts[k]].contains(*v)))
                    .collect();
                match hits.as_slice() {
                    [k] if free.iter().all(|v| term_vars[ts[*k]].contains(*v)) => owned[*k].push(w),
                    _ => shared.push(w),
                }
            }
            let mut items: Vec<Item<B::Table>> =
                shared.iter().map(|&w| weights[w].clone()).collect();
            for (k, &t) in ts.iter().enumerate() {
                let term = &terms[t];
                if term.is_leaf() {
                    let leaf = self.backend.leaf(term)?;
                    items.push(self.item(leaf));
                    items.extend(owned[k].iter().map(|&w| weights[w].clone()));
                    continue;
                }
                let mut interface = keep.clone();
                for (j, &u) in ts.iter().enumerate() {
                    if j != k {
                        interface.extend(term_vars[t].intersection(&term_vars[u]).cloned());
                    }
                }
                for &w in &shared {
                    interface.extend(term_vars[t].intersection(&weights[w].vars).cloned());
                }
                let w: Vec<_> = owned[k].iter().map(|&i| weights[i].clone()).collect();
                items.push(self.contract(term, &w, &interface)?);
            }
            results.push(self.eliminate(items, keep)?);
        }
        self.multiply_all(results)
    }

    /// Variable elimination over `items`, keeping `keep`.
    pub fn eliminate(
        &mut self,
        mut items: Vec<Item<B::Table>>,
        keep: &BTreeSet<String>,
    ) -> Result<Item<B::Table>> {
        loop {
            let candidates: BTreeSet<&String> =
                items.iter().flat_map(|i| i.vars.difference(keep)).collect();
            let best = candidates
                .into_iter()
                .map(|v| {
                    let scope: BTreeSet<&String> = items
                        .iter()
                        .filter(|i| i.vars.contains(v))
                        .flat_map(|i| &i.vars)
                        .collect();
                    (scope.len(), v.clone())
                })
                .min();
            let Some((_, var)) = best else { break };
            let (with, without): (Vec<_>, Vec<_>) =
                items.into_iter().partition(|i| i.vars.contains(&var));
            let joined = self.multiply_all(with)?;
            let others: BTreeSet<&String> = without.iter().flat_map(|i| &i.vars).collect();
            let drop: Vec<String> = joined
                .vars
                .iter()
                .filter(|v| !keep.contains(*v) && !others.contains(v))
                .cloned()
                .collect();
            let table = self.backend.sum_out(&joined.table, &drop)?;
            self.eliminated.extend(drop);
            items = without;
            items.push(self.item(table));
        }
        self.multiply_all(items)
    }

    /// Multiplies everything, always joining the pair with the smallest union.
    fn multiply_all(&mut self, mut items: Vec<Item<B::Table>>) -> Result<Item<B::Table>> {
        if items.is_empty() {
            let one = self.backend.scalar(1.0);
            return Ok(self.item(one));
        }
        while items.len() > 1 {
            let mut best = (usize::MAX, 0, 1);
            for i in 0..items.len() {
                for j in i + 1..items.len() {
                    let n = items[i].vars.union(&items[j].vars).count();
                    if n < best.0 {
                        best = (n, i, j);
                    }
                }
            }
            let (_, i, j) = best;
            let b = items.remove(j);
            let a = items.remove(i);
            let table = self.backend.multiply(&a.table, &b.table);
            items.insert(i, self.item(table));
        }
        Ok(items.pop().expect("one item left"))
    }
}

/// Connected components of `sets` linked by shared variables outside `keep`.
fn components(sets: &[&BTreeSet<String>], keep: &BTreeSet<String>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..sets.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut owner: BTreeMap<&String, usize> = BTreeMap::new();
    for (i, s) in sets.iter().enumerate() {
        for v in s.difference(keep) {
            match owner.get(v) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
                None => {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..sets.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Evaluates `e` on its own: every variable kept, leaves materialized and
/// combined in tree order with no early summing. Used as the reference for
/// value preservation of rewrites.
pub fn evaluate_direct(
    e: &Expression,
    variables: &BTreeMap<String, Variable>,
    bindings: &Bindings,
) -> Result<Factor> {
    let mut b = FactorBackend::new(variables, bindings);
    direct(e, &mut b)
}

fn direct(e: &Expression, b: &mut FactorBackend<'_>) -> Result<Factor> {
    match e {
        Expression::Dist(_) | Expression::One(_) => b.leaf(e),
        Expression::Product(ts) => {
            let mut acc = direct(&ts[0], b)?;
            for t in &ts[1..] {
                let r = direct(t, b)?;
                acc = b.multiply(&acc, &r);
            }
            Ok(acc)
        }
        Expression::Sum(ts) | Expression::Difference(ts) => {
            let op = if matches!(e, Expression::Sum(_)) {
                AdditiveOp::Plus
            } else {
                AdditiveOp::Minus
            };
            let mut acc = direct(&ts[0], b)?;
            for t in &ts[1..] {
                let r = direct(t, b)?;
                acc = b.combine(op, &acc, &r)?;
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn vars(names: &[&str]) -> BTreeMap<String, Variable> {
        names
            .iter()
            .map(|n| (n.to_string(), Variable::binary(n)))
            .collect()
    }

    fn keep(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn marginal(name: &str, p: f64) -> Factor {
        Factor::new(
            &format!("p_{name}"),
            vec![ScopeEntry::full(&Variable::binary(name))],
            vec![p, 1.0 - p],
        )
        .unwrap()
    }

    #[test]
    fn subtraction_with_and_without_the_marginal_variable() {
        let v = vars(&["D", "A"]);
        let mut b = Bindings::new();
        b.insert("c", vec![0.7]);
        let e = parse("(- 1[D:t] c[D:t|A:t])").unwrap();
        let mut k = Contractor::new(FactorBackend::new(&v, &b));
        let w = k.item(marginal("A", 0.1));

        let both = k
            .contract(&e, std::slice::from_ref(&w), &keep(&["D", "A"]))
            .unwrap()
            .table;
        assert!((both.value(&[("D", "t"), ("A", "t")]).unwrap() - 0.03).abs() < 1e-15);
        assert!((both.value(&[("D", "t"), ("A", "f")]).unwrap() - 0.9).abs() < 1e-15);

        let d = k.contract(&e, &[w], &keep(&["D"])).unwrap().table;
        assert!((d.value(&[("D", "t")]).unwrap() - 0.93).abs() < 1e-15);
        assert_eq!(d.value(&[("D", "f")]).unwrap(), 0.0);
    }

    #[test]
    fn broadcast_sum_of_disjoint_subspaces() {
        let v = vars(&["D"]);
        let e = parse("(+ 1[D:t] 1[D:f])").unwrap();
        let f = evaluate_direct(&e, &v, &Bindings::new()).unwrap();
        assert_eq!(f.table(), &[1.0, 1.0]);
    }

    #[test]
    fn product_splits_into_independent_components() {
        let v = vars(&["D", "A", "B"]);
        let mut b = Bindings::new();
        b.insert("a", vec![0.5]);
        b.insert("b", vec![0.25]);
        let e = parse("(* (- 1[D:f] a[D:f|A:t]) (- 1[D:f] b[D:f|B:t]))").unwrap();
        let mut k = Contractor::new(FactorBackend::new(&v, &b));
        let w = vec![k.item(marginal("A", 0.5)), k.item(marginal("B", 0.5))];
        let r = k.contract(&e, &w, &keep(&["D"])).unwrap().table;
        // (1 - .5 * .5) * (1 - .25 * .5)
        assert!((r.value(&[("D", "f")]).unwrap() - 0.75 * 0.875).abs() < 1e-15);
        assert!(k.backend.stats.largest_scope <= 2);
    }

    #[test]
    fn shared_summed_variable_stays_until_both_terms_are_in() {
        let v = vars(&["D", "E", "B"]);
        let mut b = Bindings::new();
        for (n, vals) in [
            ("x", [0.9, 0.2]),
            ("y", [0.1, 0.8]),
            ("u", [0.6, 0.3]),
            ("w", [0.4, 0.7]),
        ] {
            b.insert(n, vals.to_vec());
        }
        let e = parse("(* (+ x[D:t|B:t,f] y[D:f|B:t,f]) (+ u[E:t|B:t,f] w[E:f|B:t,f]))").unwrap();
        let mut k = Contractor::new(FactorBackend::new(&v, &b));
        let w = vec![k.item(marginal("B", 0.3))];
        let r = k.contract(&e, &w, &keep(&["D", "E"])).unwrap().table;
        let want = 0.3 * 0.9 * 0.6 + 0.7 * 0.2 * 0.3;
        assert!((r.value(&[("D", "t"), ("E", "t")]).unwrap() - want).abs() < 1e-15);
        assert!(k.eliminated.contains(&"B".to_string()));
    }

    #[test]
    fn scope_backend_mirrors_factor_backend() {
        let v = vars(&["A", "B", "C", "D"]);
        let mut b = Bindings::new();
        b.insert("x", vec![0.5; 8]);
        b.insert("y", vec![0.5; 8]);
        let e = parse("(* x[D:t,f|A:t,f B:t,f] y[C:t,f|B:t,f D:t,f])").unwrap();
        let mut num = Contractor::new(FactorBackend::new(&v, &b));
        num.contract(&e, &[], &keep(&["D"])).unwrap();
        let mut sym = Contractor::new(ScopeBackend::new(&v));
        sym.contract(&e, &[], &keep(&["D"])).unwrap();
        assert_eq!(num.backend.stats, sym.backend.stats);
        assert_eq!(num.eliminated, sym.eliminated);
    }

    #[test]
    fn empty_product_is_one() {
        let v = vars(&[]);
        let b = Bindings::new();
        let mut k = Contractor::new(FactorBackend::new(&v, &b));
        let r = k.eliminate(Vec::new(), &BTreeSet::new()).unwrap();
        assert_eq!(r.table.table(), &[1.0]);
    }
}
