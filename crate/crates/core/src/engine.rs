//! Recursive query evaluation over a partition tree.
//!
//! Each partition composes the local expressions the query needs, folds in
//! its observations, distributes, asks each child partition for one joint
//! over the variables it supplies, and contracts everything down to the
//! variables its caller asked for. The root result is normalized when there
//! is evidence.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::eval::{Contractor, EvalStats, FactorBackend};
use crate::expr::Bindings;
use crate::factor::{self, Factor, Variable};
use crate::network::BeliefNetwork;
use crate::partition::{
    build_default_partition_tree, validate_partition_tree, PartitionId, PartitionTree,
};
use crate::rewrite::{plan_partition, QueryPlan};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Query {
    pub targets: Vec<String>,
    pub evidence: BTreeMap<String, String>,
}

impl Query {
    pub fn new<S: AsRef<str>>(targets: &[S]) -> Self {
        Query {
            targets: targets.iter().map(|s| s.as_ref().to_string()).collect(),
            evidence: BTreeMap::new(),
        }
    }

    pub fn given(mut self, var: &str, value: &str) -> Self {
        self.evidence.insert(var.to_string(), value.to_string());
        self
    }

    pub fn check(&self, net: &BeliefNetwork) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Query("no target variables".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &self.targets {
            net.variable(t)?;
            if !seen.insert(t) {
                return Err(Error::Query(format!("target `{t}` repeated")));
            }
            if self.evidence.contains_key(t) {
                return Err(Error::Query(format!("`{t}` is both a target and observed")));
            }
        }
        apply_evidence(net, &self.evidence).map(|_| ())
    }
}

/// Validated observations, as the variable and the index of its value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Evidence {
    pub values: BTreeMap<String, String>,
    pub indices: BTreeMap<String, usize>,
}

/// Checks every observation against the network. Each partition conjoins
/// the indicators of its own observed nodes while it plans (see
/// [`crate::rewrite::condition`]).
pub fn apply_evidence(
    net: &BeliefNetwork,
    evidence: &BTreeMap<String, String>,
) -> Result<Evidence> {
    let mut out = Evidence::default();
    for (v, x) in evidence {
        let var = net.variable(v)?;
        let idx = var.value_index(x).ok_or_else(|| Error::UnknownValue {
            variable: v.clone(),
            value: x.clone(),
        })?;
        out.values.insert(v.clone(), x.clone());
        out.indices.insert(v.clone(), idx);
    }
    Ok(out)
}

/// Numeric evaluation of a plan given the joints returned by its subqueries.
pub fn evaluate(
    plan: &QueryPlan,
    child_results: &BTreeMap<PartitionId, Factor>,
    variables: &BTreeMap<String, Variable>,
    bindings: &Bindings,
) -> Result<(Factor, EvalStats)> {
    let mut k = Contractor::new(FactorBackend::new(variables, bindings));
    let mut weights = Vec::with_capacity(plan.subqueries.len());
    for (c, _) in &plan.subqueries {
        let f = child_results.get(c).ok_or(Error::MissingChildResult(*c))?;
        weights.push(k.item(f.clone()));
    }
    let keep: BTreeSet<String> = plan.targets.iter().cloned().collect();
    let r = k.contract(&plan.rewritten, &weights, &keep)?;
    let f = factor::arrange(&r.table, &plan.targets)?;
    let mut stats = k.backend.stats;
    stats.ast_size = plan.rewritten.dag_size() as u64;
    Ok((f, stats))
}

/// Answers queries against one network and partition tree.
pub struct Engine<'a> {
    net: &'a BeliefNetwork,
    tree: PartitionTree,
    stats: EvalStats,
    plans: Vec<QueryPlan>,
}

impl<'a> Engine<'a> {
    /// Uses the network's own partition tree if it has one, else the
    /// default construction.
    pub fn new(net: &'a BeliefNetwork) -> Result<Self> {
        let tree = match net.partition_spec() {
            Some(spec) => PartitionTree::from_spec(net, spec)?,
            None => build_default_partition_tree(net),
        };
        Self::with_tree(net, tree)
    }

    pub fn with_tree(net: &'a BeliefNetwork, tree: PartitionTree) -> Result<Self> {
        let diags = validate_partition_tree(net, &tree);
        if !diags.is_empty() {
            return Err(Error::Partition(diags.join("; ")));
        }
        Ok(Engine {
            net,
            tree,
            stats: EvalStats::default(),
            plans: Vec::new(),
        })
    }

    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    pub fn network(&self) -> &BeliefNetwork {
        self.net
    }

    /// `P(targets | evidence)` over full domains, scope in target order.
    pub fn query(&mut self, q: &Query) -> Result<Factor> {
        q.check(self.net)?;
        self.stats = EvalStats::default();
        self.plans.clear();
        let mut cache = HashMap::new();
        let root = self.tree.root();
        let joint = self.solve(root, &q.targets, &q.evidence, &mut cache)?;
        if q.evidence.is_empty() {
            Ok(joint)
        } else {
            factor::normalize(&joint)
        }
    }

    /// Counters for the last query, summed over every partition.
    pub fn eval_stats(&self) -> EvalStats {
        self.stats
    }

    /// The plans evaluated by the last query, children before parents.
    pub fn plans(&self) -> &[QueryPlan] {
        &self.plans
    }

    /// The plan the root would run for `q`, without evaluating anything.
    pub fn plan(&self, q: &Query) -> Result<QueryPlan> {
        q.check(self.net)?;
        plan_partition(
            self.net,
            &self.tree,
            self.tree.root(),
            &q.targets,
            &q.evidence,
        )
    }

    fn solve(
        &mut self,
        id: PartitionId,
        targets: &[String],
        evidence: &BTreeMap<String, String>,
        cache: &mut HashMap<(PartitionId, Vec<String>), Factor>,
    ) -> Result<Factor> {
        let key = (id, targets.to_vec());
        if let Some(f) = cache.get(&key) {
            return Ok(f.clone());
        }
        let plan = plan_partition(self.net, &self.tree, id, targets, evidence)?;
        let mut results = BTreeMap::new();
        for (c, vars) in &plan.subqueries {
            let vars: Vec<String> = vars.iter().cloned().collect();
            let r = self.solve(*c, &vars, evidence, cache)?;
            results.insert(*c, r);
        }
        let (f, mut stats) = evaluate(
            &plan,
            &results,
            self.net.variable_map(),
            self.net.bindings(),
        )?;
        stats.subqueries = plan.subqueries.len() as u64;
        self.stats.absorb(&stats);
        self.plans.push(plan);
        cache.insert(key, f.clone());
        Ok(f)
    }
}

/// One-shot query with the network's partition tree (or the default one).
pub fn query_marginal(net: &BeliefNetwork, tree: &PartitionTree, q: &Query) -> Result<Factor> {
    Engine::with_tree(net, tree.clone())?.query(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::approx_equal;
    use crate::network::load_network;
    use crate::oracle::brute_force_marginal;

    const SIX_NODE: &str = "
        var A : t,f
        var B : t,f
        var C : t,f
        var D : t,f
        var E : t,f
        var F : t,f
        cpt A { 0.3 0.7 }
        cpt B | A { 0.9 0.2 0.1 0.8 }
        cpt C | A { 0.6 0.25 0.4 0.75 }
        cpt E { 0.45 0.55 }
        cpt F | E { 0.8 0.1 0.2 0.9 }
        cpt D | B C F { 0.99 0.9 0.8 0.7 0.6 0.5 0.4 0.05
                        0.01 0.1 0.2 0.3 0.4 0.5 0.6 0.95 }
    ";

    const SHARED_CAUSE: &str = "
        var A : t,f
        var B : t,f
        var C : t,f
        var D : t,f
        var E : t,f
        cpt A { 0.1 0.9 }
        cpt B { 0.2 0.8 }
        cpt C { 0.3 0.7 }
        noisyor D | A:0.7 B:0.5
        noisyor E | B:0.6 C:0.4 leak:0.05
    ";

    fn check(text: &str, targets: &[&str], evidence: &[(&str, &str)]) -> EvalStats {
        let net = load_network(text).unwrap();
        let mut engine = Engine::new(&net).unwrap();
        let mut q = Query::new(targets);
        for (v, x) in evidence {
            q = q.given(v, x);
        }
        let got = engine.query(&q).unwrap();
        let want = brute_force_marginal(&net, targets, evidence).unwrap();
        assert!(approx_equal(&got, &want, 1e-12), "{got}\n{want}");
        engine.eval_stats()
    }

    #[test]
    fn six_node_marginal_and_dimensionality() {
        let stats = check(SIX_NODE, &["D"], &[]);
        assert_eq!(stats.largest_scope, 4);
        assert_eq!(stats.subqueries, 4);
    }

    #[test]
    fn six_node_posteriors() {
        check(SIX_NODE, &["A"], &[("B", "t")]);
        check(SIX_NODE, &["A", "E"], &[("D", "f")]);
        check(SIX_NODE, &["F", "B"], &[("D", "t"), ("C", "f")]);
    }

    #[test]
    fn root_prior_is_returned_unchanged() {
        let net = load_network(SIX_NODE).unwrap();
        let mut engine = Engine::new(&net).unwrap();
        let a = engine.query(&Query::new(&["A"])).unwrap();
        assert_eq!(a.table(), &[0.3, 0.7]);
    }

    #[test]
    fn shared_cause_joint_and_posteriors() {
        check(SHARED_CAUSE, &["D", "E"], &[]);
        check(SHARED_CAUSE, &["B"], &[("D", "t"), ("E", "t")]);
        check(SHARED_CAUSE, &["A", "C"], &[("E", "f")]);
        check(SHARED_CAUSE, &["D"], &[("C", "t")]);
    }

    #[test]
    fn single_node_needs_no_multiplication() {
        let stats = check("var X : a,b,c\ncpt X { 0.2 0.3 0.5 }", &["X"], &[]);
        assert_eq!(stats.multiplications, 0);
    }

    #[test]
    fn zero_mass_and_bad_queries() {
        let net =
            load_network("var X : t,f\nvar Y : t,f\ncpt X { 1 0 }\ncpt Y | X { 1 0.5 0 0.5 }")
                .unwrap();
        let mut engine = Engine::new(&net).unwrap();
        assert_eq!(
            engine.query(&Query::new(&["X"]).given("Y", "f")),
            Err(Error::ZeroMass)
        );
        assert!(matches!(
            engine.query(&Query::new::<&str>(&[])),
            Err(Error::Query(_))
        ));
        assert!(matches!(
            engine.query(&Query::new(&["X"]).given("X", "t")),
            Err(Error::Query(_))
        ));
        assert!(matches!(
            engine.query(&Query::new(&["Z"])),
            Err(Error::UnknownVariable(_))
        ));
        assert!(matches!(
            engine.query(&Query::new(&["X"]).given("Y", "maybe")),
            Err(Error::UnknownValue { .. })
        ));
    }

    #[test]
    fn evaluate_reports_missing_children() {
        let net = load_network(SHARED_CAUSE).unwrap();
        let engine = Engine::new(&net).unwrap();
        let plan = engine.plan(&Query::new(&["D"])).unwrap();
        let r = evaluate(&plan, &BTreeMap::new(), net.variable_map(), net.bindings());
        assert!(matches!(r, Err(Error::MissingChildResult(_))));
    }

    #[test]
    fn explicit_partition_from_the_file() {
        let text = format!("{SHARED_CAUSE}\npartition {{ (root: D,E (A) (B) (C)) }}");
        check(&text, &["D", "E"], &[("B", "f")]);
    }
}
