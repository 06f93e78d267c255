//! Partition trees.
//!
//! The variables of a network are split into disjoint partitions arranged in
//! a tree. Every parent of a variable must live in the variable's own
//! partition or somewhere below it, inside the subtree of one child; a query
//! at a partition then needs, from each child, one joint over the antecedents
//! found in that child's subtree. Root variables of the network sit in leaf
//! partitions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::network::BeliefNetwork;

/// A partition tree as written in a net file:
/// `(P1: D,E (P2: A) (P3: B) (P4: C))`. Labels are optional.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionSpec {
    pub label: Option<String>,
    pub nodes: Vec<String>,
    pub children: Vec<PartitionSpec>,
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        if let Some(l) = &self.label {
            write!(f, "{l}: ")?;
        }
        write!(f, "{}", self.nodes.join(","))?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        write!(f, ")")
    }
}

/// Parses a parenthesized partition tree literal.
pub fn parse_spec(text: &str) -> Result<PartitionSpec> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let spec = parse_node(&chars, &mut pos)?;
    skip_ws(&chars, &mut pos);
    if pos != chars.len() {
        return Err(syntax(pos, "trailing input after partition tree"));
    }
    Ok(spec)
}

fn syntax(position: usize, message: &str) -> Error {
    Error::Syntax {
        position,
        message: message.to_string(),
    }
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while *pos < chars.len() && chars[*pos].is_whitespace() {
        *pos += 1;
    }
}

fn word(chars: &[char], pos: &mut usize) -> Option<String> {
    skip_ws(chars, pos);
    let start = *pos;
    while *pos < chars.len() && (chars[*pos].is_ascii_alphanumeric() || chars[*pos] == '_') {
        *pos += 1;
    }
    (*pos > start).then(|| chars[start..*pos].iter().collect())
}

fn parse_node(chars: &[char], pos: &mut usize) -> Result<PartitionSpec> {
    skip_ws(chars, pos);
    if chars.get(*pos) != Some(&'(') {
        return Err(syntax(*pos, "expected `(`"));
    }
    *pos += 1;
    let mut label = None;
    let mut nodes = Vec::new();
    let save = *pos;
    if let Some(w) = word(chars, pos) {
        skip_ws(chars, pos);
        if chars.get(*pos) == Some(&':') {
            *pos += 1;
            label = Some(w);
        } else {
            *pos = save;
        }
    }
    loop {
        let Some(w) = word(chars, pos) else {
            return Err(syntax(*pos, "expected a variable name"));
        };
        nodes.push(w);
        skip_ws(chars, pos);
        if chars.get(*pos) == Some(&',') {
            *pos += 1;
        } else {
            break;
        }
    }
    let mut children = Vec::new();
    loop {
        skip_ws(chars, pos);
        match chars.get(*pos) {
            Some('(') => children.push(parse_node(chars, pos)?),
            Some(')') => {
                *pos += 1;
                break;
            }
            _ => return Err(syntax(*pos, "expected `(` or `)`")),
        }
    }
    Ok(PartitionSpec {
        label,
        nodes,
        children,
    })
}

pub type PartitionId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub label: String,
    pub nodes: BTreeSet<String>,
    pub children: Vec<PartitionId>,
    pub parent: Option<PartitionId>,
}

/// A tree of partitions; id 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTree {
    parts: Vec<Partition>,
}

/// Where a variable referenced from a partition can be found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Local,
    Child(PartitionId),
}

impl PartitionTree {
    /// Converts a literal; fails only if a name is not a network variable.
    pub fn from_spec(net: &BeliefNetwork, spec: &PartitionSpec) -> Result<Self> {
        let mut parts = Vec::new();
        let mut queue = VecDeque::from([(spec, None)]);
        while let Some((s, parent)) = queue.pop_front() {
            let id = parts.len();
            for n in &s.nodes {
                net.variable(n)?;
            }
            parts.push(Partition {
                label: s.label.clone().unwrap_or_else(|| format!("P{}", id + 1)),
                nodes: s.nodes.iter().cloned().collect(),
                children: Vec::new(),
                parent,
            });
            if let Some(p) = parent {
                parts[p].children.push(id);
            }
            for c in &s.children {
                queue.push_back((c, Some(id)));
            }
        }
        Ok(PartitionTree { parts })
    }

    pub fn to_spec(&self) -> PartitionSpec {
        self.spec_of(0)
    }

    fn spec_of(&self, id: PartitionId) -> PartitionSpec {
        let p = &self.parts[id];
        PartitionSpec {
            label: Some(p.label.clone()),
            nodes: p.nodes.iter().cloned().collect(),
            children: p.children.iter().map(|&c| self.spec_of(c)).collect(),
        }
    }

    pub fn root(&self) -> PartitionId {
        0
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn partition(&self, id: PartitionId) -> &Partition {
        &self.parts[id]
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.parts
    }

    pub fn partition_of(&self, var: &str) -> Option<PartitionId> {
        self.parts.iter().position(|p| p.nodes.contains(var))
    }

    /// All variables in the subtree rooted at `id`.
    pub fn subtree_variables(&self, id: PartitionId) -> BTreeSet<String> {
        let mut out = self.parts[id].nodes.clone();
        for &c in &self.parts[id].children {
            out.extend(self.subtree_variables(c));
        }
        out
    }

    pub fn in_subtree(&self, id: PartitionId, var: &str) -> bool {
        self.parts[id].nodes.contains(var)
            || self.parts[id]
                .children
                .iter()
                .any(|&c| self.in_subtree(c, var))
    }

    fn is_ancestor(&self, upper: PartitionId, mut lower: PartitionId) -> bool {
        while let Some(p) = self.parts[lower].parent {
            if p == upper {
                return true;
            }
            lower = p;
        }
        false
    }
}

impl fmt::Display for PartitionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_spec())
    }
}

/// Builds the default tree: the network's sinks form the root partition;
/// the remaining variables split into connected components, each of which
/// becomes a child subtree built the same way from its own sinks. Parentless
/// variables that would share a partition with children below are moved to
/// leaves of their own.
pub fn build_default_partition_tree(net: &BeliefNetwork) -> PartitionTree {
    let all: BTreeSet<String> = net.names().map(str::to_string).collect();
    let mut parts: Vec<Partition> = Vec::new();
    let mut queue = VecDeque::from([(all, None::<PartitionId>)]);
    while let Some((component, parent)) = queue.pop_front() {
        let sinks: BTreeSet<String> = component
            .iter()
            .filter(|v| !net.children(v).iter().any(|c| component.contains(*c)))
            .cloned()
            .collect();
        let rest: BTreeSet<String> = component.difference(&sinks).cloned().collect();
        let mut nodes = sinks;
        let mut pending: Vec<BTreeSet<String>> = components(net, &rest);
        if !rest.is_empty() {
            let roots: Vec<String> = nodes
                .iter()
                .filter(|v| net.parents(v).map_or(true, |p| p.is_empty()))
                .cloned()
                .collect();
            for r in roots {
                nodes.remove(&r);
                pending.push(BTreeSet::from([r]));
            }
            pending.sort();
        }
        let id = parts.len();
        parts.push(Partition {
            label: format!("P{}", id + 1),
            nodes,
            children: Vec::new(),
            parent,
        });
        if let Some(p) = parent {
            parts[p].children.push(id);
        }
        for c in pending {
            queue.push_back((c, Some(id)));
        }
    }
    PartitionTree { parts }
}

/// Connected components of `vars` under parent/child edges within `vars`,
/// ordered by their smallest member.
fn components(net: &BeliefNetwork, vars: &BTreeSet<String>) -> Vec<BTreeSet<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in vars {
        if seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start.clone()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v.clone()) {
                continue;
            }
            comp.insert(v.clone());
            let parents = net.parents(&v).map(|p| p.to_vec()).unwrap_or_default();
            let children: Vec<String> = net.children(&v).into_iter().map(str::to_string).collect();
            for n in parents.into_iter().chain(children) {
                if vars.contains(&n) && !seen.contains(&n) {
                    stack.push(n);
                }
            }
        }
        out.push(comp);
    }
    out
}

/// Diagnostics for coverage, disjointness, the decomposition constraint and
/// the root-variables-in-leaves restriction. Empty iff the tree is valid.
pub fn validate_partition_tree(net: &BeliefNetwork, tree: &PartitionTree) -> Vec<String> {
    let mut out = Vec::new();
    let mut owner: BTreeMap<&str, PartitionId> = BTreeMap::new();
    for (id, p) in tree.parts.iter().enumerate() {
        if p.nodes.is_empty() {
            out.push(format!("partition {} is empty", p.label));
        }
        for n in &p.nodes {
            if net.variable(n).is_err() {
                out.push(format!(
                    "partition {} names unknown variable `{n}`",
                    p.label
                ));
            }
            if let Some(prev) = owner.insert(n, id) {
                out.push(format!(
                    "variable `{n}` appears in partitions {} and {}",
                    tree.parts[prev].label, p.label
                ));
            }
        }
    }
    for v in net.names() {
        if !owner.contains_key(v) {
            out.push(format!("variable `{v}` is not covered by any partition"));
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (id, p) in tree.parts.iter().enumerate() {
        for n in &p.nodes {
            for parent in net.parents(n).unwrap_or(&[]) {
                let at = owner[parent.as_str()];
                if at == id || tree.is_ancestor(id, at) {
                    continue;
                }
                if tree.is_ancestor(at, id) {
                    out.push(format!(
                        "decomposition constraint: parent `{parent}` of `{n}` lies above it in partition {}; \
                         child partitions holding consequents are not supported",
                        tree.parts[at].label
                    ));
                } else {
                    out.push(format!(
                        "decomposition constraint: parent `{parent}` of `{n}` (partition {}) is not below partition {}",
                        tree.parts[at].label, p.label
                    ));
                }
            }
            let is_root_var = net.parents(n).is_ok_and(|ps| ps.is_empty());
            if is_root_var && !p.children.is_empty() {
                out.push(format!(
                    "root variable `{n}` must lie in a leaf partition, but {} has children",
                    p.label
                ));
            }
        }
    }
    out
}

/// Groups `vars` by the child subtree of partition `id` that contains each;
/// variables of `id` itself go to [`Bucket::Local`].
pub fn child_requirements<'a, I>(
    tree: &PartitionTree,
    id: PartitionId,
    vars: I,
) -> Result<BTreeMap<Bucket, BTreeSet<String>>>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out: BTreeMap<Bucket, BTreeSet<String>> = BTreeMap::new();
    let p = &tree.parts[id];
    for v in vars {
        let bucket = if p.nodes.contains(v) {
            Bucket::Local
        } else {
            let child = p
                .children
                .iter()
                .copied()
                .find(|&c| tree.in_subtree(c, v))
                .ok_or_else(|| {
                    Error::Partition(format!(
                        "variable `{v}` is not in the subtree of {}",
                        p.label
                    ))
                })?;
            Bucket::Child(child)
        };
        out.entry(bucket).or_default().insert(v.to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{load_network, NetworkBuilder};

    fn six_node() -> BeliefNetwork {
        let mut b = NetworkBuilder::new();
        for v in ["A", "B", "C", "D", "E", "F"] {
            b.binary(v);
        }
        b.cpt("A", &[], vec![0.5, 0.5])
            .cpt("B", &["A"], vec![0.5; 4])
            .cpt("C", &["A"], vec![0.5; 4])
            .cpt("E", &[], vec![0.5, 0.5])
            .cpt("F", &["E"], vec![0.5; 4])
            .cpt("D", &["B", "C", "F"], vec![0.5; 16]);
        b.build().unwrap()
    }

    fn shared_cause() -> BeliefNetwork {
        let mut b = NetworkBuilder::new();
        for v in ["A", "B", "C", "D", "E"] {
            b.binary(v);
        }
        b.cpt("A", &[], vec![0.1, 0.9])
            .cpt("B", &[], vec![0.2, 0.8])
            .cpt("C", &[], vec![0.3, 0.7])
            .noisy_or("D", &[("A", 0.7), ("B", 0.5)], None)
            .noisy_or("E", &[("B", 0.6), ("C", 0.4)], None);
        b.build().unwrap()
    }

    #[test]
    fn default_tree_for_six_node_net() {
        let net = six_node();
        let tree = build_default_partition_tree(&net);
        assert_eq!(
            tree.to_string(),
            "(P1: D (P2: B,C (P4: A)) (P3: F (P5: E)))"
        );
        assert!(validate_partition_tree(&net, &tree).is_empty());
    }

    #[test]
    fn default_tree_for_shared_cause_net() {
        let net = shared_cause();
        let tree = build_default_partition_tree(&net);
        assert_eq!(tree.to_string(), "(P1: D,E (P2: A) (P3: B) (P4: C))");
        assert!(validate_partition_tree(&net, &tree).is_empty());
    }

    #[test]
    fn single_node_is_one_leaf() {
        let mut b = NetworkBuilder::new();
        b.binary("X").cpt("X", &[], vec![0.4, 0.6]);
        let net = b.build().unwrap();
        let tree = build_default_partition_tree(&net);
        assert_eq!(tree.len(), 1);
        assert!(validate_partition_tree(&net, &tree).is_empty());
    }

    #[test]
    fn isolated_root_moves_to_leaf() {
        let mut b = NetworkBuilder::new();
        b.binary("A").binary("B").binary("X");
        b.cpt("A", &[], vec![0.5, 0.5])
            .cpt("B", &["A"], vec![0.5; 4])
            .cpt("X", &[], vec![0.5, 0.5]);
        let net = b.build().unwrap();
        let tree = build_default_partition_tree(&net);
        assert_eq!(tree.to_string(), "(P1: B (P2: A) (P3: X))");
        assert!(validate_partition_tree(&net, &tree).is_empty());
    }

    #[test]
    fn spec_round_trip() {
        let s = parse_spec("(P1: D,E (P2: A) (P3: B) (P4: C))").unwrap();
        assert_eq!(s.to_string(), "(P1: D,E (P2: A) (P3: B) (P4: C))");
        let unlabeled = parse_spec(" ( D , E ( A ) ) ").unwrap();
        assert_eq!(unlabeled.label, None);
        assert_eq!(unlabeled.nodes, ["D", "E"]);
        assert!(parse_spec("(P1: D").is_err());
        assert!(parse_spec("(P1: D) x").is_err());
    }

    #[test]
    fn hand_written_tree_is_valid() {
        let net = six_node();
        let spec = parse_spec("(root: D (C1: B,C (C3: A)) (C2: F (C4: E)))").unwrap();
        let tree = PartitionTree::from_spec(&net, &spec).unwrap();
        assert!(validate_partition_tree(&net, &tree).is_empty());
    }

    #[test]
    fn constraint_violation_is_diagnosed() {
        let net = six_node();
        // B and C share parent A, but sit in sibling subtrees with A under B.
        let spec = parse_spec("(D (B (A)) (C) (F (E)))").unwrap();
        let tree = PartitionTree::from_spec(&net, &spec).unwrap();
        let diags = validate_partition_tree(&net, &tree);
        assert!(
            diags.iter().any(|d| d.contains("parent `A` of `C`")),
            "{diags:?}"
        );
    }

    #[test]
    fn consequent_below_is_diagnosed() {
        let net = six_node();
        let spec = parse_spec("(B,C (D (F (E))) (A))").unwrap();
        let tree = PartitionTree::from_spec(&net, &spec).unwrap();
        let diags = validate_partition_tree(&net, &tree);
        assert!(diags.iter().any(|d| d.contains("lies above")), "{diags:?}");
    }

    #[test]
    fn coverage_and_root_leaf_diagnostics() {
        let net = six_node();
        let spec = parse_spec("(D (B,C (A)) (F))").unwrap();
        let tree = PartitionTree::from_spec(&net, &spec).unwrap();
        let diags = validate_partition_tree(&net, &tree);
        assert!(
            diags.iter().any(|d| d.contains("`E` is not covered")),
            "{diags:?}"
        );

        let spec = parse_spec("(D (A,B,C) (F (E)))").unwrap();
        let tree = PartitionTree::from_spec(&net, &spec).unwrap();
        assert!(validate_partition_tree(&net, &tree).is_empty());
        let spec = parse_spec("(D (B,C,A (E,F)))").unwrap();
        let tree = PartitionTree::from_spec(&net, &spec).unwrap();
        let diags = validate_partition_tree(&net, &tree);
        assert!(
            diags.iter().any(|d| d.contains("root variable `A`")),
            "{diags:?}"
        );
    }

    #[test]
    fn requirements_group_by_child() {
        let net = six_node();
        let tree = build_default_partition_tree(&net);
        let req = child_requirements(&tree, 0, ["B", "C", "F"]).unwrap();
        assert_eq!(req.len(), 2);
        assert_eq!(
            req[&Bucket::Child(1)],
            ["B".to_string(), "C".to_string()].into()
        );
        assert_eq!(req[&Bucket::Child(2)], ["F".to_string()].into());
        let local = child_requirements(&tree, 0, ["D"]).unwrap();
        assert_eq!(local.keys().collect::<Vec<_>>(), [&Bucket::Local]);
        assert!(child_requirements(&tree, 1, ["F"]).is_err());
        // A lives two levels down, in the subtree of child 1
        assert_eq!(
            child_requirements(&tree, 0, ["A"]).unwrap()[&Bucket::Child(1)].len(),
            1
        );

        let net3 = shared_cause();
        let tree3 = build_default_partition_tree(&net3);
        let req = child_requirements(&tree3, 0, ["A", "B", "C"]).unwrap();
        assert_eq!(req.len(), 3);
        assert!(req.values().all(|s| s.len() == 1));
    }

    #[test]
    fn partition_block_in_net_file() {
        let text = "
            var A : t,f
            var B : t,f
            cpt A { 0.5 0.5 }
            cpt B | A { 0.5 0.5 0.5 0.5 }
            partition { (top: B (bottom: A)) }
        ";
        let net = load_network(text).unwrap();
        assert_eq!(
            net.partition_spec().unwrap().to_string(),
            "(top: B (bottom: A))"
        );
        let bad = text.replace("(top: B (bottom: A))", "(top: A (bottom: B))");
        assert!(load_network(&bad).is_err());
    }
}
