//! Brute-force reference inference by enumerating the full joint.
//!
//! Nothing here goes through the factor product or the expression evaluator:
//! each chain-rule term is looked up by direct index arithmetic, so the
//! results are an independent check on the engine.

use crate::error::{Error, Result};
use crate::factor::{Factor, ScopeEntry, Variable};
use crate::network::{BeliefNetwork, LocalModel};

/// Largest joint the oracle will enumerate.
pub const MAX_JOINT_CELLS: usize = 1 << 22;

/// Full CPT of a noisy-or node, scope `(child, parents...)`:
/// `P(child = first value | a) = 1 - (1 - leak) * prod over parents present in a of (1 - c)`.
pub fn expand_noisy_or_to_cpt(
    child: &Variable,
    parents: &[Variable],
    params: &[f64],
    leak: Option<f64>,
) -> Result<Factor> {
    if child.cardinality() != 2 || parents.iter().any(|p| p.cardinality() != 2) {
        return Err(Error::Model("noisy-or variables must be binary".into()));
    }
    if params.len() != parents.len() {
        return Err(Error::Model("one parameter per parent is required".into()));
    }
    let columns = 1usize << parents.len();
    let mut on = Vec::with_capacity(columns);
    for col in 0..columns {
        let mut fail = 1.0 - leak.unwrap_or(0.0);
        for (i, c) in params.iter().enumerate() {
            // Row-major over parents: parent i's digit, 0 is the first value.
            let digit = (col >> (parents.len() - 1 - i)) & 1;
            if digit == 0 {
                fail *= 1.0 - c;
            }
        }
        on.push(1.0 - fail);
    }
    let off: Vec<f64> = on.iter().map(|p| 1.0 - p).collect();
    let mut scope = vec![ScopeEntry::full(child)];
    scope.extend(parents.iter().map(ScopeEntry::full));
    Factor::new(&format!("cpt_{}", child.name()), scope, [on, off].concat())
}

/// The conditional table of every node, as `(parent positions, table)` with
/// the table laid out child-major over `(child, parents...)`.
fn conditional_tables(net: &BeliefNetwork) -> Result<Vec<(usize, Vec<usize>, Factor)>> {
    let names: Vec<&str> = net.names().collect();
    let pos = |n: &str| names.iter().position(|m| *m == n).expect("declared");
    let mut out = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let table = match net.model(name)? {
            LocalModel::Cpt(f) => f.clone(),
            LocalModel::Expr {
                noisy_or: Some(no), ..
            } => {
                let parents = no
                    .parents
                    .iter()
                    .map(|p| net.variable(p).cloned())
                    .collect::<Result<Vec<_>>>()?;
                expand_noisy_or_to_cpt(net.variable(name)?, &parents, &no.params, no.leak)?
            }
            LocalModel::Expr { .. } => {
                return Err(Error::Unsupported(format!(
                    "general expression at `{name}`"
                )))
            }
        };
        let parents = table.scope()[1..].iter().map(|e| pos(e.name())).collect();
        out.push((i, parents, table));
    }
    Ok(out)
}

/// Iterates every joint assignment (as value indices in declaration order)
/// with its chain-rule probability.
fn for_each_joint_cell(net: &BeliefNetwork, mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
    let dims: Vec<usize> = net.variables().iter().map(Variable::cardinality).collect();
    let cells = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    match cells {
        Some(n) if n <= MAX_JOINT_CELLS => {}
        _ => {
            return Err(Error::Unsupported(format!(
                "joint larger than {MAX_JOINT_CELLS} cells"
            )))
        }
    }
    let tables = conditional_tables(net)?;
    let mut digits = vec![0usize; dims.len()];
    loop {
        let mut p = 1.0;
        for (child, parents, table) in &tables {
            let mut idx = digits[*child];
            for &q in parents {
                idx = idx * dims[q] + digits[q];
            }
            p *= table.table()[idx];
        }
        visit(&digits, p);
        let mut i = dims.len();
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < dims[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// The joint over all variables, in declaration order.
pub fn brute_force_joint(net: &BeliefNetwork) -> Result<Factor> {
    let mut table = Vec::new();
    for_each_joint_cell(net, |_, p| table.push(p))?;
    let scope = net.variables().iter().map(ScopeEntry::full).collect();
    Factor::new("joint", scope, table)
}

/// `P(targets | evidence)` by enumeration, scope in the order of `targets`.
/// Without evidence the result is the unnormalized (but coherent) marginal.
pub fn brute_force_marginal(
    net: &BeliefNetwork,
    targets: &[&str],
    evidence: &[(&str, &str)],
) -> Result<Factor> {
    let names: Vec<&str> = net.names().collect();
    let pos = |n: &str| {
        names
            .iter()
            .position(|m| *m == n)
            .ok_or_else(|| Error::UnknownVariable(n.to_string()))
    };
    let target_pos = targets.iter().map(|t| pos(t)).collect::<Result<Vec<_>>>()?;
    let mut observed = Vec::new();
    for (v, val) in evidence {
        let i = pos(v)?;
        let idx = net.variables()[i]
            .value_index(val)
            .ok_or_else(|| Error::UnknownValue {
                variable: v.to_string(),
                value: val.to_string(),
            })?;
        observed.push((i, idx));
    }
    let dims: Vec<usize> = target_pos
        .iter()
        .map(|&i| net.variables()[i].cardinality())
        .collect();
    let mut table = vec![0.0; dims.iter().product()];
    for_each_joint_cell(net, |digits, p| {
        if observed.iter().all(|&(i, v)| digits[i] == v) {
            let mut flat = 0;
            for (&i, &d) in target_pos.iter().zip(&dims) {
                flat = flat * d + digits[i];
            }
            table[flat] += p;
        }
    })?;
    if !evidence.is_empty() {
        let total: f64 = table.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        table.iter_mut().for_each(|v| *v /= total);
    }
    let scope = target_pos
        .iter()
        .map(|&i| ScopeEntry::full(&net.variables()[i]))
        .collect();
    Factor::new("marginal", scope, table)
}
