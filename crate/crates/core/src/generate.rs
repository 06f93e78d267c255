//! Seeded generators for test and benchmark networks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expr::{Assignment, Expression};
use crate::network::{BeliefNetwork, NetworkBuilder};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random column-stochastic table for `rows` child values and `cols`
/// parent configurations, laid out child-major.
fn random_cpt(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<f64> {
    let mut table = vec![0.0; rows * cols];
    for c in 0..cols {
        let w: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        for (r, x) in w.iter().enumerate() {
            table[r * cols + c] = x / total;
        }
    }
    table
}

/// Random binary DAG over `X0..X{n-1}`, each node with up to `max_parents`
/// earlier nodes as parents; a node with parents is a noisy-or with
/// probability `noisy_or_share`, otherwise a full CPT.
pub fn random_network(
    seed: u64,
    n: usize,
    max_parents: usize,
    noisy_or_share: f64,
) -> Result<BeliefNetwork> {
    let mut rng = rng(seed);
    let names: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
    let mut b = NetworkBuilder::new();
    for v in &names {
        b.binary(v);
    }
    for i in 0..n {
        let k = rng.gen_range(0..=max_parents.min(i));
        let mut pool: Vec<&str> = names[..i].iter().map(String::as_str).collect();
        pool.shuffle(&mut rng);
        let mut parents: Vec<&str> = pool.into_iter().take(k).collect();
        parents.sort_unstable();
        if k > 0 && rng.gen_bool(noisy_or_share) {
            let ps: Vec<(&str, f64)> = parents
                .iter()
                .map(|p| (*p, rng.gen_range(0.0..1.0)))
                .collect();
            let leak = rng.gen_bool(0.3).then(|| rng.gen_range(0.0..0.2));
            b.noisy_or(&names[i], &ps, leak);
        } else {
            let table = random_cpt(&mut rng, 2, 1 << k);
            b.cpt(&names[i], &parents, table);
        }
    }
    b.build()
}

/// One noisy-or child `D` over `n` independent root parents `P1..Pn`.
pub fn noisy_or_star(seed: u64, n: usize) -> Result<BeliefNetwork> {
    let mut rng = rng(seed);
    let mut b = NetworkBuilder::new();
    let parents: Vec<String> = (1..=n).map(|i| format!("P{i}")).collect();
    let mut params = Vec::new();
    for p in &parents {
        b.binary(p);
        let prior = rng.gen_range(0.05..0.95);
        b.cpt(p, &[], vec![prior, 1.0 - prior]);
        params.push((p.as_str(), rng.gen_range(0.05..0.95)));
    }
    b.binary("D").noisy_or("D", &params, None);
    b.build()
}

/// The same star with `D` given as a full conditional table (the expanded
/// noisy-or).
pub fn cpt_star(seed: u64, n: usize) -> Result<BeliefNetwork> {
    let star = noisy_or_star(seed, n)?;
    let mut b = NetworkBuilder::new();
    for v in star.variables() {
        b.binary(v.name());
    }
    for p in star.parents("D")? {
        let crate::network::LocalModel::Cpt(f) = star.model(p)? else {
            unreachable!()
        };
        b.cpt(p, &[], f.table().to_vec());
    }
    let crate::network::LocalModel::Expr {
        noisy_or: Some(no), ..
    } = star.model("D")?
    else {
        unreachable!()
    };
    let d = star.variable("D")?;
    let pvars: Vec<_> = no
        .parents
        .iter()
        .map(|p| star.variable(p).cloned())
        .collect::<Result<_>>()?;
    let cpt = crate::oracle::expand_noisy_or_to_cpt(d, &pvars, &no.params, no.leak)?;
    let ps: Vec<&str> = no.parents.iter().map(String::as_str).collect();
    b.cpt("D", &ps, cpt.table().to_vec());
    b.build()
}

/// Two-level bipartite net: diseases `D1..` with priors, findings `F1..`
/// that are noisy-ors of the listed diseases (0-based indices).
pub fn bn2o(seed: u64, diseases: usize, findings: &[&[usize]]) -> Result<BeliefNetwork> {
    let mut rng = rng(seed);
    let mut b = NetworkBuilder::new();
    let ds: Vec<String> = (1..=diseases).map(|i| format!("D{i}")).collect();
    for d in &ds {
        b.binary(d);
        let prior = rng.gen_range(0.02..0.3);
        b.cpt(d, &[], vec![prior, 1.0 - prior]);
    }
    for (j, parents) in findings.iter().enumerate() {
        let f = format!("F{}", j + 1);
        b.binary(&f);
        let ps: Vec<(&str, f64)> = parents
            .iter()
            .map(|&i| (ds[i].as_str(), rng.gen_range(0.3..0.95)))
            .collect();
        b.noisy_or(&f, &ps, Some(rng.gen_range(0.0..0.05)));
    }
    b.build()
}

/// A random well-formed expression over variables `V0..V5` with domains
/// `{a, b, c}`.
pub fn random_expression(rng: &mut impl Rng, depth: usize) -> Expression {
    if depth == 0 || rng.gen_bool(0.3) {
        return random_leaf(rng);
    }
    let n = rng.gen_range(2..=3);
    let terms: Vec<Expression> = (0..n).map(|_| random_expression(rng, depth - 1)).collect();
    match rng.gen_range(0..3) {
        0 => Expression::Product(terms),
        1 => Expression::Sum(terms),
        _ => Expression::Difference(terms),
    }
}

fn random_assignments(
    rng: &mut impl Rng,
    used: &mut Vec<usize>,
    min: usize,
    max: usize,
) -> Vec<Assignment> {
    let values = ["a", "b", "c"];
    let k = rng.gen_range(min..=max);
    let mut out = Vec::new();
    for _ in 0..k {
        let Some(v) = (0..6)
            .filter(|v| !used.contains(v))
            .nth(rng.gen_range(0..6 - used.len()))
        else {
            break;
        };
        used.push(v);
        let count = rng.gen_range(1..=3);
        let mut vals: Vec<&str> = values.choose_multiple(rng, count).copied().collect();
        vals.sort_unstable();
        out.push(Assignment::new(&format!("V{v}"), vals));
    }
    out
}

fn random_leaf(rng: &mut impl Rng) -> Expression {
    let mut used = Vec::new();
    if rng.gen_bool(0.3) {
        return Expression::One(random_assignments(rng, &mut used, 0, 2));
    }
    let names = ["p", "c_D_A", "q2", "leak_X"];
    let name = names[rng.gen_range(0..names.len())];
    let conditioned = random_assignments(rng, &mut used, 1, 2);
    let conditioning = random_assignments(rng, &mut used, 0, 2);
    Expression::dist(name, conditioned, conditioning)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, print};
    use crate::network::validate_network;

    #[test]
    fn generated_networks_are_valid_and_reproducible() {
        for seed in 0..20 {
            let a = random_network(seed, 8, 3, 0.5).unwrap();
            assert!(validate_network(&a).is_empty());
            let b = random_network(seed, 8, 3, 0.5).unwrap();
            assert_eq!(a.bindings(), b.bindings());
        }
    }

    #[test]
    fn stars_agree() {
        let no = noisy_or_star(3, 5).unwrap();
        let cpt = cpt_star(3, 5).unwrap();
        let a = crate::oracle::brute_force_marginal(&no, &["D"], &[]).unwrap();
        let b = crate::oracle::brute_force_marginal(&cpt, &["D"], &[]).unwrap();
        assert!(crate::factor::approx_equal(&a, &b, 1e-15));
    }

    #[test]
    fn bn2o_shape() {
        let net = bn2o(1, 4, &[&[0, 1], &[1, 2, 3]]).unwrap();
        assert_eq!(net.parents("F2").unwrap().len(), 3);
        assert_eq!(net.variables().len(), 6);
    }

    #[test]
    fn random_expressions_print_and_parse() {
        let mut r = rng(9);
        for _ in 0..200 {
            let e = random_expression(&mut r, 3);
            assert_eq!(parse(&print(&e)).unwrap(), e);
        }
    }
}
