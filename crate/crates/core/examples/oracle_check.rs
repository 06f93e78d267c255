//! Random networks answered by the engine and by full enumeration.

use rand::seq::SliceRandom;
use rand::Rng;
use spi_core::engine::query_marginal;
use spi_core::factor::approx_equal;
use spi_core::generate::{random_network, rng};
use spi_core::oracle::brute_force_marginal;
use spi_core::{build_default_partition_tree, Query};

fn main() -> spi_core::Result<()> {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let net = random_network(seed, 7, 3, 0.5)?;
        let mut names: Vec<String> = net.names().map(String::from).collect();
        names.shuffle(&mut r);
        let target = &names[0];
        let mut q = Query::new(&[target]);
        let mut ev = Vec::new();
        for v in names.iter().skip(1).take(r.gen_range(0..=2)) {
            let x = if r.gen_bool(0.5) { "t" } else { "f" };
            q = q.given(v, x);
            ev.push((v.as_str(), x));
        }
        let tree = build_default_partition_tree(&net);
        match (
            query_marginal(&net, &tree, &q),
            brute_force_marginal(&net, &[target.as_str()], &ev),
        ) {
            (Ok(a), Ok(b)) => {
                assert!(approx_equal(&a, &b, 1e-9), "seed {seed}");
                let d = a
                    .table()
                    .iter()
                    .zip(b.table())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                worst = worst.max(d);
            }
            (Err(a), Err(b)) => println!("seed {seed}: both failed ({a} / {b})"),
            (a, b) => panic!("seed {seed}: engine {a:?} oracle {b:?}"),
        }
    }
    println!("50 networks, max abs difference {worst:e}");
    Ok(())
}
