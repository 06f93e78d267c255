//! Posterior queries with evidence, and the counters of each run.

use spi_core::{load_network, Engine, Query};

fn main() -> spi_core::Result<()> {
    let net = load_network(include_str!("../nets/six_node.net"))?;
    let mut engine = Engine::new(&net)?;
    let queries = [
        Query::new(&["D"]),
        Query::new(&["A"]).given("D", "t"),
        Query::new(&["A", "E"]).given("D", "f").given("C", "t"),
    ];
    for q in &queries {
        let f = engine.query(q)?;
        println!("P({:?} | {:?}) = {f}", q.targets, q.evidence);
        for (k, v) in engine.eval_stats().entries() {
            println!("  {k} {v}");
        }
    }
    match engine.query(&Query::new(&["A"]).given("Q", "t")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
