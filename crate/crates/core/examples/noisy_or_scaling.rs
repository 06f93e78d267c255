//! Cost of p(D) for one noisy-or child as parents are added, against the
//! same child stored as a full table.

use spi_core::generate::{cpt_star, noisy_or_star};
use spi_core::{BeliefNetwork, Engine, Query};

fn cost(net: &BeliefNetwork) -> spi_core::Result<(u64, usize, u64)> {
    let mut engine = Engine::new(net)?;
    engine.query(&Query::new(&["D"]))?;
    let s = engine.eval_stats();
    Ok((s.multiplications, s.largest_scope, s.peak_cells))
}

fn main() -> spi_core::Result<()> {
    println!("n\tno_mults\tno_scope\tno_cells\tcpt_mults\tcpt_scope\tcpt_cells");
    for n in [2, 4, 8, 12, 16] {
        let a = cost(&noisy_or_star(0, n)?)?;
        let b = cost(&cpt_star(0, n)?)?;
        println!("{n}\t{}\t{}\t{}\t{}\t{}\t{}", a.0, a.1, a.2, b.0, b.1, b.2);
    }
    Ok(())
}
