//! Composition and distribution in the root partition for p(D,E), where the
//! two noisy-or effects share the cause B.

use spi_core::{load_network, Engine, Query};

fn main() -> spi_core::Result<()> {
    let net = load_network(include_str!("../nets/shared_cause.net"))?;
    let engine = Engine::new(&net)?;
    let plan = engine.plan(&Query::new(&["D", "E"]))?;
    print!("{}", plan.dump(engine.tree()));
    println!(
        "composed size {} rewritten size {}",
        plan.composed.dag_size(),
        plan.rewritten.dag_size()
    );
    Ok(())
}
