//! A node whose local model is written directly in the expression language:
//! an additive mixture of two partial tables.

use spi_core::oracle::brute_force_marginal;
use spi_core::{load_network, Engine, Query};

const NET: &str = "
var A : t,f
var B : lo,mid,hi
cpt A { 0.4 0.6 }
# B is mid with certainty when A is false; otherwise a spread.
expr B : (+ spread[B:lo,mid,hi|A:t] sure[B:mid|A:f])
bind spread = { 0.2 0.5 0.3 }
bind sure = { 1 }
";

fn main() -> spi_core::Result<()> {
    let net = load_network(NET)?;
    let mut engine = Engine::new(&net)?;
    println!("P(B) = {}", engine.query(&Query::new(&["B"]))?);
    println!(
        "P(A | B=mid) = {}",
        engine.query(&Query::new(&["A"]).given("B", "mid"))?
    );
    match brute_force_marginal(&net, &["B"], &[]) {
        Ok(f) => println!("oracle: {f}"),
        Err(e) => println!("oracle: {e}"),
    }
    Ok(())
}
