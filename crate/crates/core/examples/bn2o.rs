//! Disease posteriors in a two-level noisy-or net, and how the rewritten
//! expression grows with positive and negative findings.

use spi_core::{load_network, Engine, Query};

fn main() -> spi_core::Result<()> {
    let net = load_network(include_str!("../nets/bn2o.net"))?;
    let mut engine = Engine::new(&net)?;
    let findings = ["F1", "F2", "F3", "F4", "F5", "F6"];

    let mut q = Query::new(&["D1"]);
    for (i, f) in findings.iter().enumerate() {
        q = q.given(f, if i % 3 == 0 { "t" } else { "f" });
    }
    for d in ["D1", "D2", "D3", "D4"] {
        let q = Query {
            targets: vec![d.to_string()],
            evidence: q.evidence.clone(),
        };
        println!(
            "P({d}=t | F1,F4 positive, rest negative) = {:.6}",
            engine.query(&q)?.table()[0]
        );
    }

    println!("positives  negatives  rewritten size");
    for pos in 0..=3 {
        for neg in 0..=3 {
            let mut q = Query::new(&["D1"]);
            for f in &findings[..pos] {
                q = q.given(f, "t");
            }
            for f in &findings[3..3 + neg] {
                q = q.given(f, "f");
            }
            println!(
                "{pos:>9}  {neg:>9}  {}",
                engine.plan(&q)?.rewritten.dag_size()
            );
        }
    }
    Ok(())
}
