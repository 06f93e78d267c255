//! Generalized distributions: products over mismatched subdomains, and the
//! additive combination that needs marginals for variables one side lacks.

use std::collections::BTreeMap;

use spi_core::factor::{additive_combine, conformal_product, sum_out, AdditiveOp};
use spi_core::{Factor, ScopeEntry, Variable};

fn main() -> spi_core::Result<()> {
    let a = Variable::binary("A");
    let d = Variable::binary("D");

    // 1 on D=t, and c(D=t | A=t) = 0.7 defined only on that corner.
    let one = Factor::new("1", vec![ScopeEntry::from_values(&d, &["t"])?], vec![1.0])?;
    let c = Factor::new(
        "c",
        vec![
            ScopeEntry::from_values(&d, &["t"])?,
            ScopeEntry::from_values(&a, &["t"])?,
        ],
        vec![0.7],
    )?;
    let p_a = Factor::new("p(A)", vec![ScopeEntry::full(&a)], vec![0.1, 0.9])?;

    let marginals = BTreeMap::from([("A".to_string(), p_a.clone())]);
    let diff = additive_combine(AdditiveOp::Minus, &one, &c, &marginals)?;
    println!("1[D:t] - c[D:t|A:t], weighted by p(A):");
    println!("  {diff}");

    let joint = conformal_product(&c, &p_a);
    println!("c * p(A): {joint}");
    println!("summed over A: {}", sum_out(&diff, &["A"])?);
    Ok(())
}
