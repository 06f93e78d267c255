//! A noisy-or node as a local expression, checked against its full table.

use spi_core::eval::evaluate_direct;
use spi_core::expr::{build_noisy_or, noisy_or_bindings};
use spi_core::factor::{approx_equal, arrange};
use spi_core::oracle::expand_noisy_or_to_cpt;
use spi_core::{print, Variable};

fn main() -> spi_core::Result<()> {
    let d = Variable::binary("D");
    let parents = [
        Variable::binary("A"),
        Variable::binary("B"),
        Variable::binary("C"),
    ];
    let params = [0.7, 0.5, 0.2];
    let leak = Some(0.05);

    let e = build_noisy_or(&d, &parents, &params, leak)?;
    println!("{}", print(&e));

    let bindings = noisy_or_bindings(&d, &parents, &params, leak)?;
    let vars = std::iter::once(&d)
        .chain(&parents)
        .map(|v| (v.name().to_string(), v.clone()))
        .collect();
    let names = ["D", "A", "B", "C"];
    let from_expr = arrange(&evaluate_direct(&e, &vars, &bindings)?, &names)?;
    let table = expand_noisy_or_to_cpt(&d, &parents, &params, leak)?;
    for (idx, v) in table.cells() {
        let row: Vec<String> = idx
            .iter()
            .zip(&names)
            .map(|(i, n)| format!("{n}={}", ["t", "f"][*i]))
            .collect();
        println!("{:<20} {v:.6}", row.join(","));
    }
    println!(
        "expression matches table: {}",
        approx_equal(&from_expr, &table, 1e-12)
    );
    Ok(())
}
