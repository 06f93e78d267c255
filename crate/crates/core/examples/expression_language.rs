//! Parsing, printing and checking local expressions.

use spi_core::expr::validate;
use spi_core::{parse, print, Bindings, Variable};

fn main() -> spi_core::Result<()> {
    let text = "(+ (- 1[D:t] (* (- 1[D:t] c_D_A[D:t|A:t]) (- 1[D:t] c_D_B[D:t|B:t]))) \
                (* (- 1[D:f] c_D_A[D:f|A:t]) (- 1[D:f] c_D_B[D:f|B:t])))";
    let e = parse(text)?;
    println!("{}", print(&e));
    println!(
        "nodes {} distinct {} variables {:?}",
        e.size(),
        e.dag_size(),
        e.variables()
    );

    let vars: Vec<Variable> = ["A", "B", "D"]
        .iter()
        .map(|v| Variable::binary(v))
        .collect();
    let mut bindings = Bindings::new();
    bindings.insert("c_D_A", vec![0.7]);
    for d in validate(&e, vars.as_slice(), &bindings) {
        println!("diagnostic: {d}");
    }

    match parse("(* p[X:t] ") {
        Err(err) => println!("rejected: {err}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
