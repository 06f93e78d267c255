//! Default and explicit partition trees.

use spi_core::partition::{validate_partition_tree, PartitionTree};
use spi_core::{build_default_partition_tree, load_network};

const NET: &str = include_str!("../nets/six_node.net");

fn main() -> spi_core::Result<()> {
    let net = load_network(NET)?;
    let tree = build_default_partition_tree(&net);
    println!("default: {tree}");
    for p in tree.partitions() {
        println!("  {} {:?} children {}", p.label, p.nodes, p.children.len());
    }

    let text = format!("{NET}\npartition {{ (root: D (left: B,C (A)) (right: F (E))) }}");
    let custom = load_network(&text)?;
    let spec = custom.partition_spec().expect("partition block");
    let tree = PartitionTree::from_spec(&custom, spec)?;
    println!("explicit: {tree}");
    println!("diagnostics: {:?}", validate_partition_tree(&custom, &tree));

    let bad = format!("{NET}\npartition {{ (root: D,A (B,C) (F (E))) }}");
    match load_network(&bad) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    Ok(())
}
