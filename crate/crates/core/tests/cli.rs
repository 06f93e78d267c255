use std::process::{Command, Output};

use spi_core::load_network;
use spi_core::oracle::brute_force_marginal;

fn spi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spi"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("spawn spi")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(text: &str) -> Vec<(String, f64)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let (a, p) = l.split_once('\t').unwrap();
            (a.to_string(), p.parse().unwrap())
        })
        .collect()
}

#[test]
fn query_six_node_marginal() {
    let o = spi(&["query", "nets/six_node.net", "-t", "D"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0].0, "D=f");
    assert!((r.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-11);
    let net = load_network(include_str!("../nets/six_node.net")).unwrap();
    let want = brute_force_marginal(&net, &["D"], &[]).unwrap();
    assert!((r[1].1 - want.value(&[("D", "t")]).unwrap()).abs() < 1e-11);
}

#[test]
fn query_with_evidence_and_stats() {
    let o = spi(&[
        "query",
        "nets/shared_cause.net",
        "-t",
        "D,E",
        "-e",
        "B=t",
        "--stats",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let r = rows(&text);
    let keys: Vec<&str> = r.iter().map(|x| x.0.as_str()).collect();
    assert_eq!(keys, ["D=f,E=f", "D=f,E=t", "D=t,E=f", "D=t,E=t"]);
    let net = load_network(include_str!("../nets/shared_cause.net")).unwrap();
    let want = brute_force_marginal(&net, &["D", "E"], &[("B", "t")]).unwrap();
    for (k, p) in &r {
        let (d, e) = k.split_once(',').unwrap();
        let w = want.value(&[("D", &d[2..]), ("E", &e[2..])]).unwrap();
        assert!((p - w).abs() < 1e-11, "{k}");
    }
    assert!(text.contains("# largest_intermediate_scope "));
    assert!(text.contains("# multiplications "));
}

#[test]
fn query_output_is_deterministic() {
    let args = [
        "query",
        "nets/bn2o.net",
        "-t",
        "D1,D3",
        "-e",
        "F1=t,F2=f,F5=t",
        "--stats",
    ];
    let a = spi(&args);
    let b = spi(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), Some(0));
}

#[test]
fn validate_reports_cycles() {
    let o = spi(&["validate", "nets/cycle.net"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("cycle"));
    let o = spi(&["validate", "nets/six_node.net"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn plan_groups_the_shared_cause() {
    let o = spi(&["plan", "nets/shared_cause.net", "-t", "D,E"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("subquery P3 {B}"));
    // A product node needing only B's partition holding both B terms.
    let lines: Vec<&str> = text.lines().collect();
    let grouped = lines.windows(7).any(|w| {
        w[0].trim_start().starts_with("*  needs {P3}")
            && w.iter().any(|l| l.contains("c_D_B[D:t|B:t]"))
            && w.iter().any(|l| l.contains("c_E_B[E:t|B:t]"))
    });
    assert!(grouped, "{text}");
    assert!(text.contains("predicted largest_intermediate_scope"));
    assert!(text.lines().any(|l| l.starts_with("rewritten (")));
}

#[test]
fn expand_prints_the_table() {
    let o = spi(&["expand", "nets/shared_cause.net", "D"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 8);
    assert_eq!(r[0], ("D=t,A=t,B=t".to_string(), 0.85));
    let o = spi(&["expand", "nets/shared_cause.net", "A"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_is_seeded_and_linear() {
    let a = spi(&["bench", "--noisyor", "8", "--seed", "3", "--stats"]);
    let b = spi(&["bench", "--noisyor", "8", "--seed", "3", "--stats"]);
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# largest_intermediate_scope 2"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 9);
}

#[test]
fn exit_codes() {
    assert_eq!(spi(&[]).status.code(), Some(1));
    assert_eq!(spi(&["query", "nets/six_node.net"]).status.code(), Some(1));
    assert_eq!(
        spi(&["query", "nets/six_node.net", "-t", "D", "-e", "B"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        spi(&["query", "nets/missing.net", "-t", "D"]).status.code(),
        Some(2)
    );
    assert_eq!(
        spi(&["query", "nets/cycle.net", "-t", "X"]).status.code(),
        Some(2)
    );
    assert_eq!(
        spi(&["query", "nets/six_node.net", "-t", "Q"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        spi(&["query", "nets/six_node.net", "-t", "D", "-e", "D=t"])
            .status
            .code(),
        Some(3)
    );
    let o = spi(&["query", "nets/six_node.net", "-t", "A", "-e", "B=maybe"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}
