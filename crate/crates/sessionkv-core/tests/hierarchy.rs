//! Full hierarchy battery at desk-scale defaults.

use sessionkv_core::refinement::{check_hierarchy, Domains};

#[test]
fn all_thirteen_edges_hold_on_the_battery() {
    let report = check_hierarchy(&Domains::default(), 20).expect("exploration fits the cap");
    assert_eq!(report.len(), 13 * 4);
    let mut failures = Vec::new();
    for line in &report {
        println!(
            "edge={}->{} app={} verdict={} steps={}",
            line.edge.lower.name(),
            line.edge.upper.name(),
            line.app,
            if line.verdict.holds { "holds" } else { "violation" },
            line.verdict.bound
        );
        if !line.verdict.holds {
            let ce = line.verdict.counterexample.as_ref().unwrap();
            let hist: Vec<_> = ce.ext.iter().map(|l| l.render()).collect();
            failures.push(format!(
                "{}->{} under {}: {:?}",
                line.edge.lower.name(),
                line.edge.upper.name(),
                line.app,
                hist
            ));
        }
    }
    assert!(failures.is_empty(), "failing edges:\n{}", failures.join("\n"));
}
