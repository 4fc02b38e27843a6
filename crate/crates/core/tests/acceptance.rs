//! Full acceptance suite: one line per criterion, fails if any criterion fails.

use gapfield::verify::{collect_evidence, evaluate, VerifyConfig};

#[test]
fn acceptance() {
    let cfg = VerifyConfig::default();
    let evidence = collect_evidence(&cfg).expect("evidence collection failed");
    let results = evaluate(&evidence);
    for r in &results {
        println!("{r}");
    }
    assert_eq!(results.len(), 11, "every criterion must be judged");
    let failed: Vec<u32> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
