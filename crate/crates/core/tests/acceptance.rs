use modelmarket::acceptance::run_all;

/// Criteria whose source values disagree with the re-derived ones.
const KNOWN_RED: [u8; 2] = [5, 7];

#[test]
fn acceptance() {
    let results = run_all().expect("acceptance suite runs");
    assert_eq!(results.len(), 10);
    for r in &results {
        println!("criterion {:>2}: {} ({}, {} checks)", r.criterion, r.status(), r.summary, r.checks);
        for f in &r.failures {
            println!("    {f}");
        }
    }
    for r in &results {
        if KNOWN_RED.contains(&r.criterion) {
            assert!(r.passed || r.known_red, "criterion {} has unexpected failures", r.criterion);
        } else {
            assert!(r.passed, "criterion {} failed: {:?}", r.criterion, r.failures);
        }
    }
}
