//! The ten acceptance criteria at their stated tolerances.
//!
//! Each criterion prints one verdict line on stderr, outside the test
//! harness's output capture, so `cargo test` logs show every row.

use std::io::Write;

use evoq_cli::suite::{run_acceptance, CRITERIA};

#[test]
fn acceptance_suite() {
    let report = run_acceptance();
    let mut err = std::io::stderr().lock();
    for row in &report.rows {
        writeln!(
            err,
            "acceptance criterion {:>2} [{}] {}",
            row.id,
            if row.pass { "pass" } else { "FAIL" },
            row.name
        )
        .unwrap();
    }
    assert_eq!(report.rows.len(), CRITERIA.len());
    let failed: Vec<String> = report
        .rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} ({}): {}", r.id, r.name, r.measured))
        .collect();
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
