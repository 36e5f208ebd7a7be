//! Runs every reproduction suite in criterion order and prints one
//! pass/fail line per criterion. The suites run sequentially inside a single
//! test so their runtime measurements do not compete for cores.

use std::io::Write;

use geolift_cli::repro::{run_suite, SUITES};

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    let stdout = std::io::stdout();
    for name in SUITES {
        let line = match run_suite(name, dir.path()) {
            Ok(report) => {
                if !report.passed() {
                    failures.push(format!("{report}\n{}", report.table()));
                }
                format!("{report}\n")
            }
            Err(err) => {
                failures.push(format!("{name}: {err:#}"));
                format!("criterion {name}: FAIL (error: {err:#})\n")
            }
        };
        // Written straight to the process stdout so the lines show up even
        // when the harness captures test output.
        let mut lock = stdout.lock();
        lock.write_all(line.as_bytes()).unwrap();
        lock.flush().unwrap();
    }
    assert!(
        failures.is_empty(),
        "failed criteria:\n{}",
        failures.join("\n")
    );
}
