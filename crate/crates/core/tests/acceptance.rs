//! The full acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion failed. Runs without the libtest harness
//! so the lines are never captured.

use sphere_qm::acceptance::{run_criterion, Scale, DEFAULT_SEED};

fn main() {
    let mut failed = Vec::new();
    for id in 1..=10 {
        let report = run_criterion(id, Scale::Full, DEFAULT_SEED);
        println!("{report}");
        if !report.passed {
            failed.push(report.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
