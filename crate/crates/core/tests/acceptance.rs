//! One line per acceptance criterion; exits non-zero if any criterion fails.
//! Runs without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use contraction_bounds::selftest::{run_all, SelftestConfig};

fn main() -> ExitCode {
    let results = run_all(&SelftestConfig::default());
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    println!("{}/{} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
