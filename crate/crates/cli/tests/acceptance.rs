//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails
//! outside the documented limitations.
//! `ACCEPTANCE_ONLY=4,5` restricts the run.

use std::process::ExitCode;
use std::time::Instant;

use elastobie_cli::acceptance::{known_limitation, run_all, CRITERIA};

fn main() -> ExitCode {
    let selected: Vec<usize> = match std::env::var("ACCEPTANCE_ONLY") {
        Ok(s) => s.split(',').filter_map(|k| k.trim().parse().ok()).collect(),
        Err(_) => CRITERIA.to_vec(),
    };
    let start = Instant::now();
    println!("\nrunning {} acceptance criteria", selected.len());
    let results = match run_all(&selected, |line| println!("{line}")) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL acceptance: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let passed = results.iter().filter(|r| r.pass).count();
    println!(
        "acceptance: {passed} passed; {} failed; finished in {:.1}s\n",
        results.len() - passed,
        start.elapsed().as_secs_f64()
    );
    // Documented limitations stay FAIL in the listing but do not fail the target.
    if results.iter().all(|r| r.pass || known_limitation(r.criterion).is_some()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
