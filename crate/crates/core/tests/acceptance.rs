//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the criteria execute one at a time
//! (the scaling check is timing based) and every verdict line is printed.

use std::io::Write;
use std::process::ExitCode;

use rmaccess::verify::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let mut failed = 0;
    let mut err = std::io::stderr();
    for id in 1..=CRITERIA.len() {
        let line = match run_criterion(id) {
            Ok(report) => {
                failed += usize::from(!report.passed);
                report.to_string()
            }
            Err(e) => {
                failed += 1;
                format!("criterion {id} [{}] FAIL: error: {e}", CRITERIA[id - 1])
            }
        };
        writeln!(err, "{line}").ok();
    }
    writeln!(err, "acceptance: {} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len()).ok();
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
