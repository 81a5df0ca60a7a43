//! Runs the full acceptance suite and prints one line per criterion. Built
//! without the libtest harness so the lines show up in `cargo test` output.

use std::process::ExitCode;
use std::time::Instant;

use wquant::harness::verify::verify;

fn main() -> ExitCode {
    let start = Instant::now();
    let report = verify(8);
    for c in &report.criteria {
        println!("{}", c.line());
    }
    let failed: Vec<u8> = report.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    println!("acceptance: {} of 10 criteria passed in {:.1}s", 10 - failed.len(), start.elapsed().as_secs_f64());
    if report.criteria.len() == 10 && failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
