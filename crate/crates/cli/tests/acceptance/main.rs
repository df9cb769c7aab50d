//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod cli;
mod conditionals;
mod exactness;
mod geweke;
mod recovery;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// One sub-check of a criterion.
pub struct Check {
    pub label: String,
    pub pass: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, pass: bool) -> Self {
        Self {
            label: label.into(),
            pass,
        }
    }
}

struct Criterion {
    id: u8,
    title: &'static str,
    budget: Duration,
}

fn report(c: &Criterion, run: impl FnOnce() -> Vec<Check>) -> bool {
    let start = Instant::now();
    let mut checks = match catch_unwind(AssertUnwindSafe(run)) {
        Ok(checks) => checks,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            vec![Check::new(format!("panicked: {msg}"), false)]
        }
    };
    let elapsed = start.elapsed();
    checks.push(Check::new(
        format!("runtime {:.1} s < {} s", elapsed.as_secs_f64(), c.budget.as_secs()),
        elapsed < c.budget,
    ));
    let pass = checks.iter().all(|k| k.pass);
    let detail: Vec<String> = checks
        .iter()
        .map(|k| format!("{}{}", if k.pass { "" } else { "FAILED " }, k.label))
        .collect();
    println!(
        "criterion {} {} [{}]: {}",
        c.id,
        if pass { "PASS" } else { "FAIL" },
        c.title,
        detail.join("; ")
    );
    pass
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = |id, title, budget| Criterion { id, title, budget };
    let mut results = Vec::new();

    results.push(report(&criteria(1, "distribution exactness", secs(1)), exactness::distributions));
    results.push(report(&criteria(2, "conjugate weight update", secs(10)), exactness::weights));
    results.push(report(&criteria(3, "conditional oracles", secs(120)), conditionals::criterion));
    results.push(report(&criteria(4, "joint-distribution test", secs(300)), geweke::criterion));

    let mut headline = None;
    results.push(report(&criteria(5, "synthetic recovery", secs(1800)), || {
        let (checks, fit) = recovery::headline();
        headline = Some(fit);
        checks
    }));
    results.push(report(&criteria(6, "zero-inflated recovery", secs(1800)), recovery::zero_inflated));
    results.push(report(&criteria(7, "label switching", secs(60)), || match &headline {
        Some(fit) => recovery::label_switching(fit),
        None => vec![Check::new("headline fit unavailable", false)],
    }));
    results.push(report(&criteria(8, "determinism", secs(300)), cli::determinism));
    results.push(report(&criteria(9, "command-line matrix", secs(600)), cli::matrix));

    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
