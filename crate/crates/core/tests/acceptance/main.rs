//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p grl-core --test acceptance -- 3 7` runs only criteria 3 and 7.

mod common;
mod c01_oracle;
mod c02_regret;
mod c03_separator;
mod c04_ksa;
mod c05_dogmatic;
mod c06_orseau;
mod c07_bandit;
mod c08_pennies;
mod c09_prediction;
mod c10_identities;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Criterion = (u8, &'static str, Duration, fn() -> Outcome);

const CRITERIA: &[Criterion] = &[
    (1, "planner matches exhaustive oracles", Duration::from_secs(10), c01_oracle::run),
    (2, "heaven/hell regret", Duration::from_secs(1), c02_regret::run),
    (3, "recursive vs iterative values", Duration::from_secs(1), c03_separator::run),
    (4, "entropy- vs information-seeking values", Duration::from_secs(1), c04_ksa::run),
    (5, "dogmatic prior lock-in", Duration::from_secs(30), c05_dogmatic::run),
    (6, "Bayes stops exploring, Thompson keeps exploring", Duration::from_secs(300), c06_orseau::run),
    (7, "bandit arms explored before the optimal arm", Duration::from_secs(60), c07_bandit::run),
    (8, "matching pennies with two Thompson agents", Duration::from_secs(300), c08_pennies::run),
    (9, "sequence prediction errors and regret", Duration::from_secs(120), c09_prediction::run),
    (10, "algebraic identities on random instances", Duration::from_secs(30), c10_identities::run),
];

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for &(id, name, budget, f) in CRITERIA {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::check(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id:>2} {name} [{:.2}s / {}s]{}: {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { " over budget" },
            outcome.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
