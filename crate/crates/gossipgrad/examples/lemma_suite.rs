//! Empirical inequality checks behind the convergence analysis: the
//! consensus-error recursion for DSGD with a small constant step, and the
//! one-step contraction for decentralized TD(0). Same suite as
//! `gossipgrad check`.

use gossipgrad::harness::run_all_checks;

fn main() -> gossipgrad::Result<()> {
    for report in run_all_checks()? {
        println!(
            "{:<22} {}  ({:.2}% of iterations; {})",
            report.name,
            if report.pass { "PASS" } else { "FAIL" },
            100.0 * report.fraction_ok,
            report.details
        );
    }
    Ok(())
}
