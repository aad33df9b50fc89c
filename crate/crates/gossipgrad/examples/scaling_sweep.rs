//! Network-size scaling of the homogeneous transient time: runs the shipped
//! `fig2_scaling` experiment (rings n = 10..40) at a reduced seed count and
//! prints the least-squares fit of the transient against sqrt(n)/rho.
//!
//! Artifacts (per-seed CSVs, summary.json, manifest.json) land in a temp
//! directory. Run with `--release`; takes on the order of half a minute.

use gossipgrad::harness::{resolve, run_experiment, RunOptions};

fn main() -> gossipgrad::Result<()> {
    let cfg = resolve("fig2_scaling")?;
    let out = std::env::temp_dir().join("gossipgrad_scaling_sweep");
    let opts = RunOptions {
        out_dir: out.clone(),
        seeds: Some(5),
        ..Default::default()
    };
    let summary = run_experiment(&cfg, &opts)?;

    for s in &summary.settings {
        if s.algorithm == "dsgd" {
            match s.transient_iteration {
                Some(t) => println!("n={:<3} rho={:.4}  transient = {t}", s.n, s.rho),
                None => println!("n={:<3} rho={:.4}  transient not reached", s.n, s.rho),
            }
        }
    }
    if let Some(sc) = &summary.scaling {
        println!("\nfit of transient vs sqrt(n)/rho over {} points:", sc.points.len());
        println!("  slope {:.2}, intercept {:.0}, r^2 = {:.3}", sc.fit.slope, sc.fit.intercept, sc.fit.r2);
    } else {
        println!("\nno scaling fit: some sweep point never settled");
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
