//! Empirical one-step inequality suites: seed-averaged trajectories are
//! checked against the consensus-error recursion and the TD contraction
//! recursion, each with 10% slack. These back the `check` subcommand and the
//! acceptance gate.

use crate::algorithms::{run, AlgorithmKind, AlgorithmSpec, NetworkState, StepSchedule};
use crate::metrics::average_records;
use crate::problems::{make_quadratic, HomogeneityMix, Problem};
use crate::rng::{stream, StreamKind};
use crate::td::{build_gridworld, lemma_compliant_schedule, run_td};
use crate::topology::build_ring;
use crate::Result;
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Required fraction of iterations satisfying the inequality.
pub const REQUIRED_FRACTION: f64 = 0.99;
/// Multiplicative slack applied to the right-hand side.
pub const SLACK: f64 = 1.1;

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub name: String,
    /// Fraction of checked iterations at which the inequality held.
    pub fraction_ok: f64,
    pub pass: bool,
    pub details: String,
}

/// Consensus-error recursion on the synthetic quadratic benchmark:
/// seed-averaged `E||Theta_o^{t+1}||_F^2` against
/// `(1 - rho/2) E||Theta_o^t||_F^2 + 2n (varsigma^2 + sigma^2) gamma^2 / rho`
/// with a constant step `gamma = rho / (4L)`.
pub fn consensus_recursion_check(seed_count: usize, horizon: usize) -> Result<LemmaReport> {
    let n = 20;
    let problem = Problem::Quadratic(make_quadratic(
        10,
        n,
        500,
        HomogeneityMix::heterogeneous(),
        1,
    )?);
    let w = build_ring(n, 0.3)?;
    let rho = w.rho();
    let probes = problem.default_probes(1);
    let constants = problem.estimate_constants(&probes);
    let gamma = rho / (4.0 * constants.l);
    // absolute noise bound: largest per-agent gradient variance over probes
    let sigma_sq = probes
        .iter()
        .map(|theta| problem.max_gradient_variance(theta))
        .fold(0.0, f64::max);

    let mut rng = stream(1, StreamKind::Aux(11), 0, 0);
    let mut u = DVector::from_fn(10, |_, _| StandardNormal.sample(&mut rng));
    u /= u.norm();
    let theta0 = problem.theta_star() + u * 10.0;
    let init = NetworkState::from_rows(&vec![theta0; n]);
    let spec = AlgorithmSpec {
        kind: AlgorithmKind::Dsgd,
        batch_size: 1,
        schedule: StepSchedule::Constant { gamma },
    };
    let records: Result<Vec<_>> = (0..seed_count as u64)
        .into_par_iter()
        .map(|seed| {
            run(&spec, &problem, &w, horizon, init.clone(), 1000 + seed, 1).map(|o| o.record)
        })
        .collect();
    let avg = average_records(&records?)?;

    let drive = 2.0 * n as f64 * (constants.varsigma.powi(2) + sigma_sq) * gamma * gamma / rho;
    let mut ok = 0usize;
    let total = avg.len() - 1;
    for t in 0..total {
        let lhs = avg.consensus_err[t + 1];
        let rhs = (1.0 - rho / 2.0) * avg.consensus_err[t] + drive;
        if lhs <= SLACK * rhs {
            ok += 1;
        }
    }
    let fraction = ok as f64 / total as f64;
    Ok(LemmaReport {
        name: "consensus_recursion".into(),
        fraction_ok: fraction,
        pass: fraction >= REQUIRED_FRACTION,
        details: format!(
            "n={n} rho={rho:.4} gamma={gamma:.5} varsigma={:.3} sigma_sq={sigma_sq:.3} seeds={seed_count} T={horizon}",
            constants.varsigma
        ),
    })
}

/// TD averaged-iterate contraction on GridWorld: seed-averaged
/// `E||theta_bar^{t+1} - theta*||^2` against
/// `(1 - alpha lambda_min) E||theta_bar^t - theta*||^2
///  + alpha^2 (sigma^2/n + 4 beta^2 ||theta*||^2)` with `sigma^2 = 2 r_max^2`.
pub fn td_contraction_check(seed_count: usize, horizon: usize) -> Result<LemmaReport> {
    let n = 10;
    let model = build_gridworld(n, 3, false);
    let w = build_ring(n, 0.8)?;
    let fp = model.td_fixed_point()?;
    let schedule = lemma_compliant_schedule(&fp);

    let records: Result<Vec<_>> = (0..seed_count as u64)
        .into_par_iter()
        .map(|seed| run_td(&model, &w, schedule, horizon, 2000 + seed, 1).map(|o| o.record))
        .collect();
    let avg = average_records(&records?)?;

    let sigma_sq = 2.0 * fp.r_max * fp.r_max;
    let noise = sigma_sq / n as f64 + 4.0 * fp.beta * fp.beta * fp.theta_star.norm_squared();
    let mut ok = 0usize;
    let total = avg.len() - 1;
    for t in 0..total {
        let alpha = schedule.gamma(t);
        let lhs = avg.avg_gap[t + 1];
        let rhs = (1.0 - alpha * fp.lambda_min) * avg.avg_gap[t] + alpha * alpha * noise;
        if lhs <= SLACK * rhs {
            ok += 1;
        }
    }
    let fraction = ok as f64 / total as f64;
    Ok(LemmaReport {
        name: "td_contraction".into(),
        fraction_ok: fraction,
        pass: fraction >= REQUIRED_FRACTION,
        details: format!(
            "n={n} lambda_min={:.4} beta={:.2} schedule={} seeds={seed_count} T={horizon}",
            fp.lambda_min,
            fp.beta,
            schedule.describe()
        ),
    })
}

/// The full suite at desk scale.
pub fn run_all_checks() -> Result<Vec<LemmaReport>> {
    Ok(vec![
        consensus_recursion_check(100, 1500)?,
        td_contraction_check(200, 2000)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consensus_recursion_small_scale() {
        let report = consensus_recursion_check(10, 300).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn td_contraction_small_scale() {
        let report = td_contraction_check(20, 300).unwrap();
        assert!(report.pass, "{report:?}");
    }
}
