//! Estimation of the smoothness and heterogeneity constants the convergence
//! bounds are stated in. For the quadratic family everything is exact in the
//! dataset means; for logistic the heterogeneity constants are probe-based
//! lower estimates (the defining conditions are suprema over all parameters).

use super::{spectral_norm, AgentSel, Problem};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Smoothness / heterogeneity constants of a problem instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Gradient Lipschitz constant.
    pub l: f64,
    /// Strong convexity of the average objective.
    pub mu: f64,
    /// Gradient heterogeneity bound (max over probes).
    pub varsigma: f64,
    /// Hessian heterogeneity bound.
    pub varsigma_h: f64,
    /// Hessian Lipschitz constant (0 exactly for quadratics).
    pub l_h: f64,
}

pub(super) fn estimate(p: &Problem, probes: &[DVector<f64>]) -> ProblemConstants {
    let n = p.n_agents();
    let varsigma = if n == 1 {
        0.0
    } else {
        let mut worst = 0.0_f64;
        for theta in probes {
            let avg = p.exact_gradient(AgentSel::Average, theta);
            for i in 0..n {
                worst = worst.max((p.exact_gradient(AgentSel::Agent(i), theta) - &avg).norm());
            }
        }
        worst
    };
    let varsigma_h = if n == 1 { 0.0 } else { p.hessian_heterogeneity(probes) };

    match p {
        Problem::Quadratic(q) => {
            let l = (0..n)
                .map(|i| spectral_norm(&q.exact_hessian(AgentSel::Agent(i), &probes[0])))
                .fold(0.0, f64::max);
            let mu = q
                .exact_hessian(AgentSel::Average, &probes[0])
                .symmetric_eigen()
                .eigenvalues
                .min();
            ProblemConstants {
                l,
                mu,
                varsigma,
                varsigma_h,
                l_h: 0.0,
            }
        }
        Problem::Logistic(lp) => {
            let l = lp.ridge() + lp.max_feature_norm_sq() / 4.0;
            let mu = lp.ridge();
            // lower estimate over probe pairs
            let mut l_h = 0.0_f64;
            for a in 0..probes.len() {
                for b in (a + 1)..probes.len() {
                    let dist = (&probes[a] - &probes[b]).norm();
                    if dist < 1e-12 {
                        continue;
                    }
                    for i in 0..n {
                        let diff = lp.exact_hessian(AgentSel::Agent(i), &probes[a])
                            - lp.exact_hessian(AgentSel::Agent(i), &probes[b]);
                        l_h = l_h.max(spectral_norm(&diff) / dist);
                    }
                }
            }
            ProblemConstants {
                l,
                mu,
                varsigma,
                varsigma_h,
                l_h,
            }
        }
    }
}
