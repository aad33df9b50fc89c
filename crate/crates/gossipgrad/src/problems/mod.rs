//! Stochastic objective families with per-agent data.
//!
//! Each agent holds an empirical distribution over sample records; local
//! objectives are expectations of a sample loss over that distribution. A
//! homogeneity dial `alpha` mixes the local distribution with the pooled one:
//! draws come from the pool with probability `alpha` and from the agent's own
//! data otherwise, so `alpha = 1` is fully homogeneous and `alpha = 0` fully
//! heterogeneous. Because empirical distributions define the means exactly,
//! gradients, Hessians and the optimum all admit exact oracles.

mod constants;
mod logistic;
mod quadratic;

pub use constants::ProblemConstants;
pub use logistic::{make_logistic, LogisticProblem};
pub use quadratic::{make_quadratic, QuadraticProblem};

use crate::error::Error;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Probability of drawing from the pooled distribution instead of the local
/// one.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HomogeneityMix {
    alpha: f64,
}

impl HomogeneityMix {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha must lie in [0,1], got {alpha}")));
        }
        Ok(Self { alpha })
    }

    /// Fully heterogeneous: every draw is local.
    pub fn heterogeneous() -> Self {
        Self { alpha: 0.0 }
    }

    /// Fully homogeneous: every draw is pooled.
    pub fn homogeneous() -> Self {
        Self { alpha: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Which objective an exact oracle refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentSel {
    /// The local objective of one agent (under its mixed distribution).
    Agent(usize),
    /// The global average objective `f = (1/n) sum_i f_i`.
    Average,
}

/// Oracle bundle shared by both problem families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Problem {
    Quadratic(QuadraticProblem),
    Logistic(LogisticProblem),
}

impl Problem {
    /// Model dimension (for logistic this includes the bias feature).
    pub fn dim(&self) -> usize {
        match self {
            Problem::Quadratic(p) => p.dim(),
            Problem::Logistic(p) => p.dim(),
        }
    }

    pub fn n_agents(&self) -> usize {
        match self {
            Problem::Quadratic(p) => p.n_agents(),
            Problem::Logistic(p) => p.n_agents(),
        }
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        match self {
            Problem::Quadratic(p) => p.theta_star(),
            Problem::Logistic(p) => p.theta_star(),
        }
    }

    /// One stochastic gradient draw from the agent's mixed distribution.
    pub fn sample_gradient(
        &self,
        agent: usize,
        theta: &DVector<f64>,
        rng: &mut ChaCha8Rng,
    ) -> DVector<f64> {
        match self {
            Problem::Quadratic(p) => p.sample_gradient(agent, theta, rng),
            Problem::Logistic(p) => p.sample_gradient(agent, theta, rng),
        }
    }

    /// Exact gradient of the selected objective.
    pub fn exact_gradient(&self, sel: AgentSel, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            Problem::Quadratic(p) => p.exact_gradient(sel, theta),
            Problem::Logistic(p) => p.exact_gradient(sel, theta),
        }
    }

    /// Exact Hessian of the selected objective.
    pub fn exact_hessian(&self, sel: AgentSel, theta: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Problem::Quadratic(p) => p.exact_hessian(sel, theta),
            Problem::Logistic(p) => p.exact_hessian(sel, theta),
        }
    }

    /// Exact objective value of the selected objective.
    pub fn exact_loss(&self, sel: AgentSel, theta: &DVector<f64>) -> f64 {
        match self {
            Problem::Quadratic(p) => p.exact_loss(sel, theta),
            Problem::Logistic(p) => p.exact_loss(sel, theta),
        }
    }

    /// `f(theta_star)`.
    pub fn f_star(&self) -> f64 {
        self.exact_loss(AgentSel::Average, self.theta_star())
    }

    /// Exact per-agent gradient variance `E||grad l - grad f_i||^2` at
    /// `theta`, enumerated over the mixed empirical distribution.
    pub fn gradient_variance(&self, agent: usize, theta: &DVector<f64>) -> f64 {
        match self {
            Problem::Quadratic(p) => p.gradient_variance(agent, theta),
            Problem::Logistic(p) => p.gradient_variance(agent, theta),
        }
    }

    /// Largest per-agent gradient variance at `theta`.
    pub fn max_gradient_variance(&self, theta: &DVector<f64>) -> f64 {
        (0..self.n_agents())
            .map(|i| self.gradient_variance(i, theta))
            .fold(0.0, f64::max)
    }

    /// Max over agents and probes of `||grad^2 f_i - grad^2 f||`. Exact for
    /// the quadratic family (constant Hessians), a lower estimate for
    /// logistic.
    pub fn hessian_heterogeneity(&self, probes: &[DVector<f64>]) -> f64 {
        assert!(!probes.is_empty(), "need at least one probe point");
        let n = self.n_agents();
        let mut worst = 0.0_f64;
        for theta in probes {
            let avg = self.exact_hessian(AgentSel::Average, theta);
            for i in 0..n {
                let diff = self.exact_hessian(AgentSel::Agent(i), theta) - &avg;
                worst = worst.max(spectral_norm(&diff));
            }
            if matches!(self, Problem::Quadratic(_)) {
                break; // Hessians are constant, one probe suffices
            }
        }
        worst
    }

    /// Estimate the constants of the smoothness/heterogeneity assumptions
    /// over a probe set. For logistic, the heterogeneity constants are lower
    /// estimates (the definitions are suprema over all of R^d).
    pub fn estimate_constants(&self, probes: &[DVector<f64>]) -> ProblemConstants {
        assert!(!probes.is_empty(), "need at least one probe point");
        constants::estimate(self, probes)
    }

    /// Default probe set: `theta_star` plus Gaussian perturbations at radii
    /// {0.1, 1, 10}, 32 points total.
    pub fn default_probes(&self, seed: u64) -> Vec<DVector<f64>> {
        let d = self.dim();
        let mut rng = crate::rng::stream(seed, crate::rng::StreamKind::Aux(7), 0, 0);
        let radii = [0.1, 1.0, 10.0];
        let mut probes = vec![self.theta_star().clone()];
        for k in 0..31 {
            let mut dir = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let norm = dir.norm();
            if norm > 0.0 {
                dir /= norm;
            }
            probes.push(self.theta_star() + dir * radii[k % radii.len()]);
        }
        probes
    }

    pub fn family(&self) -> &'static str {
        match self {
            Problem::Quadratic(_) => "quadratic",
            Problem::Logistic(_) => "logistic",
        }
    }

    /// Self-describing serialization; a run is exactly reconstructable from
    /// this text.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("problem json: {e}")))
    }
}

/// Spectral norm via SVD.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{generation_stream, gradient_stream};

    fn quad_small() -> Problem {
        Problem::Quadratic(
            make_quadratic(5, 4, 20, HomogeneityMix::heterogeneous(), 11).unwrap(),
        )
    }

    #[test]
    fn unbiasedness_monte_carlo() {
        // A4: MC mean over 1e5 draws matches exact gradient within 4 SE
        let p = quad_small();
        let d = p.dim();
        let mut gen = generation_stream(2);
        for rep in 0..3 {
            let theta = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut gen));
            for agent in 0..p.n_agents() {
                let exact = p.exact_gradient(AgentSel::Agent(agent), &theta);
                let n_draws = 100_000;
                let mut sum = DVector::zeros(d);
                let mut sum_sq = 0.0;
                let mut rng = gradient_stream(1000 + rep, agent, 0);
                for _ in 0..n_draws {
                    let g = p.sample_gradient(agent, &theta, &mut rng);
                    sum_sq += (&g - &exact).norm_squared();
                    sum += g;
                }
                let mean = sum / n_draws as f64;
                let se = (sum_sq / n_draws as f64 / n_draws as f64).sqrt();
                assert!(
                    (&mean - &exact).norm() <= 4.0 * se + 1e-12,
                    "agent {agent}: err {} se {}",
                    (mean - exact).norm(),
                    se
                );
            }
        }
    }

    #[test]
    fn homogeneous_collapse() {
        let p = Problem::Quadratic(
            make_quadratic(5, 4, 20, HomogeneityMix::homogeneous(), 13).unwrap(),
        );
        let probes = p.default_probes(0);
        assert!(p.hessian_heterogeneity(&probes) < 1e-12);
        let mut gen = generation_stream(4);
        for _ in 0..5 {
            let theta = DVector::from_fn(p.dim(), |_, _| StandardNormal.sample(&mut gen));
            let g0 = p.exact_gradient(AgentSel::Agent(0), &theta);
            for i in 1..p.n_agents() {
                let gi = p.exact_gradient(AgentSel::Agent(i), &theta);
                assert!((&gi - &g0).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn average_gradient_vanishes_at_optimum() {
        for p in [
            quad_small(),
            Problem::Logistic(
                make_logistic(3, 3, 10, 1.0, HomogeneityMix::heterogeneous(), 5).unwrap(),
            ),
        ] {
            let g = p.exact_gradient(AgentSel::Average, p.theta_star());
            assert!(g.norm() <= 1e-8, "{} grad norm {}", p.family(), g.norm());
        }
    }

    #[test]
    fn varsigma_dominates_probe_gaps() {
        let p = quad_small();
        let probes = p.default_probes(3);
        let c = p.estimate_constants(&probes);
        let mut max_gap = 0.0_f64;
        for theta in &probes {
            let avg = p.exact_gradient(AgentSel::Average, theta);
            for i in 0..p.n_agents() {
                let gap = (p.exact_gradient(AgentSel::Agent(i), theta) - &avg).norm();
                max_gap = max_gap.max(gap);
                assert!(c.varsigma >= gap - 1e-12);
            }
        }
        assert!((c.varsigma - max_gap).abs() < 1e-12);
    }

    #[test]
    fn problem_json_round_trip() {
        let p = quad_small();
        let back = Problem::from_json(&p.to_json()).unwrap();
        assert_eq!(p.theta_star(), back.theta_star());
        let theta = DVector::from_element(p.dim(), 0.3);
        for i in 0..p.n_agents() {
            assert_eq!(
                p.exact_gradient(AgentSel::Agent(i), &theta),
                back.exact_gradient(AgentSel::Agent(i), &theta)
            );
        }
    }
}
