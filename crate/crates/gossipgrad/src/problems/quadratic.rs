//! Stochastic quadratic problem family.
//!
//! Sample loss `l(theta; (A~, b~)) = (1/2) theta' (A~ + A~') theta + theta' b~`
//! with the symmetrized form used throughout, so stochastic gradients are
//! `(A~ + A~') theta + b~` and every Hessian is symmetric. Agent data are
//! empirical distributions of i.i.d. draws. Heterogeneity comes from the
//! mean Hessians: each agent curves a distinct pair of diagonal coordinates,
//! and a common nonzero linear term pushes the global optimum away from the
//! origin, so the agents' exact gradients disagree at the optimum while the
//! pooled sampling distribution stays nearly the same across agents.

use super::{AgentSel, HomogeneityMix};
use crate::error::Error;
use crate::rng::generation_stream;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// One raw sample record `(A~, b~)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticSample {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QuadraticSample {
    /// Gradient `(A~ + A~') theta + b~`.
    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.a * theta + self.a.transpose() * theta + &self.b
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticProblem {
    d: usize,
    n: usize,
    alpha: f64,
    /// Per-agent raw datasets (equal sizes).
    datasets: Vec<Vec<QuadraticSample>>,
    /// Per-agent symmetrized mean Hessians `A_i + A_i'` (empirical means).
    hessians: Vec<DMatrix<f64>>,
    /// Per-agent mean linear terms `b_i`.
    b_means: Vec<DVector<f64>>,
    /// Pooled (global) mean Hessian and linear term.
    pooled_hessian: DMatrix<f64>,
    pooled_b: DVector<f64>,
    theta_star: DVector<f64>,
    seed: u64,
}

/// Lexicographic 2-combinations of `{0, .., d-1}`.
fn pair_combinations(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            out.push((i, j));
        }
    }
    out
}

const PD_RETRY_BUDGET: u64 = 50;

/// Sample noise (standard deviation) of the `A~` entries around the agent's
/// mean matrix. Kept well below the mean curvature so the gradient
/// heterogeneity across agents dominates the per-sample gradient noise.
const A_NOISE: f64 = 0.05;

/// Sample noise of the two agent-specific diagonal entries around their
/// unit mean.
const A_DIAG_NOISE: f64 = 0.05;

/// Common mean of every `b~` entry. Nonzero so the global optimum sits away
/// from the origin, where the agents' mean Hessians disagree on the gradient.
const B_PULL: f64 = 3.6;

/// Sample noise of the `b~` entries around `B_PULL`.
const B_NOISE: f64 = 0.5;

/// Generate the synthetic quadratic problem. Each agent `i` gets
/// `samples_per_agent` pairs `(A~, b~)`: `A~` entries are `N(0, A_NOISE^2)`
/// except the two diagonal entries indexed by the agent's 2-combination,
/// which are `N(1, A_DIAG_NOISE^2)`; `b~` entries are `N(B_PULL, B_NOISE^2)`. The
/// nonzero mean on
/// the diagonal entries is what makes the sum of mean Hessians positive
/// definite; with all means zero the closed-form optimum would not exist.
/// If the positive-definiteness check fails, the generator retries with the
/// next seed.
pub fn make_quadratic(
    d: usize,
    n: usize,
    samples_per_agent: usize,
    mix: HomogeneityMix,
    seed: u64,
) -> Result<QuadraticProblem> {
    if d < 3 {
        return Err(Error::Config(format!("quadratic family needs d >= 3, got {d}")));
    }
    let combos = pair_combinations(d);
    if combos.len() < n {
        return Err(Error::Config(format!(
            "need C(d,2) >= n distinct coordinate pairs: C({d},2) = {} < {n}",
            combos.len()
        )));
    }
    if samples_per_agent == 0 {
        return Err(Error::Config("samples_per_agent must be >= 1".into()));
    }

    for attempt in 0..PD_RETRY_BUDGET {
        let try_seed = seed + attempt;
        let mut rng = generation_stream(try_seed);
        let mut datasets = Vec::with_capacity(n);
        for agent in 0..n {
            let (p, q) = combos[agent];
            let mut samples = Vec::with_capacity(samples_per_agent);
            for _ in 0..samples_per_agent {
                let mut a = DMatrix::from_fn(d, d, |_, _| -> f64 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    A_NOISE * z
                });
                for &k in &[p, q] {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    a[(k, k)] = 1.0 + A_DIAG_NOISE * z;
                }
                let b = DVector::from_fn(d, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    B_PULL + B_NOISE * z
                });
                samples.push(QuadraticSample { a, b });
            }
            datasets.push(samples);
        }
        match QuadraticProblem::from_datasets(datasets, mix, try_seed) {
            Ok(p) => return Ok(p),
            Err(Error::Generation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "sum of mean Hessians not positive definite after {PD_RETRY_BUDGET} seeds from {seed}"
    )))
}

impl QuadraticProblem {
    /// Build from explicit per-agent datasets. The per-agent means define
    /// `(A_i, b_i)` exactly.
    pub fn from_datasets(
        datasets: Vec<Vec<QuadraticSample>>,
        mix: HomogeneityMix,
        seed: u64,
    ) -> Result<Self> {
        let n = datasets.len();
        if n == 0 || datasets.iter().any(|s| s.is_empty()) {
            return Err(Error::Config("every agent needs at least one sample".into()));
        }
        let d = datasets[0][0].b.len();
        let m = datasets[0].len();
        if datasets.iter().any(|s| s.len() != m) {
            return Err(Error::Config("agent datasets must have equal sizes".into()));
        }

        let mut hessians = Vec::with_capacity(n);
        let mut b_means = Vec::with_capacity(n);
        for samples in &datasets {
            let mut a_sum = DMatrix::zeros(d, d);
            let mut b_sum = DVector::zeros(d);
            for s in samples {
                a_sum += &s.a;
                b_sum += &s.b;
            }
            let a_mean = a_sum / samples.len() as f64;
            hessians.push(&a_mean + a_mean.transpose());
            b_means.push(b_sum / samples.len() as f64);
        }
        let pooled_hessian = hessians.iter().sum::<DMatrix<f64>>() / n as f64;
        let pooled_b = b_means.iter().sum::<DVector<f64>>() / n as f64;

        let sum_h = pooled_hessian.clone() * n as f64;
        let eig = sum_h.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        if lambda_min <= 0.0 {
            return Err(Error::Generation(format!(
                "sum of mean Hessians has lambda_min = {lambda_min:.3e}"
            )));
        }
        let sum_b = pooled_b.clone() * n as f64;
        let theta_star = sum_h
            .clone()
            .lu()
            .solve(&(-&sum_b))
            .ok_or_else(|| Error::Numerical("singular Hessian sum".into()))?;
        let residual = (&sum_h * &theta_star + sum_b).norm();
        if residual > 1e-8 * n as f64 {
            return Err(Error::Numerical(format!(
                "first-order condition residual {residual:.3e}"
            )));
        }

        Ok(Self {
            d,
            n,
            alpha: mix.alpha(),
            datasets,
            hessians,
            b_means,
            pooled_hessian,
            pooled_b,
            theta_star,
            seed,
        })
    }

    /// Deterministic problem from explicit mean matrices: one sample per
    /// agent, so sampled gradients equal exact gradients.
    pub fn deterministic(a: Vec<DMatrix<f64>>, b: Vec<DVector<f64>>) -> Result<Self> {
        let datasets = a
            .into_iter()
            .zip(b)
            .map(|(a, b)| vec![QuadraticSample { a, b }])
            .collect();
        Self::from_datasets(datasets, HomogeneityMix::heterogeneous(), 0)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn samples_per_agent(&self) -> usize {
        self.datasets[0].len()
    }

    /// Mixed mean Hessian of agent `i`:
    /// `alpha * pooled + (1 - alpha) * local`.
    fn mixed_hessian(&self, agent: usize) -> DMatrix<f64> {
        &self.pooled_hessian * self.alpha + &self.hessians[agent] * (1.0 - self.alpha)
    }

    fn mixed_b(&self, agent: usize) -> DVector<f64> {
        &self.pooled_b * self.alpha + &self.b_means[agent] * (1.0 - self.alpha)
    }

    pub fn sample_gradient(
        &self,
        agent: usize,
        theta: &DVector<f64>,
        rng: &mut ChaCha8Rng,
    ) -> DVector<f64> {
        assert!(agent < self.n, "agent index out of range");
        let pooled = self.alpha > 0.0 && rng.gen::<f64>() < self.alpha;
        let source = if pooled {
            rng.gen_range(0..self.n)
        } else {
            agent
        };
        let m = self.datasets[source].len();
        let idx = rng.gen_range(0..m);
        self.datasets[source][idx].gradient(theta)
    }

    pub fn exact_gradient(&self, sel: AgentSel, theta: &DVector<f64>) -> DVector<f64> {
        match sel {
            AgentSel::Agent(i) => self.mixed_hessian(i) * theta + self.mixed_b(i),
            AgentSel::Average => &self.pooled_hessian * theta + &self.pooled_b,
        }
    }

    pub fn exact_hessian(&self, sel: AgentSel, _theta: &DVector<f64>) -> DMatrix<f64> {
        match sel {
            AgentSel::Agent(i) => self.mixed_hessian(i),
            AgentSel::Average => self.pooled_hessian.clone(),
        }
    }

    pub fn exact_loss(&self, sel: AgentSel, theta: &DVector<f64>) -> f64 {
        let (h, b) = match sel {
            AgentSel::Agent(i) => (self.mixed_hessian(i), self.mixed_b(i)),
            AgentSel::Average => (self.pooled_hessian.clone(), self.pooled_b.clone()),
        };
        0.5 * theta.dot(&(&h * theta)) + theta.dot(&b)
    }

    /// Exact variance of the stochastic gradient around the mixed mean,
    /// enumerated over the (mixture of) empirical distributions.
    pub fn gradient_variance(&self, agent: usize, theta: &DVector<f64>) -> f64 {
        let mean = self.exact_gradient(AgentSel::Agent(agent), theta);
        let second = |samples: &[QuadraticSample]| -> f64 {
            samples
                .iter()
                .map(|s| (s.gradient(theta) - &mean).norm_squared())
                .sum::<f64>()
                / samples.len() as f64
        };
        let local = second(&self.datasets[agent]);
        if self.alpha == 0.0 {
            return local;
        }
        let pooled: f64 = self
            .datasets
            .iter()
            .map(|ds| second(ds))
            .sum::<f64>()
            / self.n as f64;
        self.alpha * pooled + (1.0 - self.alpha) * local
    }
}
