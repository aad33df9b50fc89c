//! Ridge-regularized logistic regression on synthetic linearly separable
//! data. The bias term is folded into an appended constant-1 feature, so the
//! model dimension is `d + 1` and the ridge applies to all coordinates; this
//! keeps the strong-convexity constant exactly equal to the ridge
//! coefficient.

use super::{AgentSel, HomogeneityMix};
use crate::error::Error;
use crate::rng::generation_stream;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticSample {
    /// Feature vector with the constant-1 bias entry appended.
    pub x: DVector<f64>,
    /// Label in {0, 1}.
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticProblem {
    /// Model dimension including the bias feature.
    d_model: usize,
    n: usize,
    r: f64,
    alpha: f64,
    datasets: Vec<Vec<LogisticSample>>,
    theta_star: DVector<f64>,
    /// Ground truth `(theta_o, b_o)` used only for data generation.
    ground_truth: DVector<f64>,
    seed: u64,
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(u)) without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

const NEWTON_BUDGET: usize = 200;
const GRAD_TOL: f64 = 1e-9;

/// Generate the synthetic logistic problem: ground truth uniform on
/// `[-1,1]^{d+1}`, features uniform on `[-1,1]^d`, labels by the sign rule,
/// optimum by Newton's method on the full objective.
pub fn make_logistic(
    d: usize,
    n: usize,
    samples_per_agent: usize,
    r: f64,
    mix: HomogeneityMix,
    seed: u64,
) -> Result<LogisticProblem> {
    if r <= 0.0 {
        return Err(Error::Config(format!("ridge coefficient must be positive, got {r}")));
    }
    if n == 0 || samples_per_agent == 0 {
        return Err(Error::Config("need at least one agent and one sample".into()));
    }
    let mut rng = generation_stream(seed);
    let ground_truth = DVector::from_fn(d + 1, |_, _| rng.gen_range(-1.0..=1.0));
    let mut datasets = Vec::with_capacity(n);
    for _ in 0..n {
        let mut samples = Vec::with_capacity(samples_per_agent);
        for _ in 0..samples_per_agent {
            let mut x = DVector::zeros(d + 1);
            for k in 0..d {
                x[k] = rng.gen_range(-1.0..=1.0);
            }
            x[d] = 1.0;
            let y = if x.dot(&ground_truth) >= 0.0 { 1.0 } else { 0.0 };
            samples.push(LogisticSample { x, y });
        }
        datasets.push(samples);
    }
    LogisticProblem::from_datasets(datasets, r, mix, ground_truth, seed)
}

impl LogisticProblem {
    pub fn from_datasets(
        datasets: Vec<Vec<LogisticSample>>,
        r: f64,
        mix: HomogeneityMix,
        ground_truth: DVector<f64>,
        seed: u64,
    ) -> Result<Self> {
        let n = datasets.len();
        if n == 0 || datasets.iter().any(|s| s.is_empty()) {
            return Err(Error::Config("every agent needs at least one sample".into()));
        }
        let d_model = datasets[0][0].x.len();
        let mut p = Self {
            d_model,
            n,
            r,
            alpha: mix.alpha(),
            datasets,
            theta_star: DVector::zeros(d_model),
            ground_truth,
            seed,
        };
        p.theta_star = p.solve_optimum()?;
        Ok(p)
    }

    /// Newton's method on the global objective down to gradient norm 1e-9.
    fn solve_optimum(&self) -> Result<DVector<f64>> {
        let mut theta = DVector::zeros(self.d_model);
        for _ in 0..NEWTON_BUDGET {
            let g = self.exact_gradient(AgentSel::Average, &theta);
            if g.norm() <= GRAD_TOL {
                return Ok(theta);
            }
            let h = self.exact_hessian(AgentSel::Average, &theta);
            let step = h
                .lu()
                .solve(&g)
                .ok_or_else(|| Error::Solver("singular Hessian in Newton step".into()))?;
            theta -= step;
        }
        let g = self.exact_gradient(AgentSel::Average, &theta).norm();
        if g <= GRAD_TOL {
            Ok(theta)
        } else {
            Err(Error::Solver(format!(
                "Newton failed to reach tolerance; final gradient norm {g:.3e}"
            )))
        }
    }

    pub fn dim(&self) -> usize {
        self.d_model
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn ridge(&self) -> f64 {
        self.r
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

    pub fn max_feature_norm_sq(&self) -> f64 {
        self.datasets
            .iter()
            .flatten()
            .map(|s| s.x.norm_squared())
            .fold(0.0, f64::max)
    }

    fn sample_grad(&self, s: &LogisticSample, theta: &DVector<f64>) -> DVector<f64> {
        let u = s.x.dot(theta);
        theta * self.r + &s.x * (sigmoid(u) - s.y)
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
        self.sample_grad(&self.datasets[source][idx], theta)
    }

    /// Mean of the data-dependent gradient part over one dataset.
    fn data_grad(&self, samples: &[LogisticSample], theta: &DVector<f64>) -> DVector<f64> {
        let mut sum = DVector::zeros(self.d_model);
        for s in samples {
            let u = s.x.dot(theta);
            sum += &s.x * (sigmoid(u) - s.y);
        }
        sum / samples.len() as f64
    }

    fn pooled_data_grad(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut sum = DVector::zeros(self.d_model);
        for ds in &self.datasets {
            sum += self.data_grad(ds, theta);
        }
        sum / self.n as f64
    }

    pub fn exact_gradient(&self, sel: AgentSel, theta: &DVector<f64>) -> DVector<f64> {
        let data = match sel {
            AgentSel::Agent(i) => {
                let local = self.data_grad(&self.datasets[i], theta);
                if self.alpha == 0.0 {
                    local
                } else {
                    self.pooled_data_grad(theta) * self.alpha + local * (1.0 - self.alpha)
                }
            }
            AgentSel::Average => self.pooled_data_grad(theta),
        };
        theta * self.r + data
    }

    fn data_hessian(&self, samples: &[LogisticSample], theta: &DVector<f64>) -> DMatrix<f64> {
        let mut sum = DMatrix::zeros(self.d_model, self.d_model);
        for s in samples {
            let u = s.x.dot(theta);
            let w = sigmoid(u) * (1.0 - sigmoid(u));
            sum += (&s.x * s.x.transpose()) * w;
        }
        sum / samples.len() as f64
    }

    pub fn exact_hessian(&self, sel: AgentSel, theta: &DVector<f64>) -> DMatrix<f64> {
        let pooled = |p: &Self| -> DMatrix<f64> {
            let mut sum = DMatrix::zeros(p.d_model, p.d_model);
            for ds in &p.datasets {
                sum += p.data_hessian(ds, theta);
            }
            sum / p.n as f64
        };
        let data = match sel {
            AgentSel::Agent(i) => {
                let local = self.data_hessian(&self.datasets[i], theta);
                if self.alpha == 0.0 {
                    local
                } else {
                    pooled(self) * self.alpha + local * (1.0 - self.alpha)
                }
            }
            AgentSel::Average => pooled(self),
        };
        DMatrix::identity(self.d_model, self.d_model) * self.r + data
    }

    pub fn exact_loss(&self, sel: AgentSel, theta: &DVector<f64>) -> f64 {
        let data_loss = |samples: &[LogisticSample]| -> f64 {
            samples
                .iter()
                .map(|s| {
                    let u = s.x.dot(theta);
                    log1p_exp(u) - s.y * u
                })
                .sum::<f64>()
                / samples.len() as f64
        };
        let pooled = || -> f64 {
            self.datasets.iter().map(|ds| data_loss(ds)).sum::<f64>() / self.n as f64
        };
        let data = match sel {
            AgentSel::Agent(i) => {
                let local = data_loss(&self.datasets[i]);
                if self.alpha == 0.0 {
                    local
                } else {
                    self.alpha * pooled() + (1.0 - self.alpha) * local
                }
            }
            AgentSel::Average => pooled(),
        };
        0.5 * self.r * theta.norm_squared() + data
    }

    pub fn gradient_variance(&self, agent: usize, theta: &DVector<f64>) -> f64 {
        let mean = self.exact_gradient(AgentSel::Agent(agent), theta);
        let second = |samples: &[LogisticSample]| -> f64 {
            samples
                .iter()
                .map(|s| (self.sample_grad(s, theta) - &mean).norm_squared())
                .sum::<f64>()
                / samples.len() as f64
        };
        let local = second(&self.datasets[agent]);
        if self.alpha == 0.0 {
            return local;
        }
        let pooled: f64 =
            self.datasets.iter().map(|ds| second(ds)).sum::<f64>() / self.n as f64;
        self.alpha * pooled + (1.0 - self.alpha) * local
    }
}
