//! Multi-agent TD(0) policy evaluation on a finite MDP.
//!
//! All agents observe one shared transition tuple per iteration, drawn
//! i.i.d. from the stationary distribution of the policy-induced chain
//! (no trajectory rollout). Each agent holds its own reward table; the
//! evaluation target is the value of the network-average reward. TD is a
//! stochastic fixed-point iteration, not gradient descent — note the plus
//! sign in the update.

use crate::algorithms::{NetworkState, StepSchedule, DIVERGENCE_NORM};
use crate::error::Error;
use crate::metrics::{RecordMeta, TrajectoryRecord};
use crate::rng::environment_stream;
use crate::topology::MixingMatrix;
use crate::Result;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Finite MDP with per-agent reward tables, a fixed policy and linear
/// features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpModel {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transition[a]` is the |S|x|S| transition matrix of action `a`.
    pub transition: Vec<DMatrix<f64>>,
    /// `rewards[i]` is agent `i`'s |S|x|A| reward table.
    pub rewards: Vec<DMatrix<f64>>,
    /// Discount factor in (0, 1).
    pub discount: f64,
    /// `policy[(s, a)]` = probability of action `a` in state `s`.
    pub policy: DMatrix<f64>,
    /// Row `s` is the feature vector of state `s`; rows have norm <= 1.
    pub features: DMatrix<f64>,
}

/// Exact solution data of the projected Bellman equation `A theta = b_bar`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TdFixedPoint {
    /// `E[phi(S) (phi(S) - gamma phi(S+))']` under stationary sampling.
    pub a_mat: DMatrix<f64>,
    /// `E[mean-agent reward(S, A) * phi(S)]`.
    pub b_bar: DVector<f64>,
    pub theta_star: DVector<f64>,
    /// Smallest eigenvalue of `(A + A')/2`; positive by assumption.
    pub lambda_min: f64,
    /// `1 + gamma`, a bound on `||A(zeta)||` over all outcome tuples.
    pub beta: f64,
    /// Largest absolute reward entry across agents.
    pub r_max: f64,
    /// Stationary distribution of the induced chain.
    pub mu: DVector<f64>,
}

/// One shared observation tuple `(S, A, S+)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TdSample {
    pub s: usize,
    pub a: usize,
    pub s_next: usize,
}

const GRID: usize = 4;

/// Build the 4x4 GridWorld evaluation MDP: 16 states, 4 deterministic moves
/// (off-grid moves stay put), discount 0.9, uniform random policy, quadrant
/// block indicator features (d = 4), and per-agent rewards drawn i.i.d. from
/// N(1, 10). With `shared_rewards` every agent gets the same table (the
/// single-table variant).
pub fn build_gridworld(n_agents: usize, seed: u64, shared_rewards: bool) -> MdpModel {
    let n_states = GRID * GRID;
    let n_actions = 4;
    // actions: 0 left, 1 right, 2 up, 3 down
    let mut transition = vec![DMatrix::zeros(n_states, n_states); n_actions];
    for s in 0..n_states {
        let (r, c) = (s / GRID, s % GRID);
        let moves = [
            (r, c.wrapping_sub(1)),
            (r, c + 1),
            (r.wrapping_sub(1), c),
            (r + 1, c),
        ];
        for (a, &(nr, nc)) in moves.iter().enumerate() {
            let next = if nr < GRID && nc < GRID { nr * GRID + nc } else { s };
            transition[a][(s, next)] = 1.0;
        }
    }

    // quadrant-block indicator: states are numbered row-major, so block
    // index is 2*(row/2) + col/2 (states {0,1,4,5} share block 0, etc.)
    let features = DMatrix::from_fn(n_states, 4, |s, k| {
        let block = 2 * (s / GRID / 2) + (s % GRID) / 2;
        if block == k { 1.0 } else { 0.0 }
    });

    let policy = DMatrix::from_element(n_states, n_actions, 1.0 / n_actions as f64);

    let mut rng = crate::rng::generation_stream(seed);
    let law = Normal::new(1.0, 10.0_f64.sqrt()).unwrap();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        DMatrix::from_fn(n_states, n_actions, |_, _| law.sample(rng))
    };
    let rewards = if shared_rewards {
        let table = draw(&mut rng);
        vec![table; n_agents]
    } else {
        (0..n_agents).map(|_| draw(&mut rng)).collect()
    };

    MdpModel {
        n_states,
        n_actions,
        transition,
        rewards,
        discount: 0.9,
        policy,
        features,
    }
}

impl MdpModel {
    pub fn n_agents(&self) -> usize {
        self.rewards.len()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn phi(&self, s: usize) -> DVector<f64> {
        self.features.row(s).transpose()
    }

    pub fn r_max(&self) -> f64 {
        self.rewards
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    /// Network-average reward for `(s, a)`.
    pub fn mean_reward(&self, s: usize, a: usize) -> f64 {
        self.rewards.iter().map(|t| t[(s, a)]).sum::<f64>() / self.n_agents() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Validation(format!(
                "discount must lie in [0,1), got {}",
                self.discount
            )));
        }
        for (a, p) in self.transition.iter().enumerate() {
            for s in 0..self.n_states {
                let row = p.row(s);
                if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "transition[{a}] row {s} is not a distribution"
                    )));
                }
            }
        }
        for s in 0..self.n_states {
            let row = self.policy.row(s);
            if row.iter().any(|&v| v < 0.0) || (row.sum() - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("policy row {s} is not a distribution")));
            }
            if self.features.row(s).norm() > 1.0 + 1e-12 {
                return Err(Error::Validation(format!("feature norm of state {s} exceeds 1")));
            }
        }
        Ok(())
    }

    /// Policy-induced state transition matrix `P_pi`.
    pub fn induced_chain(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n_states, self.n_states);
        for a in 0..self.n_actions {
            for s in 0..self.n_states {
                let w = self.policy[(s, a)];
                for s2 in 0..self.n_states {
                    p[(s, s2)] += w * self.transition[a][(s, s2)];
                }
            }
        }
        p
    }

    /// Stationary distribution of the induced chain: power iteration to
    /// residual 1e-12, cross-checked against a direct linear solve.
    pub fn stationary_distribution(&self) -> Result<DVector<f64>> {
        let p = self.induced_chain();
        let n = self.n_states;
        let mut mu = DVector::from_element(n, 1.0 / n as f64);
        let mut converged = false;
        for _ in 0..200_000 {
            let next = p.transpose() * &mu;
            let next = &next / next.sum();
            let resid = (&next - &mu).norm();
            mu = next;
            if resid <= 1e-12 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(
                "stationary distribution power iteration did not converge".into(),
            ));
        }
        // cross-check: solve (P' - I) mu = 0 with the sum-to-one row appended
        let mut m = DMatrix::zeros(n + 1, n);
        let pt = p.transpose() - DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = pt[(i, j)];
            }
        }
        for j in 0..n {
            m[(n, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        let solved = (m.transpose() * &m)
            .lu()
            .solve(&(m.transpose() * rhs))
            .ok_or_else(|| Error::Numerical("singular stationary system".into()))?;
        if (&solved - &mu).norm() > 1e-8 {
            return Err(Error::Numerical(format!(
                "power iteration and linear solve disagree by {:.3e}",
                (&solved - &mu).norm()
            )));
        }
        Ok(mu)
    }

    /// Exact fixed point by enumeration over all `(S, A, S+)` tuples.
    pub fn td_fixed_point(&self) -> Result<TdFixedPoint> {
        self.validate()?;
        let mu = self.stationary_distribution()?;
        let d = self.dim();
        let beta = 1.0 + self.discount;
        let mut a_mat = DMatrix::zeros(d, d);
        let mut b_bar = DVector::zeros(d);
        for s in 0..self.n_states {
            let phi_s = self.phi(s);
            for a in 0..self.n_actions {
                let w = mu[s] * self.policy[(s, a)];
                if w == 0.0 {
                    continue;
                }
                b_bar += &phi_s * (w * self.mean_reward(s, a));
                for s2 in 0..self.n_states {
                    let pw = self.transition[a][(s, s2)];
                    if pw == 0.0 {
                        continue;
                    }
                    let diff = &phi_s - self.phi(s2) * self.discount;
                    let a_zeta = &phi_s * diff.transpose();
                    // beta bounds every outcome matrix, not just the mean
                    let norm = a_zeta
                        .clone()
                        .svd(false, false)
                        .singular_values
                        .max();
                    if norm > beta + 1e-12 {
                        return Err(Error::Assumption(format!(
                            "||A(zeta)|| = {norm} exceeds 1 + discount for tuple ({s},{a},{s2})"
                        )));
                    }
                    a_mat += a_zeta * (w * pw);
                }
            }
        }
        let sym = (&a_mat + a_mat.transpose()) * 0.5;
        let lambda_min = sym.symmetric_eigen().eigenvalues.min();
        if lambda_min <= 0.0 {
            return Err(Error::Assumption(format!(
                "symmetrized TD matrix has lambda_min = {lambda_min:.3e} <= 0"
            )));
        }
        let theta_star = a_mat
            .clone()
            .lu()
            .solve(&b_bar)
            .ok_or_else(|| Error::Numerical("singular TD matrix".into()))?;
        let residual = (&a_mat * &theta_star - &b_bar).norm();
        if residual > 1e-10 {
            return Err(Error::Numerical(format!(
                "Bellman residual {residual:.3e} exceeds 1e-10"
            )));
        }
        Ok(TdFixedPoint {
            a_mat,
            b_bar,
            theta_star,
            lambda_min,
            beta,
            r_max: self.r_max(),
            mu,
        })
    }

    /// Self-describing serialization for exact replay.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mdp serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MdpModel =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("mdp json: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

/// Inverse-CDF sampler over the stationary distribution; one tuple per
/// iteration shared by every agent.
pub fn draw_sample(m: &MdpModel, mu: &DVector<f64>, seed: u64, t: usize) -> TdSample {
    let mut rng = environment_stream(seed, t);
    let inverse_cdf = |weights: &mut dyn Iterator<Item = f64>, u: f64| -> usize {
        let mut acc = 0.0;
        let mut idx = 0;
        for (k, w) in weights.enumerate() {
            acc += w;
            idx = k;
            if u < acc {
                break;
            }
        }
        idx
    };
    let s = inverse_cdf(&mut mu.iter().cloned(), rng.gen::<f64>());
    let a = inverse_cdf(&mut m.policy.row(s).iter().cloned(), rng.gen::<f64>());
    let s_next = inverse_cdf(
        &mut m.transition[a].row(s).iter().cloned(),
        rng.gen::<f64>(),
    );
    TdSample { s, a, s_next }
}

/// One decentralized TD(0) step on the shared tuple:
/// `theta_i <- sum_j W_ij theta_j + alpha * phi(S) * delta_i` with
/// `delta_i = r_i(S, A) + (gamma phi(S+) - phi(S))' theta_i`.
pub fn decentralized_td_step(
    state: &NetworkState,
    w: &MixingMatrix,
    m: &MdpModel,
    sample: TdSample,
    alpha: f64,
) -> Result<NetworkState> {
    let n = state.n();
    if w.n() != n || m.n_agents() != n || m.dim() != state.dim() {
        return Err(Error::Contract(format!(
            "dimension mismatch: W {}x{}, mdp {} agents dim {}, state {}x{}",
            w.n(),
            w.n(),
            m.n_agents(),
            m.dim(),
            n,
            state.dim()
        )));
    }
    if alpha <= 0.0 {
        return Err(Error::Contract(format!("step size must be positive, got {alpha}")));
    }
    let phi_s = m.phi(sample.s);
    let target = m.phi(sample.s_next) * m.discount - &phi_s;
    let mut theta = w.mix(&state.theta);
    for i in 0..n {
        let delta = m.rewards[i][(sample.s, sample.a)] + target.dot(&state.row(i));
        let step = &phi_s * (alpha * delta);
        for j in 0..state.dim() {
            theta[(i, j)] += step[j];
        }
    }
    Ok(NetworkState {
        theta,
        t: state.t + 1,
    })
}

/// Step schedule `a0/(a1 + t)` with `a0 = 2/lambda_min` and `a1` chosen so
/// `sup alpha_t <= lambda_min / beta^2` holds exactly.
pub fn lemma_compliant_schedule(fp: &TdFixedPoint) -> StepSchedule {
    let a0 = 2.0 / fp.lambda_min;
    let a1 = a0 * fp.beta * fp.beta / fp.lambda_min;
    StepSchedule::InverseTime { a0, a1 }
}

/// Whether the schedule's largest step satisfies the one-step contraction
/// condition `sup alpha_t <= lambda_min / beta^2`.
pub fn schedule_satisfies_contraction(schedule: &StepSchedule, fp: &TdFixedPoint) -> bool {
    schedule.gamma(0) <= fp.lambda_min / (fp.beta * fp.beta) + 1e-15
}

/// Output of a decentralized TD run plus the single-agent centralized
/// reference driven by the identical sample stream.
#[derive(Debug, Clone)]
pub struct TdRunOutput {
    pub record: TrajectoryRecord,
    pub central: TrajectoryRecord,
    pub fixed_point: TdFixedPoint,
    /// False if the supplied schedule violates the contraction condition
    /// (the run proceeds anyway).
    pub schedule_ok: bool,
}

/// Execute decentralized TD(0) for `horizon` iterations and, on the same
/// sample stream, centralized TD(0) on the network-average reward.
pub fn run_td(
    m: &MdpModel,
    w: &MixingMatrix,
    schedule: StepSchedule,
    horizon: usize,
    seed: u64,
    stride: usize,
) -> Result<TdRunOutput> {
    let fp = m.td_fixed_point()?;
    let schedule_ok = schedule_satisfies_contraction(&schedule, &fp);
    let n = m.n_agents();
    let d = m.dim();
    let stride = stride.max(1);
    let star = fp.theta_star.clone();

    let meta = RecordMeta {
        seed,
        algorithm: "td0".into(),
        n,
        rho: w.rho(),
        schedule: schedule.describe(),
        problem: "gridworld".into(),
    };
    let mut record = TrajectoryRecord::new(meta.clone());
    let mut central_record = TrajectoryRecord::new(RecordMeta {
        algorithm: "td0_central".into(),
        n: 1,
        rho: 1.0,
        ..meta
    });

    let mut state = NetworkState::zeros(n, d);
    let mut central = DVector::<f64>::zeros(d);
    for t in 0..=horizon {
        if t % stride == 0 || t == horizon {
            let avg = state.average();
            let avg_gap = (&avg - &star).norm_squared();
            let worst = (0..n)
                .map(|i| (state.row(i) - &star).norm_squared())
                .fold(0.0, f64::max);
            let resid = (&fp.a_mat * &avg - &fp.b_bar).norm_squared();
            record.push(state.t, avg_gap, worst, resid, state.consensus_error());
            let cgap = (&central - &star).norm_squared();
            let cresid = (&fp.a_mat * &central - &fp.b_bar).norm_squared();
            central_record.push(t, cgap, cgap, cresid, 0.0);
        }
        if t == horizon {
            break;
        }
        let alpha = schedule.gamma(t);
        let sample = draw_sample(m, &fp.mu, seed, t);
        state = decentralized_td_step(&state, w, m, sample, alpha)?;
        let phi_s = m.phi(sample.s);
        let delta = m.mean_reward(sample.s, sample.a)
            + (m.phi(sample.s_next) * m.discount - &phi_s).dot(&central);
        central += phi_s * (alpha * delta);
        let norm = state.theta.norm().max(central.norm());
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence {
                iteration: t + 1,
                norm,
            });
        }
    }
    Ok(TdRunOutput {
        record,
        central: central_record,
        fixed_point: fp,
        schedule_ok,
    })
}
