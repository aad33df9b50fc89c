//! Experiment configuration: TOML on disk, strictly validated. Unknown keys
//! are hard errors, so typos fail loudly instead of silently running the
//! wrong experiment.

use crate::algorithms::StepSchedule;
use crate::error::Error;
use crate::problems::{make_logistic, make_quadratic, HomogeneityMix, Problem};
use crate::topology::{build_erdos_renyi, build_ring, complete_averaging, MixingMatrix};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub horizon: usize,
    pub stride: usize,
    pub seeds: SeedsCfg,
    pub problem: ProblemCfg,
    pub topology: TopologyCfg,
    pub algorithms: Vec<AlgorithmCfg>,
    /// Agent counts to sweep; empty means run only at `problem.n`.
    #[serde(default)]
    pub n_sweep: Vec<usize>,
    /// All agents start at `theta_star + init_radius * u` for a fixed
    /// problem-derived unit direction `u`.
    #[serde(default = "default_init_radius")]
    pub init_radius: f64,
    /// Window length of the transient estimator; default is 10% of the
    /// horizon (at least 50).
    #[serde(default)]
    pub transient_window: Option<usize>,
}

fn default_init_radius() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedsCfg {
    pub count: usize,
    pub base: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemFamily {
    Quadratic,
    Logistic,
    Gridworld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemCfg {
    pub family: ProblemFamily,
    /// Model dimension (for logistic: feature dimension before the bias
    /// term; ignored for gridworld, whose features fix d = 4).
    #[serde(default)]
    pub d: usize,
    /// Number of agents; must match the topology everywhere.
    pub n: usize,
    /// Samples per agent (quadratic/logistic).
    #[serde(default)]
    pub samples: usize,
    /// Homogeneity levels to sweep; empty means fully heterogeneous only.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Ridge coefficient (logistic only).
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Data-generation seed (distinct from trajectory seeds).
    pub seed: u64,
    /// Gridworld only: give every agent the same reward table.
    #[serde(default)]
    pub shared_rewards: bool,
}

fn default_ridge() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    ErdosRenyi,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyCfg {
    pub kind: TopologyKind,
    /// Ring only: diagonal weight.
    #[serde(default = "default_self_weight")]
    pub self_weight: f64,
    /// Erdos-Renyi only: edge probability.
    #[serde(default)]
    pub p: f64,
    /// Erdos-Renyi only: graph seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_self_weight() -> f64 {
    0.3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKindCfg {
    Dsgd,
    Csgd,
    Gt,
    Ed,
    Td,
}

impl AlgoKindCfg {
    pub fn name(&self) -> &'static str {
        match self {
            AlgoKindCfg::Dsgd => "dsgd",
            AlgoKindCfg::Csgd => "csgd",
            AlgoKindCfg::Gt => "gt",
            AlgoKindCfg::Ed => "ed",
            AlgoKindCfg::Td => "td",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmCfg {
    pub kind: AlgoKindCfg,
    #[serde(default = "default_batch")]
    pub batch: usize,
    /// Absent: family default (`10/(500+t)` quadratic, `5/(100+t)`
    /// logistic, contraction-compliant for TD).
    #[serde(default)]
    pub schedule: Option<StepSchedule>,
}

fn default_batch() -> usize {
    1
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Validation("name must not be empty".into()));
        }
        if self.stride == 0 || self.horizon < self.stride {
            return Err(Error::Validation(format!(
                "need horizon >= stride >= 1, got horizon {} stride {}",
                self.horizon, self.stride
            )));
        }
        if self.seeds.count == 0 {
            return Err(Error::Validation("seeds.count must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Validation("at least one algorithm required".into()));
        }
        if !(self.init_radius >= 0.0) {
            return Err(Error::Validation("init_radius must be nonnegative".into()));
        }
        for &a in &self.problem.alphas {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Validation(format!("alpha {a} outside [0,1]")));
            }
        }
        let is_td = self.problem.family == ProblemFamily::Gridworld;
        for algo in &self.algorithms {
            let td_algo = algo.kind == AlgoKindCfg::Td;
            if td_algo != is_td {
                return Err(Error::Validation(format!(
                    "algorithm `{}` does not match problem family {:?}",
                    algo.kind.name(),
                    self.problem.family
                )));
            }
            if algo.batch == 0 {
                return Err(Error::Validation("batch must be >= 1".into()));
            }
        }
        match self.problem.family {
            ProblemFamily::Quadratic | ProblemFamily::Logistic => {
                if self.problem.d == 0 || self.problem.samples == 0 {
                    return Err(Error::Validation(
                        "quadratic/logistic need d >= 1 and samples >= 1".into(),
                    ));
                }
            }
            ProblemFamily::Gridworld => {
                if !self.problem.alphas.is_empty() {
                    return Err(Error::Validation(
                        "gridworld has no homogeneity dial; use shared_rewards".into(),
                    ));
                }
                if !self.n_sweep.is_empty() {
                    return Err(Error::Validation("n_sweep is not supported for gridworld".into()));
                }
            }
        }
        for &n in self.n_values().iter() {
            if n == 0 {
                return Err(Error::Validation("agent count must be >= 1".into()));
            }
            if self.topology.kind == TopologyKind::Ring && n != 1 && n < 3 {
                return Err(Error::Validation(format!("ring topology needs n >= 3, got {n}")));
            }
        }
        if self.topology.kind == TopologyKind::ErdosRenyi
            && !(0.0..=1.0).contains(&self.topology.p)
        {
            return Err(Error::Validation(format!(
                "edge probability {} outside [0,1]",
                self.topology.p
            )));
        }
        Ok(())
    }

    /// Agent counts to run: the sweep if present, else the problem's `n`.
    pub fn n_values(&self) -> Vec<usize> {
        if self.n_sweep.is_empty() {
            vec![self.problem.n]
        } else {
            self.n_sweep.clone()
        }
    }

    /// Homogeneity levels to run (empty list means fully heterogeneous).
    pub fn alpha_values(&self) -> Vec<f64> {
        if self.problem.alphas.is_empty() {
            vec![0.0]
        } else {
            self.problem.alphas.clone()
        }
    }

    /// Build the mixing matrix for `n` agents.
    pub fn build_topology(&self, n: usize) -> Result<MixingMatrix> {
        if n == 1 {
            return Ok(complete_averaging(1));
        }
        match self.topology.kind {
            TopologyKind::Ring => build_ring(n, self.topology.self_weight),
            TopologyKind::ErdosRenyi => {
                let mut rng = crate::rng::generation_stream(self.topology.seed);
                build_erdos_renyi(n, self.topology.p, &mut rng)
            }
            TopologyKind::Complete => Ok(complete_averaging(n)),
        }
    }

    /// Build the objective at the given agent count and homogeneity level.
    pub fn build_problem(&self, n: usize, alpha: f64) -> Result<Problem> {
        let mix = HomogeneityMix::new(alpha)?;
        match self.problem.family {
            ProblemFamily::Quadratic => Ok(Problem::Quadratic(make_quadratic(
                self.problem.d,
                n,
                self.problem.samples,
                mix,
                self.problem.seed,
            )?)),
            ProblemFamily::Logistic => Ok(Problem::Logistic(make_logistic(
                self.problem.d,
                n,
                self.problem.samples,
                self.problem.ridge,
                mix,
                self.problem.seed,
            )?)),
            ProblemFamily::Gridworld => Err(Error::Contract(
                "gridworld experiments are built through the td module".into(),
            )),
        }
    }

    /// Family-default step schedule for an algorithm without an explicit one.
    pub fn default_schedule(&self) -> StepSchedule {
        match self.problem.family {
            ProblemFamily::Quadratic => StepSchedule::InverseTime { a0: 10.0, a1: 500.0 },
            ProblemFamily::Logistic => StepSchedule::InverseTime { a0: 5.0, a1: 100.0 },
            // placeholder; the TD runner substitutes the contraction-
            // compliant schedule computed from the fixed point
            ProblemFamily::Gridworld => StepSchedule::InverseTime { a0: 1.0, a1: 1.0 },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
horizon = 1000
stride = 10

[seeds]
count = 2
base = 7

[problem]
family = "quadratic"
d = 4
n = 5
samples = 10
seed = 1

[topology]
kind = "ring"
self_weight = 0.4

[[algorithms]]
kind = "dsgd"
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.name, "minimal");
        assert_eq!(cfg.algorithms[0].kind, AlgoKindCfg::Dsgd);
        assert_eq!(cfg.algorithms[0].batch, 1);
        assert!(cfg.algorithms[0].schedule.is_none());
        assert_eq!(cfg.n_values(), vec![5]);
        assert_eq!(cfg.alpha_values(), vec![0.0]);
        cfg.build_topology(5).unwrap();
        cfg.build_problem(5, 0.0).unwrap();
    }

    #[test]
    fn unknown_keys_are_hard_errors() {
        let text = MINIMAL.replace("stride = 10", "stride = 10\nstrude = 3");
        let err = parse_config_str(&text).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn horizon_below_stride_rejected() {
        let text = MINIMAL.replace("horizon = 1000", "horizon = 5");
        assert!(matches!(parse_config_str(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn td_algorithm_requires_gridworld() {
        let text = MINIMAL.replace("kind = \"dsgd\"", "kind = \"td\"");
        assert!(matches!(parse_config_str(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let back = parse_config_str(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn alpha_out_of_range_rejected() {
        let text = MINIMAL.replace("samples = 10", "samples = 10\nalphas = [0.5, 1.5]");
        assert!(matches!(parse_config_str(&text), Err(Error::Validation(_))));
    }
}
