//! Experiment orchestration: seed sweeps, grid sweeps, artifact emission.
//!
//! Work is farmed out per (setting, seed) to a rayon pool; every trajectory
//! is fully determined by its own counter-based streams, so results are
//! byte-identical for any thread count. Output files are written by the
//! collector thread only after every run has succeeded, which keeps partial
//! artifacts from ever hitting the disk.

use super::config::{AlgoKindCfg, ExperimentConfig, ProblemFamily};
use crate::algorithms::{run, AlgorithmKind, AlgorithmSpec, NetworkState, StepSchedule};
use crate::error::Error;
use crate::metrics::{
    average_records, default_window, estimate_transient, rate_fit, scaling_fit, FitResult,
    TrajectoryRecord, TRANSIENT_THRESHOLD,
};
use crate::problems::{Problem, ProblemConstants};
use crate::rng::{stream, StreamKind};
use crate::td::{build_gridworld, lemma_compliant_schedule, run_td};
use crate::topology::MixingMatrix;
use crate::Result;
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

/// CLI-level overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub seeds: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SettingSummary {
    pub label: String,
    pub algorithm: String,
    pub n: usize,
    pub alpha: f64,
    pub rho: f64,
    pub schedule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constants: Option<ProblemConstants>,
    /// Largest per-agent gradient variance at the optimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_hat_sq: Option<f64>,
    /// Whether a transient estimate was attempted (needs a centralized
    /// reference curve).
    pub transient_estimated: bool,
    /// Iteration of the transient estimate; `null` with
    /// `transient_estimated = true` means the ratio never settled within the
    /// horizon.
    pub transient_iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_slope: Option<f64>,
    /// TD only: worst-agent to centralized gap ratio stays <= 4 past a 5%
    /// burn-in.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_transient: Option<bool>,
    pub final_avg_gap: f64,
    pub final_worst_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingSummary {
    /// `(sqrt(n)/rho, transient iteration)` per swept agent count.
    pub points: Vec<(f64, f64)>,
    pub fit: FitResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub horizon: usize,
    pub stride: usize,
    pub seed_count: usize,
    pub seed_base: u64,
    pub settings: Vec<SettingSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSummary>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    schema_version: u32,
    config_sha256: String,
    code_version: String,
    wall_clock_secs: f64,
    files: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed unit direction for the shared initial point, derived from the
/// problem's data seed so every algorithm and trajectory seed starts at the
/// same place.
fn init_direction(d: usize, problem_seed: u64) -> DVector<f64> {
    let mut rng = stream(problem_seed, StreamKind::Aux(11), 0, 0);
    let mut u = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
    let n = u.norm();
    if n > 0.0 {
        u /= n;
    } else {
        u[0] = 1.0;
    }
    u
}

fn algo_kind(cfg: AlgoKindCfg) -> AlgorithmKind {
    match cfg {
        AlgoKindCfg::Dsgd => AlgorithmKind::Dsgd,
        AlgoKindCfg::Csgd => AlgorithmKind::Csgd,
        AlgoKindCfg::Gt => AlgorithmKind::Gt,
        AlgoKindCfg::Ed => AlgorithmKind::Ed,
        AlgoKindCfg::Td => unreachable!("td runs through run_td"),
    }
}

fn format_alpha(alpha: f64) -> String {
    // stable short form for filenames: 0.3 -> "0p3"
    format!("{alpha}").replace('.', "p")
}

/// One (n, alpha, algorithm) combination to execute.
struct Setting {
    label: String,
    n: usize,
    alpha: f64,
    algo: AlgoKindCfg,
    batch: usize,
    schedule: StepSchedule,
}

struct SettingData {
    problem: Problem,
    w: MixingMatrix,
    init: NetworkState,
}

/// Execute every setting of `cfg`, write per-seed and seed-averaged CSVs, a
/// JSON summary and a hash manifest into `opts.out_dir`, and return the
/// summary. Re-running with identical inputs reproduces every CSV byte for
/// byte.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Summary> {
    cfg.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let seed_count = opts.seeds.unwrap_or(cfg.seeds.count);
    let stride = opts.stride.unwrap_or(cfg.stride);
    if stride == 0 || cfg.horizon < stride {
        return Err(Error::Validation(format!(
            "need horizon >= stride >= 1, got horizon {} stride {stride}",
            cfg.horizon
        )));
    }
    let seeds: Vec<u64> = (0..seed_count as u64).map(|k| cfg.seeds.base + k).collect();

    let mut files: Vec<(String, String)> = Vec::new(); // (name, content)
    let summary = if cfg.problem.family == ProblemFamily::Gridworld {
        run_td_experiment(cfg, &pool, &seeds, stride, &mut files)?
    } else {
        run_gradient_experiment(cfg, &pool, &seeds, stride, &mut files)?
    };

    let wall = started.elapsed().as_secs_f64();
    let mut summary = summary;
    summary.wall_clock_secs = wall;
    summary.seed_count = seed_count;
    summary.seed_base = cfg.seeds.base;

    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    files.push(("summary.json".into(), summary_json));

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_sha256: sha256_hex(cfg.to_toml().as_bytes()),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_secs: wall,
        files: files
            .iter()
            .map(|(name, content)| ManifestEntry {
                file: name.clone(),
                sha256: sha256_hex(content.as_bytes()),
            })
            .collect(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    files.push(("manifest.json".into(), manifest_json));

    std::fs::create_dir_all(&opts.out_dir)?;
    for (name, content) in &files {
        std::fs::write(opts.out_dir.join(name), content)?;
    }
    Ok(summary)
}

fn run_gradient_experiment(
    cfg: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    seeds: &[u64],
    stride: usize,
    files: &mut Vec<(String, String)>,
) -> Result<Summary> {
    let sweep = !cfg.n_sweep.is_empty();
    let mut settings = Vec::new();
    let mut data: BTreeMap<(usize, u64), SettingData> = BTreeMap::new(); // key (n, alpha bits)
    for &n in &cfg.n_values() {
        for &alpha in &cfg.alpha_values() {
            let key = (n, alpha.to_bits());
            if !data.contains_key(&key) {
                let problem = cfg.build_problem(n, alpha)?;
                let w = cfg.build_topology(n)?;
                let u = init_direction(problem.dim(), cfg.problem.seed);
                let theta0 = problem.theta_star() + u * cfg.init_radius;
                let init = NetworkState::from_rows(&vec![theta0; n]);
                data.insert(key, SettingData { problem, w, init });
            }
            for algo in &cfg.algorithms {
                let mut label = algo.kind.name().to_string();
                if cfg.alpha_values().len() > 1 {
                    label.push_str(&format!("_alpha{}", format_alpha(alpha)));
                }
                if sweep {
                    label.push_str(&format!("_n{n}"));
                }
                settings.push(Setting {
                    label,
                    n,
                    alpha,
                    algo: algo.kind,
                    batch: algo.batch,
                    schedule: algo.schedule.unwrap_or_else(|| cfg.default_schedule()),
                });
            }
        }
    }

    // run everything: outputs indexed by (setting, seed)
    let jobs: Vec<(usize, u64)> = settings
        .iter()
        .enumerate()
        .flat_map(|(si, _)| seeds.iter().map(move |&s| (si, s)))
        .collect();
    let outputs: Result<Vec<_>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(si, seed)| {
                let s = &settings[si];
                let d = &data[&(s.n, s.alpha.to_bits())];
                let spec = AlgorithmSpec {
                    kind: algo_kind(s.algo),
                    batch_size: s.batch,
                    schedule: s.schedule,
                };
                run(&spec, &d.problem, &d.w, cfg.horizon, d.init.clone(), seed, stride)
                    .map(|out| ((si, seed), out))
            })
            .collect()
    });
    let outputs = outputs?;
    let by_job: BTreeMap<(usize, u64), _> =
        outputs.into_iter().collect();

    // per-setting averaging + artifacts
    let mut avg_records: Vec<TrajectoryRecord> = Vec::new();
    let mut runavg_refs: BTreeMap<(usize, u64), TrajectoryRecord> = BTreeMap::new();
    for (si, s) in settings.iter().enumerate() {
        let mut recs = Vec::new();
        let mut runavgs = Vec::new();
        for &seed in seeds {
            let out = &by_job[&(si, seed)];
            files.push((format!("{}_seed{seed}.csv", s.label), out.record.to_csv()));
            recs.push(out.record.clone());
            if let Some(ra) = &out.running_average {
                runavgs.push(ra.clone());
            }
        }
        let avg = average_records(&recs)?;
        files.push((format!("{}_avg.csv", s.label), avg.to_csv()));
        if !runavgs.is_empty() {
            let ra_avg = average_records(&runavgs)?;
            files.push((format!("{}_runavg_avg.csv", s.label), ra_avg.to_csv()));
            runavg_refs.insert((s.n, s.alpha.to_bits()), ra_avg);
        }
        avg_records.push(avg);
    }

    let window = cfg.transient_window.unwrap_or_else(|| default_window(cfg.horizon));
    let mut setting_summaries = Vec::new();
    let mut scaling_points: Vec<(f64, f64)> = Vec::new();
    let mut scaling_complete = true;
    for (si, s) in settings.iter().enumerate() {
        let d = &data[&(s.n, s.alpha.to_bits())];
        let avg = &avg_records[si];
        let reference = runavg_refs.get(&(s.n, s.alpha.to_bits()));
        let (estimated, transient) = match (s.algo, reference) {
            (AlgoKindCfg::Csgd, _) | (_, None) => (false, None),
            (_, Some(r)) => {
                let est = estimate_transient(avg, r, window, TRANSIENT_THRESHOLD)?;
                (true, est.transient)
            }
        };
        let tail_slope = rate_fit(&avg.iters, &avg.avg_gap, cfg.horizon / 4, cfg.horizon)
            .ok()
            .map(|f| f.slope);
        let probes = d.problem.default_probes(cfg.problem.seed);
        let constants = d.problem.estimate_constants(&probes);
        let sigma_hat_sq = d.problem.max_gradient_variance(d.problem.theta_star());
        if sweep && s.algo == AlgoKindCfg::Dsgd && s.alpha == cfg.alpha_values()[0] {
            match transient {
                Some(t) => scaling_points.push(((s.n as f64).sqrt() / d.w.rho(), t as f64)),
                None => scaling_complete = false,
            }
        }
        setting_summaries.push(SettingSummary {
            label: s.label.clone(),
            algorithm: s.algo.name().into(),
            n: s.n,
            alpha: s.alpha,
            rho: d.w.rho(),
            schedule: s.schedule.describe(),
            constants: Some(constants),
            sigma_hat_sq: Some(sigma_hat_sq),
            transient_estimated: estimated,
            transient_iteration: transient,
            tail_slope,
            zero_transient: None,
            final_avg_gap: *avg.avg_gap.last().unwrap(),
            final_worst_gap: *avg.worst_gap.last().unwrap(),
        });
    }

    let scaling = if sweep && scaling_complete && scaling_points.len() >= 2 {
        Some(ScalingSummary {
            fit: scaling_fit(&scaling_points)?,
            points: scaling_points,
        })
    } else {
        None
    };

    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        horizon: cfg.horizon,
        stride,
        seed_count: 0,
        seed_base: 0,
        settings: setting_summaries,
        scaling,
        wall_clock_secs: 0.0,
    })
}

fn run_td_experiment(
    cfg: &ExperimentConfig,
    pool: &rayon::ThreadPool,
    seeds: &[u64],
    stride: usize,
    files: &mut Vec<(String, String)>,
) -> Result<Summary> {
    let n = cfg.problem.n;
    let model = build_gridworld(n, cfg.problem.seed, cfg.problem.shared_rewards);
    let w = cfg.build_topology(n)?;
    let fp = model.td_fixed_point()?;
    files.push(("mdp.json".into(), model.to_json()));

    let mut setting_summaries = Vec::new();
    for algo in &cfg.algorithms {
        let schedule = algo.schedule.unwrap_or_else(|| lemma_compliant_schedule(&fp));
        let label = "td".to_string();
        let outputs: Result<Vec<_>> = pool.install(|| {
            seeds
                .par_iter()
                .map(|&seed| run_td(&model, &w, schedule, cfg.horizon, seed, stride))
                .collect()
        });
        let outputs = outputs?;
        let mut recs = Vec::new();
        let mut centrals = Vec::new();
        for (k, out) in outputs.iter().enumerate() {
            files.push((format!("{label}_seed{}.csv", seeds[k]), out.record.to_csv()));
            recs.push(out.record.clone());
            centrals.push(out.central.clone());
        }
        let avg = average_records(&recs)?;
        let central_avg = average_records(&centrals)?;
        files.push((format!("{label}_avg.csv"), avg.to_csv()));
        files.push((format!("{label}_central_avg.csv"), central_avg.to_csv()));

        // zero transient: worst-agent gap within 4x of the centralized gap
        // at every recorded iteration past a 5% burn-in
        let burn_in = cfg.horizon / 20;
        let mut zero_transient = true;
        for k in 0..avg.len() {
            if avg.iters[k] < burn_in {
                continue;
            }
            let c = central_avg.avg_gap[k];
            if c <= 0.0 || avg.worst_gap[k] / c > 4.0 {
                zero_transient = false;
                break;
            }
        }
        let tail_slope = rate_fit(&avg.iters, &avg.avg_gap, cfg.horizon / 4, cfg.horizon)
            .ok()
            .map(|f| f.slope);
        setting_summaries.push(SettingSummary {
            label,
            algorithm: "td".into(),
            n,
            alpha: f64::NAN,
            rho: w.rho(),
            schedule: schedule.describe(),
            constants: None,
            sigma_hat_sq: Some(2.0 * fp.r_max * fp.r_max),
            transient_estimated: true,
            transient_iteration: Some(0),
            tail_slope,
            zero_transient: Some(zero_transient),
            final_avg_gap: *avg.avg_gap.last().unwrap(),
            final_worst_gap: *avg.worst_gap.last().unwrap(),
        });
    }

    Ok(Summary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        horizon: cfg.horizon,
        stride,
        seed_count: 0,
        seed_base: 0,
        settings: setting_summaries,
        scaling: None,
        wall_clock_secs: 0.0,
    })
}

/// Resolved-config report: the config itself (re-parseable TOML) followed by
/// derived quantities as comments.
pub fn describe(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let mut out = cfg.to_toml();
    out.push_str("\n# --- derived quantities (informational) ---\n");
    for &n in &cfg.n_values() {
        let w = cfg.build_topology(n)?;
        out.push_str(&format!("# n = {n}: spectral gap rho = {:.6}\n", w.rho()));
    }
    match cfg.problem.family {
        ProblemFamily::Gridworld => {
            let model = build_gridworld(cfg.problem.n, cfg.problem.seed, cfg.problem.shared_rewards);
            let fp = model.td_fixed_point()?;
            out.push_str(&format!(
                "# td fixed point: lambda_min = {:.6}, beta = {:.2}, r_max = {:.4}\n",
                fp.lambda_min, fp.beta, fp.r_max
            ));
            out.push_str(&format!(
                "# default schedule: {}\n",
                lemma_compliant_schedule(&fp).describe()
            ));
        }
        _ => {
            for &alpha in &cfg.alpha_values() {
                let p = cfg.build_problem(cfg.problem.n, alpha)?;
                let c = p.estimate_constants(&p.default_probes(cfg.problem.seed));
                out.push_str(&format!(
                    "# alpha = {alpha}: L = {:.4}, mu = {:.4}, varsigma = {:.4}, varsigma_h = {:.4}\n",
                    c.l, c.mu, c.varsigma, c.varsigma_h
                ));
            }
        }
    }
    Ok(out)
}

/// Convenience wrapper: parse + run a config file.
pub fn run_config_file(path: &Path, opts: &RunOptions) -> Result<Summary> {
    let cfg = super::config::parse_config(path)?;
    run_experiment(&cfg, opts)
}
