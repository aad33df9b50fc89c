//! Transient time versus data homogeneity on the synthetic quadratic:
//! DSGD's worst-agent gap is compared against the running average of a
//! centralized SGD run with the same total sample budget. Heterogeneous data
//! (alpha = 0) keeps the ratio above threshold for far longer than pooled
//! data (alpha = 1); alpha = 0.3 lands in between.
//!
//! A desk-scale cut of the shipped `fig1_quadratic` experiment (fewer seeds,
//! shorter horizon); run with `--release`.

use gossipgrad::algorithms::{run, AlgorithmKind, AlgorithmSpec, NetworkState, StepSchedule};
use gossipgrad::metrics::{average_records, estimate_transient, TRANSIENT_THRESHOLD};
use gossipgrad::problems::{make_quadratic, HomogeneityMix, Problem};
use gossipgrad::rng::generation_stream;
use gossipgrad::topology::build_ring;
use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

const HORIZON: usize = 20_000;
const STRIDE: usize = 100;
const WINDOW: usize = 2_000;
const SEEDS: u64 = 5;

fn main() -> gossipgrad::Result<()> {
    let (d, n) = (10, 20);
    let w = build_ring(n, 0.3)?;
    let schedule = StepSchedule::InverseTime { a0: 10.0, a1: 500.0 };

    println!("ring n={n} rho={:.4}, schedule {}, {SEEDS} seeds", w.rho(), schedule.describe());
    for &alpha in &[0.0, 0.3, 1.0] {
        let p = Problem::Quadratic(make_quadratic(d, n, 500, HomogeneityMix::new(alpha)?, 1)?);

        // all agents start at the same point, 25 units from the optimum
        let mut rng = generation_stream(2);
        let mut u = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        u /= u.norm();
        let theta0 = p.theta_star() + u * 25.0;
        let init = NetworkState::from_rows(&vec![theta0; n]);

        let mut dsgd_recs = Vec::new();
        let mut ref_recs = Vec::new();
        for seed in 0..SEEDS {
            let dsgd = AlgorithmSpec { kind: AlgorithmKind::Dsgd, batch_size: 1, schedule };
            let csgd = AlgorithmSpec { kind: AlgorithmKind::Csgd, batch_size: 1, schedule };
            dsgd_recs.push(run(&dsgd, &p, &w, HORIZON, init.clone(), seed, STRIDE)?.record);
            ref_recs.push(run(&csgd, &p, &w, HORIZON, init.clone(), seed, STRIDE)?.running_average.unwrap());
        }
        let avg = average_records(&dsgd_recs)?;
        let reference = average_records(&ref_recs)?;
        let est = estimate_transient(&avg, &reference, WINDOW, TRANSIENT_THRESHOLD)?;
        match est.transient {
            Some(t) => println!("alpha={alpha:<4} transient ~ {t} iterations"),
            None => println!("alpha={alpha:<4} transient not reached within {HORIZON} iterations"),
        }
    }
    Ok(())
}
