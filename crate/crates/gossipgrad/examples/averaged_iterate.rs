//! The network average of a DSGD step obeys a centralized-looking recursion:
//! because W is doubly stochastic, averaging the rows of
//! `Theta^{t+1} = W Theta^t - gamma G^t` gives exactly
//! `thetabar^{t+1} = thetabar^t - gamma * gbar^t`. Verified here to 1e-12 on
//! random problems; the acceptance suite repeats this over 50 triples.

use gossipgrad::algorithms::{dsgd_step, NetworkState};
use gossipgrad::problems::{make_quadratic, HomogeneityMix, Problem};
use gossipgrad::rng::{generation_stream, gradient_stream};
use gossipgrad::topology::build_ring;
use nalgebra::DVector;
use rand::Rng;

fn main() -> gossipgrad::Result<()> {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let n = 6 + (seed as usize % 5);
        let d = 6 + (seed as usize % 3);
        let p = Problem::Quadratic(make_quadratic(d, n, 40, HomogeneityMix::heterogeneous(), seed)?);
        let w = build_ring(n, 0.3)?;
        let mut init_rng = generation_stream(1000 + seed);
        let rows: Vec<DVector<f64>> =
            (0..n).map(|_| DVector::from_fn(d, |_, _| init_rng.gen_range(-5.0..5.0))).collect();
        let state = NetworkState::from_rows(&rows);
        let gamma = 0.01;

        let next = dsgd_step(&state, &w, &p, gamma, 1, seed)?;

        // replay the same gradient draws the step consumed
        let mut gbar = DVector::zeros(d);
        for i in 0..n {
            let mut rng = gradient_stream(seed, i, 0);
            gbar += p.sample_gradient(i, &state.row(i), &mut rng);
        }
        gbar /= n as f64;
        let predicted = state.average() - gbar * gamma;
        let dev = (next.average() - predicted).norm();
        worst = worst.max(dev);
    }
    println!("max |column average - centralized recursion| over 10 random steps: {worst:.3e}");
    assert!(worst <= 1e-12);
    Ok(())
}
