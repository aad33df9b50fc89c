//! Spectral gaps of the shipped topologies: lazy rings across sizes and
//! self-weights, plus Metropolis-Hastings weights on an Erdos-Renyi draw.

use gossipgrad::rng::generation_stream;
use gossipgrad::topology::{build_erdos_renyi, build_ring, complete_averaging};

fn main() -> gossipgrad::Result<()> {
    println!("ring topologies, W = (1-s) ring-average + s I");
    println!("{:>4} {:>6} {:>10} {:>10}", "n", "s", "rho", "1/rho");
    for &s in &[0.3, 0.5, 0.8] {
        for &n in &[10usize, 20, 30, 40] {
            let w = build_ring(n, s)?;
            println!("{:>4} {:>6} {:>10.6} {:>10.1}", n, s, w.rho(), 1.0 / w.rho());
        }
    }

    let mut rng = generation_stream(7);
    let er = build_erdos_renyi(30, 0.2, &mut rng)?;
    println!("\nErdos-Renyi n=30 p=0.2, Metropolis-Hastings weights: rho = {:.4}", er.rho());

    let k = complete_averaging(12);
    println!("complete averaging n=12: rho = {:.4} (exact consensus in one round)", k.rho());
    Ok(())
}
