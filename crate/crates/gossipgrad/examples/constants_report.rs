//! Problem-constant estimates across the homogeneity dial: smoothness L,
//! strong convexity mu, gradient heterogeneity varsigma and Hessian
//! heterogeneity varsigma_H. alpha = 1 pools every agent's sampling
//! distribution, so both heterogeneity measures collapse to zero.

use gossipgrad::problems::{make_logistic, make_quadratic, HomogeneityMix, Problem};

fn main() -> gossipgrad::Result<()> {
    println!("quadratic d=10 n=20, 500 samples per agent");
    println!("{:>6} {:>8} {:>8} {:>10} {:>10}", "alpha", "L", "mu", "varsigma", "vsigma_H");
    for &alpha in &[0.0, 0.1, 0.3, 1.0] {
        let p = Problem::Quadratic(make_quadratic(10, 20, 500, HomogeneityMix::new(alpha)?, 1)?);
        let c = p.estimate_constants(&p.default_probes(0));
        println!("{alpha:>6} {:>8.3} {:>8.3} {:>10.3} {:>10.3}", c.l, c.mu, c.varsigma, c.varsigma_h);
    }

    println!("\nlogistic d=5 n=30, 5 samples per agent, ridge 1 (probe-based lower estimates)");
    println!("{:>6} {:>8} {:>8} {:>10} {:>10}", "alpha", "L", "mu", "varsigma", "vsigma_H");
    for &alpha in &[0.0, 1.0] {
        let p = Problem::Logistic(make_logistic(5, 30, 5, 1.0, HomogeneityMix::new(alpha)?, 1)?);
        let c = p.estimate_constants(&p.default_probes(0));
        println!("{alpha:>6} {:>8.3} {:>8.3} {:>10.3} {:>10.3}", c.l, c.mu, c.varsigma, c.varsigma_h);
    }
    Ok(())
}
