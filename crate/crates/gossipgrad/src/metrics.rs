//! Trajectory records, seed averaging, transient-time estimation and rate
//! fitting.
//!
//! A transient time is the first iteration at which the worst agent's
//! optimality gap (over a trailing window) comes within a fixed factor of a
//! centralized reference curve; it is
//! the quantity the network scaling experiments regress against
//! `sqrt(n) / rho`.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Factor the worst agent gap must come within of the reference curve.
pub const TRANSIENT_THRESHOLD: f64 = 0.25;

/// Provenance attached to a trajectory record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub seed: u64,
    pub algorithm: String,
    pub n: usize,
    pub rho: f64,
    pub schedule: String,
    pub problem: String,
}

impl RecordMeta {
    pub fn synthetic() -> Self {
        Self {
            seed: 0,
            algorithm: "synthetic".into(),
            n: 0,
            rho: 0.0,
            schedule: String::new(),
            problem: String::new(),
        }
    }
}

/// Column-oriented metric trajectory sampled on a (possibly strided) grid of
/// iterations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub meta: RecordMeta,
    pub iters: Vec<usize>,
    /// `||avg iterate - theta_star||^2`
    pub avg_gap: Vec<f64>,
    /// `max_i ||theta_i - theta_star||^2`
    pub worst_gap: Vec<f64>,
    /// `||grad f(avg iterate)||^2`
    pub grad_norm_sq: Vec<f64>,
    /// squared Frobenius deviation from the network average
    pub consensus_err: Vec<f64>,
}

pub const CSV_HEADER: &str = "iter,avg_gap,worst_gap,grad_norm_sq,consensus_err";

impl TrajectoryRecord {
    pub fn new(meta: RecordMeta) -> Self {
        Self {
            meta,
            iters: Vec::new(),
            avg_gap: Vec::new(),
            worst_gap: Vec::new(),
            grad_norm_sq: Vec::new(),
            consensus_err: Vec::new(),
        }
    }

    pub fn push(&mut self, t: usize, avg_gap: f64, worst_gap: f64, grad_norm_sq: f64, consensus_err: f64) {
        debug_assert!(
            avg_gap <= worst_gap * (1.0 + 1e-9) + 1e-300,
            "gap ordering violated at t={t}: avg {avg_gap} > worst {worst_gap}"
        );
        self.iters.push(t);
        self.avg_gap.push(avg_gap);
        self.worst_gap.push(worst_gap);
        self.grad_norm_sq.push(grad_norm_sq);
        self.consensus_err.push(consensus_err);
    }

    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    /// Serialize to CSV with a fixed header and full-precision floats, so
    /// equal trajectories produce byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.iters[k],
                self.avg_gap[k],
                self.worst_gap[k],
                self.grad_norm_sq[k],
                self.consensus_err[k]
            ));
        }
        out
    }

    pub fn from_csv(meta: RecordMeta, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `{CSV_HEADER}`, got {other:?}"
                )))
            }
        }
        let mut rec = TrajectoryRecord::new(meta);
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let t: usize = fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            let mut vals = [0.0; 4];
            for (v, f) in vals.iter_mut().zip(&fields[1..]) {
                *v = f
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            }
            rec.iters.push(t);
            rec.avg_gap.push(vals[0]);
            rec.worst_gap.push(vals[1]);
            rec.grad_norm_sq.push(vals[2]);
            rec.consensus_err.push(vals[3]);
        }
        Ok(rec)
    }
}

/// Pointwise mean of records sharing one iteration grid; metadata is taken
/// from the first record with the seed zeroed.
pub fn average_records(records: &[TrajectoryRecord]) -> Result<TrajectoryRecord> {
    let first = records
        .first()
        .ok_or_else(|| Error::Contract("cannot average zero records".into()))?;
    for r in records {
        if r.iters != first.iters {
            return Err(Error::Contract(
                "records must share the same iteration grid".into(),
            ));
        }
    }
    let m = records.len() as f64;
    let mut out = TrajectoryRecord::new(RecordMeta {
        seed: 0,
        ..first.meta.clone()
    });
    for k in 0..first.len() {
        out.iters.push(first.iters[k]);
        out.avg_gap
            .push(records.iter().map(|r| r.avg_gap[k]).sum::<f64>() / m);
        out.worst_gap
            .push(records.iter().map(|r| r.worst_gap[k]).sum::<f64>() / m);
        out.grad_norm_sq
            .push(records.iter().map(|r| r.grad_norm_sq[k]).sum::<f64>() / m);
        out.consensus_err
            .push(records.iter().map(|r| r.consensus_err[k]).sum::<f64>() / m);
    }
    Ok(out)
}

/// Result of the transient-time estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransientEstimate {
    /// First recorded iteration whose trailing window satisfies the ratio
    /// condition; `None` when no fully covered window does.
    pub transient: Option<usize>,
    /// Window length in iterations.
    pub window: usize,
    pub threshold: f64,
    /// Pointwise `max over window of worst_gap / reference` per recorded
    /// iteration (diagnostic).
    pub ratios: Vec<f64>,
}

/// Estimate the transient time of a (seed-averaged) decentralized record
/// against a centralized reference record on the same iteration grid.
///
/// At recorded iteration `t` the condition is
/// `max { worst_gap(s) : t - window <= s <= t } <= threshold * reference(t)`
/// where `reference` is the `avg_gap` column of the reference record. The
/// estimate is the first recorded iteration whose trailing window is fully
/// covered by the record and satisfies the condition; `None` if no such
/// iteration exists.
pub fn estimate_transient(
    record: &TrajectoryRecord,
    reference: &TrajectoryRecord,
    window: usize,
    threshold: f64,
) -> Result<TransientEstimate> {
    if record.iters != reference.iters {
        return Err(Error::Contract(
            "record and reference must share the same iteration grid".into(),
        ));
    }
    if record.is_empty() {
        return Err(Error::Contract("cannot estimate transient on an empty record".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::Contract(format!("threshold must be positive, got {threshold}")));
    }
    let m = record.len();
    let first_iter = record.iters[0];
    let mut ratios = Vec::with_capacity(m);
    let mut transient: Option<usize> = None;
    let mut lo = 0usize; // window start index
    for k in 0..m {
        let t = record.iters[k];
        while record.iters[lo] + window < t {
            lo += 1;
        }
        let refv = reference.avg_gap[k];
        if !refv.is_finite() || refv <= 0.0 {
            return Err(Error::DegenerateReference(format!(
                "reference gap {refv} at iteration {t} cannot normalize ratios"
            )));
        }
        let worst = record.worst_gap[lo..=k]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let ratio = worst / refv;
        ratios.push(ratio);
        let covered = t >= first_iter + window;
        if transient.is_none() && covered && ratio <= threshold {
            transient = Some(t);
        }
    }
    Ok(TransientEstimate {
        transient,
        window,
        threshold,
        ratios,
    })
}

/// Window length used by the shipped experiments: 10% of the horizon,
/// at least 50 iterations.
pub fn default_window(horizon: usize) -> usize {
    (horizon / 10).max(50)
}

/// Asymptotic strongly convex upper bound `(sigma^2 / (n mu)) * gamma`.
pub fn ub_cvx(sigma_sq: f64, n: usize, mu: f64, gamma: f64) -> f64 {
    sigma_sq / (n as f64 * mu) * gamma
}

/// Nonconvex stationarity bound `sqrt(8 D L sigma^2 / (n T))` for the
/// horizon-tuned constant step size.
pub fn ub_ncvx(d0: f64, l: f64, sigma_sq: f64, n: usize, horizon: usize) -> f64 {
    (8.0 * d0 * l * sigma_sq / (n as f64 * horizon as f64)).sqrt()
}

/// Least-squares fit `y = intercept + slope * x` with coefficient of
/// determination.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    let m = xs.len();
    if m < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {m}")));
    }
    let mf = m as f64;
    let mx = xs.iter().sum::<f64>() / mf;
    let my = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx < 1e-300 {
        return Err(Error::Fit("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy < 1e-300 {
        1.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let e = y - (intercept + slope * x);
                e * e
            })
            .sum();
        1.0 - ss_res / syy
    };
    Ok(FitResult { slope, intercept, r2 })
}

/// Log-log rate fit over recorded iterations in `[t_min, t_max]`: slope is
/// the empirical decay exponent of the metric column.
pub fn rate_fit(iters: &[usize], values: &[f64], t_min: usize, t_max: usize) -> Result<FitResult> {
    if iters.len() != values.len() {
        return Err(Error::Contract("iters/values length mismatch".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in iters.iter().zip(values) {
        if t >= t_min.max(1) && t <= t_max && v > 0.0 && v.is_finite() {
            xs.push((t as f64).ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::Fit(format!(
            "only {} usable points in [{t_min}, {t_max}]",
            xs.len()
        )));
    }
    linear_fit(&xs, &ys)
}

/// Linear fit of measured transient times against a topology predictor such
/// as `sqrt(n) / rho`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    linear_fit(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(iters: &[usize], worst: impl Fn(usize) -> f64, avg: impl Fn(usize) -> f64) -> TrajectoryRecord {
        let mut r = TrajectoryRecord::new(RecordMeta::synthetic());
        for &t in iters {
            let w = worst(t);
            r.push(t, avg(t).min(w), w, 0.0, 0.0);
        }
        r
    }

    #[test]
    fn csv_round_trip_is_bit_faithful() {
        let iters: Vec<usize> = (0..50).map(|k| k * 7).collect();
        let r = synth(&iters, |t| 1.0 / (t as f64 + 1.37), |t| 0.5 / (t as f64 + 2.0));
        let text = r.to_csv();
        let back = TrajectoryRecord::from_csv(RecordMeta::synthetic(), &text).unwrap();
        assert_eq!(r.iters, back.iters);
        assert_eq!(r.avg_gap, back.avg_gap);
        assert_eq!(r.worst_gap, back.worst_gap);
        assert_eq!(text, back.to_csv());
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let err = TrajectoryRecord::from_csv(RecordMeta::synthetic(), "t,gap\n1,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn averaging_is_pointwise_mean() {
        let iters = [0usize, 10, 20];
        let a = synth(&iters, |t| t as f64, |t| t as f64 / 2.0);
        let b = synth(&iters, |t| 3.0 * t as f64, |t| t as f64);
        let m = average_records(&[a, b]).unwrap();
        assert_eq!(m.worst_gap, vec![0.0, 20.0, 40.0]);
        assert_eq!(m.avg_gap, vec![0.0, 7.5, 15.0]);
    }

    #[test]
    fn averaging_rejects_mismatched_grids() {
        let a = synth(&[0, 10], |_| 1.0, |_| 1.0);
        let b = synth(&[0, 20], |_| 1.0, |_| 1.0);
        assert!(average_records(&[a, b]).is_err());
    }

    #[test]
    fn transient_on_synthetic_ratio_curve() {
        // worst(t) = (1 + 400/t) * ref(t) / 8 with ref(t) = 1/t:
        // ratio(t) = (1 + 400/t)/8 crosses 1/4 at t = 400.
        let iters: Vec<usize> = (1..=2000).collect();
        let reference = synth(&iters, |t| 1.0 / t as f64, |t| 1.0 / t as f64);
        let worst =
            synth(&iters, |t| (1.0 + 400.0 / t as f64) / (8.0 * t as f64), |t| {
                1e-9 / t as f64
            });
        // window 0: pointwise ratio; the first t with ratio <= 1/4 is t = 400
        // (hitting the threshold exactly counts as satisfied).
        let est = estimate_transient(&worst, &reference, 0, 0.25).unwrap();
        assert_eq!(est.transient, Some(400));
    }

    #[test]
    fn transient_is_first_iteration_when_always_satisfied() {
        let iters: Vec<usize> = (1..=100).collect();
        let reference = synth(&iters, |t| 1.0 / t as f64, |t| 1.0 / t as f64);
        let worst = synth(&iters, |t| 0.1 / t as f64, |t| 0.05 / t as f64);
        let est = estimate_transient(&worst, &reference, 0, 0.25).unwrap();
        assert_eq!(est.transient, Some(1));
    }

    #[test]
    fn transient_none_when_still_violated() {
        let iters: Vec<usize> = (1..=100).collect();
        let reference = synth(&iters, |t| 1.0 / t as f64, |t| 1.0 / t as f64);
        let worst = synth(&iters, |t| 10.0 / t as f64, |t| 5.0 / t as f64);
        let est = estimate_transient(&worst, &reference, 10, 0.25).unwrap();
        assert_eq!(est.transient, None);
    }

    #[test]
    fn transient_window_uses_trailing_max() {
        // violated through t = 50, then clean; the trailing window keeps the
        // spike in view until it slides out
        let iters: Vec<usize> = (1..=300).collect();
        let reference = synth(&iters, |_| 1.0, |_| 1.0);
        let worst = synth(&iters, |t| if t <= 50 { 5.0 } else { 0.01 }, |_| 0.005);
        let est = estimate_transient(&worst, &reference, 30, 0.25).unwrap();
        // t = 50 stays inside [t-30, t] through t = 80
        assert_eq!(est.transient, Some(81));
    }

    #[test]
    fn degenerate_reference_is_an_error() {
        let iters: Vec<usize> = (1..=10).collect();
        let reference = synth(&iters, |_| 0.0, |_| 0.0);
        let worst = synth(&iters, |_| 1.0, |_| 0.5);
        let err = estimate_transient(&worst, &reference, 2, 0.25).unwrap_err();
        assert!(matches!(err, Error::DegenerateReference(_)));
    }

    #[test]
    fn rate_fit_recovers_power_law() {
        let iters: Vec<usize> = (1..=1000).collect();
        let values: Vec<f64> = iters.iter().map(|&t| 3.0 / t as f64).collect();
        let fit = rate_fit(&iters, &values, 10, 1000).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-9);
        assert!((fit.intercept - 3.0_f64.ln()).abs() < 1e-9);
        assert!(fit.r2 > 0.999999);

        let half: Vec<f64> = iters.iter().map(|&t| 2.0 / (t as f64).sqrt()).collect();
        let fit = rate_fit(&iters, &half, 10, 1000).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-9);
    }

    #[test]
    fn scaling_fit_on_exact_line() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|k| (k as f64, 100.0 + 40.0 * k as f64)).collect();
        let fit = scaling_fit(&pts).unwrap();
        assert!((fit.slope - 40.0).abs() < 1e-9);
        assert!((fit.intercept - 100.0).abs() < 1e-9);
        assert!(fit.r2 > 0.999999);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(rate_fit(&[1], &[1.0], 1, 10).is_err());
        assert!(scaling_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn upper_bound_formulas() {
        assert!((ub_cvx(4.0, 8, 0.5, 0.1) - 0.1).abs() < 1e-15);
        let v = ub_ncvx(2.0, 3.0, 4.0, 6, 100);
        assert!((v - (8.0 * 2.0 * 3.0 * 4.0 / 600.0_f64).sqrt()).abs() < 1e-15);
    }
}
