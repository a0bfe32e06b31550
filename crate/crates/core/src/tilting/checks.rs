//! Consistency checks along the quadratic-tilt flow nu_t = tau_{(t,0)} mu:
//! decay of the second moment with its derivative identity, the operator-norm
//! bound by the base trace, and stability of the subgaussian constant.

use super::{OPNORM_MAX_ITER, OPNORM_REL_TOL};
use crate::cloud::{Estimate, WeightedCloud};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{Measure, TiltParams};
use crate::psi::net::DirectionNet;
use crate::psi::sigma::sigma_sg;
use crate::psi::psi2_norm;
use crate::sampling;
use serde::Serialize;

/// One consecutive grid pair of the derivative check: the discrete slope of
/// the second moment against minus the average variance of |x|^2, with the
/// tolerance combining three standard errors and a trapezoid curvature term.
#[derive(Clone, Debug, Serialize)]
pub struct PairSlope {
    pub t_lo: f64,
    pub t_hi: f64,
    pub slope: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub ok: bool,
}

/// Report of `trace_decrease_check`.
#[derive(Clone, Debug, Serialize)]
pub struct TraceReport {
    pub ts: Vec<f64>,
    /// E|x|^2 under nu_t.
    pub second_moment: Vec<Estimate>,
    /// Var(|x|^2) under nu_t.
    pub sq_variance: Vec<Estimate>,
    pub cov_op_norm: Vec<f64>,
    /// Trace of the base cloud covariance, with the stderr of its estimate.
    pub base_trace: f64,
    pub base_trace_stderr: f64,
    /// E|x|^2 nonincreasing along the grid within 3 combined stderr.
    pub monotone: bool,
    /// Every ||Cov(nu_t)||_op <= base trace + 3 stderr.
    pub op_norm_bounded: bool,
    /// Every pair's discrete slope matches -Var(|x|^2) within tolerance.
    pub derivative_consistent: bool,
    pub pairs: Vec<PairSlope>,
    pub seed: u64,
}

/// Weighted variance of scalar values with a first-order standard error.
fn variance_with_stderr(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let var: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| {
            let d = v - mean;
            w * d * d
        })
        .sum();
    let se_sq: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| {
            let d = v - mean;
            let dev = d * d - var;
            w * w * dev * dev
        })
        .sum();
    (var, se_sq.sqrt())
}

/// Reweights the cloud along a grid of quadratic strengths and checks three
/// facts about the flow: the second moment decreases, the covariance operator
/// norm never exceeds the base trace, and the discrete time derivative of the
/// second moment equals -Var(|x|^2) along the flow.
///
/// All three hold exactly for the underlying measures; the report's booleans
/// state whether the sample versions hold within combined standard errors
/// (plus a trapezoid term for the derivative, which compares a finite slope
/// against the average of the endpoint derivatives).
pub fn trace_decrease_check(cloud: &WeightedCloud, ts: &[f64]) -> Result<TraceReport> {
    if cloud.n() == 0 {
        return Err(Error::invalid("trace decrease check needs a nonempty cloud"));
    }
    if ts.is_empty() {
        return Err(Error::invalid("trace decrease check needs a nonempty strength grid"));
    }
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("strength grid must be finite and >= 0"));
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("strength grid must be strictly increasing"));
    }
    let base_mean = cloud.mean();
    let base_cov = cloud.covariance();
    let d = cloud.dim();
    let base_trace: f64 = (0..d).map(|i| base_cov[[i, i]]).sum();
    let centered_sq: Vec<f64> = (0..cloud.n())
        .map(|i| {
            let row = cloud.points.row(i);
            (0..d).map(|j| (row[j] - base_mean[j]) * (row[j] - base_mean[j])).sum()
        })
        .collect();
    let base_trace_stderr = {
        let w = cloud.weights.as_slice().expect("contiguous weights");
        let se_sq: f64 = centered_sq
            .iter()
            .zip(w)
            .map(|(c, wi)| {
                let dev = c - base_trace;
                wi * wi * dev * dev
            })
            .sum();
        se_sq.sqrt()
    };

    let mut second_moment = Vec::with_capacity(ts.len());
    let mut sq_variance = Vec::with_capacity(ts.len());
    let mut cov_op_norm = Vec::with_capacity(ts.len());
    for &t in ts {
        let tilt = TiltParams { t, h: vec![0.0; d] };
        let rw = sampling::reweight_tilt(cloud, &tilt)?;
        let sq = rw.squared_norms();
        let w = rw.weights.as_slice().expect("contiguous weights");
        second_moment.push(rw.estimate_mean(&sq));
        let (var, var_se) = variance_with_stderr(&sq, w);
        sq_variance.push(Estimate { value: var, stderr: var_se, n_eff: rw.n_eff(), seed: rw.seed });
        let cov = rw.covariance();
        cov_op_norm.push(linalg::opnorm_psd(&cov.view(), OPNORM_REL_TOL, OPNORM_MAX_ITER));
    }

    let monotone = second_moment.windows(2).all(|w| {
        w[1].value <= w[0].value + 3.0 * (w[0].stderr + w[1].stderr)
    });
    let op_norm_bounded =
        cov_op_norm.iter().all(|op| *op <= base_trace + 3.0 * base_trace_stderr);

    let mut pairs = Vec::with_capacity(ts.len().saturating_sub(1));
    for i in 0..ts.len() - 1 {
        let dt = ts[i + 1] - ts[i];
        let slope = (second_moment[i + 1].value - second_moment[i].value) / dt;
        let (v0, v1) = (sq_variance[i].value, sq_variance[i + 1].value);
        let predicted = -(v0 + v1) / 2.0;
        // Three stderrs of both estimates plus a trapezoid curvature budget:
        // the discrete slope equals the interval average of the derivative,
        // which the endpoint average matches up to the derivative's swing.
        let tolerance = 3.0
            * ((second_moment[i].stderr + second_moment[i + 1].stderr) / dt
                + (sq_variance[i].stderr + sq_variance[i + 1].stderr) / 2.0)
            + 0.25 * (v1 - v0).abs();
        let ok = (slope - predicted).abs() <= tolerance;
        pairs.push(PairSlope { t_lo: ts[i], t_hi: ts[i + 1], slope, predicted, tolerance, ok });
    }
    let derivative_consistent = pairs.iter().all(|p| p.ok);

    Ok(TraceReport {
        ts: ts.to_vec(),
        second_moment,
        sq_variance,
        cov_op_norm,
        base_trace,
        base_trace_stderr,
        monotone,
        op_norm_bounded,
        derivative_consistent,
        pairs,
        seed: cloud.seed,
    })
}

/// Report of `perturbed_sigma_check`.
///
/// `sigma_sq` is the squared MGF-normalized subgaussian constant of nu_t
/// (the variance for Gaussian laws), estimated over a direction net. The
/// bound per t is min(base * (1 + t^2 m2 L^2), 1/t) where m2 = E|x|^2 and
/// L is the psi2 norm of |x| - E|x|; `fitted` is the largest ratio of the
/// estimate to its bound over the grid, the constant a caller freezes.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbedSigmaReport {
    pub ts: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub sigma_sq_stderr: Vec<f64>,
    pub base_sigma_sq: f64,
    pub base_sigma_sq_stderr: f64,
    /// E|x|^2 of the base cloud.
    pub mean_sq_norm: f64,
    /// psi2 norm of the norm fluctuation |x| - E|x| (may be infinite).
    pub norm_psi2: f64,
    pub bounds: Vec<f64>,
    pub ratios: Vec<f64>,
    pub fitted: f64,
    /// sigma_sq <= 1/(2t) + 3 stderr at every t > 0 (curvature cap).
    pub curvature_ok: bool,
    /// Lower-deviation tail of |x|^2: radii, empirical probabilities, and
    /// the largest c with exp(-c r^2 / (4 m2 L^2)) >= p at every radius.
    pub tail_r: Vec<f64>,
    pub tail_prob: Vec<f64>,
    pub tail_bound_c: f64,
    pub coarse_net: bool,
    pub seed: u64,
}

/// Fractions of E|x|^2 probed by the lower-deviation tail comparison.
const TAIL_FRACTIONS: [f64; 5] = [0.2, 0.35, 0.5, 0.65, 0.8];

/// Tracks the subgaussian constant along the quadratic-tilt flow against the
/// perturbation bound min(base * (1 + t^2 m2 L^2), 1/t) and the curvature cap
/// 1/(2t), and fits the lower-deviation tail constant of |x|^2.
///
/// Each t > 0 draws a fresh cloud of the tilted measure; t = 0 reuses the
/// base cloud, so its entry reproduces the base constant identically.
pub fn perturbed_sigma_check(
    measure: &Measure,
    ts: &[f64],
    n: usize,
    net_resolution: f64,
    seed: u64,
) -> Result<PerturbedSigmaReport> {
    if ts.is_empty() {
        return Err(Error::invalid("perturbed sigma check needs a nonempty strength grid"));
    }
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("strength grid must be finite and >= 0"));
    }
    let d = measure.dim();
    let net = DirectionNet::build(d, net_resolution, seed)?;
    let base = sampling::sample(measure, &TiltParams::none(d), n, seed)?;
    let base_sg = sigma_sg(&base, &net)?;
    let base_sigma_sq = base_sg.sigma_tilde.value * base_sg.sigma_tilde.value;
    let base_sigma_sq_stderr = 2.0 * base_sg.sigma_tilde.value * base_sg.sigma_tilde.stderr;
    let mut coarse_net = base_sg.coarse_net;

    let sq = base.squared_norms();
    let w = base.weights.as_slice().expect("contiguous weights");
    let mean_sq_norm: f64 = sq.iter().zip(w).map(|(s, wi)| s * wi).sum();
    let norms: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    let mean_norm: f64 = norms.iter().zip(w).map(|(r, wi)| r * wi).sum();
    let centered_norms: Vec<f64> = norms.iter().map(|r| r - mean_norm).collect();
    let norm_psi2 = psi2_norm(&centered_norms, w, seed)?.value;

    let mut sigma_sq = Vec::with_capacity(ts.len());
    let mut sigma_sq_stderr = Vec::with_capacity(ts.len());
    let mut bounds = Vec::with_capacity(ts.len());
    let mut ratios = Vec::with_capacity(ts.len());
    let mut fitted: f64 = 0.0;
    let mut curvature_ok = true;
    for (k, &t) in ts.iter().enumerate() {
        let (s_sq, s_se, coarse) = if t == 0.0 {
            (base_sigma_sq, base_sigma_sq_stderr, base_sg.coarse_net)
        } else {
            let pseed = seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let tilt = TiltParams { t, h: vec![0.0; d] };
            let cloud = sampling::sample(measure, &tilt, n, pseed)?;
            let sg = sigma_sg(&cloud, &net)?;
            (
                sg.sigma_tilde.value * sg.sigma_tilde.value,
                2.0 * sg.sigma_tilde.value * sg.sigma_tilde.stderr,
                sg.coarse_net,
            )
        };
        coarse_net = coarse_net || coarse;
        // Avoid 0 * inf when the norm fluctuation is not subgaussian.
        let growth = if t == 0.0 {
            1.0
        } else {
            1.0 + t * t * mean_sq_norm * norm_psi2 * norm_psi2
        };
        let bound = (base_sigma_sq * growth).min(if t > 0.0 { 1.0 / t } else { f64::INFINITY });
        let ratio = s_sq / bound;
        if ratio > fitted {
            fitted = ratio;
        }
        if t > 0.0 && s_sq > 1.0 / (2.0 * t) + 3.0 * s_se {
            curvature_ok = false;
        }
        sigma_sq.push(s_sq);
        sigma_sq_stderr.push(s_se);
        bounds.push(bound);
        ratios.push(ratio);
    }

    let mut tail_r = Vec::with_capacity(TAIL_FRACTIONS.len());
    let mut tail_prob = Vec::with_capacity(TAIL_FRACTIONS.len());
    let mut tail_bound_c = f64::INFINITY;
    let tail_scale = 4.0 * mean_sq_norm * norm_psi2 * norm_psi2;
    for frac in TAIL_FRACTIONS {
        let r = frac * mean_sq_norm;
        let p: f64 = sq
            .iter()
            .zip(w)
            .filter(|(s, _)| **s <= mean_sq_norm - r)
            .map(|(_, wi)| wi)
            .sum();
        if p > 0.0 && tail_scale.is_finite() {
            let c = -p.ln() * tail_scale / (r * r);
            if c < tail_bound_c {
                tail_bound_c = c;
            }
        }
        tail_r.push(r);
        tail_prob.push(p);
    }

    Ok(PerturbedSigmaReport {
        ts: ts.to_vec(),
        sigma_sq,
        sigma_sq_stderr,
        base_sigma_sq,
        base_sigma_sq_stderr,
        mean_sq_norm,
        norm_psi2,
        bounds,
        ratios,
        fitted,
        curvature_ok,
        tail_r,
        tail_prob,
        tail_bound_c,
        coarse_net,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureSpec;
    use ndarray::Array2;

    #[test]
    fn gaussian_second_moment_follows_closed_form() {
        let m = Measure::compile(&MeasureSpec::standard_gaussian(8)).unwrap();
        let cloud = sampling::sample(&m, &TiltParams::none(8), 60_000, 103).unwrap();
        let ts = [0.0, 0.25, 0.5, 1.0];
        let report = trace_decrease_check(&cloud, &ts).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            let expected = 8.0 / (1.0 + 2.0 * t);
            let est = &report.second_moment[i];
            assert!(
                (est.value - expected).abs() <= 3.0 * est.stderr + 0.01 * expected,
                "second moment {} at t = {t} misses n/(1+2t) = {expected}",
                est.value
            );
        }
        for w in report.second_moment.windows(2) {
            assert!(
                w[1].value < w[0].value,
                "gaussian second moment must strictly decrease along the flow"
            );
        }
        assert!(report.monotone);
        assert!(report.op_norm_bounded, "op norms {:?} vs trace {}", report.cov_op_norm, report.base_trace);
        assert!(
            report.derivative_consistent,
            "slope checks failed: {:?}",
            report.pairs
        );
    }

    #[test]
    fn point_mass_flow_is_identically_zero() {
        let points = Array2::from_elem((500, 2), 0.0);
        let cloud = WeightedCloud::new_uniform(points, 1, "point_mass");
        let report = trace_decrease_check(&cloud, &[0.0, 0.5, 1.0]).unwrap();
        for est in &report.second_moment {
            assert_eq!(est.value, 0.0, "point mass at the origin has no second moment");
        }
        for op in &report.cov_op_norm {
            assert_eq!(*op, 0.0);
        }
        assert!(report.monotone && report.op_norm_bounded && report.derivative_consistent);
    }

    #[test]
    fn ball_derivative_check_passes() {
        let m = Measure::compile(&MeasureSpec::UniformBall { radius: 1.0, dim: 8 }).unwrap();
        let cloud = sampling::sample(&m, &TiltParams::none(8), 60_000, 107).unwrap();
        let report = trace_decrease_check(&cloud, &[0.0, 0.5, 1.0]).unwrap();
        assert!(
            report.derivative_consistent,
            "two estimates of the flow derivative disagree: {:?}",
            report.pairs
        );
        assert!(report.monotone);
    }

    #[test]
    fn strength_grid_must_increase() {
        let points = Array2::from_elem((50, 1), 1.0);
        let cloud = WeightedCloud::new_uniform(points, 1, "test");
        assert!(trace_decrease_check(&cloud, &[0.5, 0.5]).is_err());
        assert!(trace_decrease_check(&cloud, &[]).is_err());
        assert!(trace_decrease_check(&cloud, &[-0.5, 0.5]).is_err());
    }

    #[test]
    fn gaussian_perturbed_constant_stays_within_factor_four() {
        let m = Measure::compile(&MeasureSpec::standard_gaussian(3)).unwrap();
        let report = perturbed_sigma_check(&m, &[0.0, 0.5, 1.0, 2.0], 30_000, 0.4, 109).unwrap();
        assert!(
            (report.ratios[0] - 1.0).abs() <= 1e-12,
            "t = 0 reuses the base cloud, so its ratio is exactly 1, got {}",
            report.ratios[0]
        );
        assert!(
            report.fitted <= 4.0,
            "gaussian perturbation ratio {} should stay below 4",
            report.fitted
        );
        assert!(report.curvature_ok, "sigma_sq {:?} must respect 1/(2t)", report.sigma_sq);
        assert!(
            report.tail_bound_c > 0.3,
            "lower-deviation tail constant {} too small",
            report.tail_bound_c
        );
    }

    #[test]
    fn cube_constant_shrinks_under_strong_tilts() {
        let m = Measure::compile(&MeasureSpec::unit_variance_cube(4)).unwrap();
        let report = perturbed_sigma_check(&m, &[0.0, 1.0, 4.0], 30_000, 0.45, 113).unwrap();
        assert!(report.curvature_ok, "sigma_sq {:?} must respect 1/(2t)", report.sigma_sq);
        assert!(report.fitted <= 4.0, "cube perturbation ratio {} should stay below 4", report.fitted);
        let last = *report.sigma_sq.last().unwrap();
        assert!(
            last <= 1.0 / 8.0 + 3.0 * report.sigma_sq_stderr.last().unwrap(),
            "strong tilt should contract the constant to 1/(2t): {last}"
        );
    }
}
