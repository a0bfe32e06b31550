//! Covariance stability scans over grids of exponential tilts.
//!
//! The scans estimate sup over tilts of the largest directional standard
//! deviation of the tilted measure: `beta_hat` over pure shifts (t = 0) and
//! `m_hat` over the full (t, h) grid. Both are suprema over a finite grid of
//! a quantity defined as a supremum over all of R^n, so they are LOWER bounds
//! by construction; the report keeps every grid point so callers can judge
//! how the supremum was approached. Each grid point draws a fresh cloud from
//! the tilted measure directly, so strong tilts cost sampling effort rather
//! than effective sample size; per-point sampling failures are recorded in
//! the report instead of aborting the scan.

use super::{OPNORM_MAX_ITER, OPNORM_REL_TOL};
use crate::cloud::WeightedCloud;
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{Measure, TiltParams};
use crate::rng;
use crate::sampling;
use rayon::prelude::*;
use serde::Serialize;

/// Effective sample sizes below this leave per-point moments untrustworthy;
/// the point still contributes to the suprema but carries a flag.
const LOW_NEFF_FLAG: f64 = 1_000.0;

/// How the shift vectors h of a scan are generated. Every strategy also
/// scans h = 0, which anchors `beta_hat` at the untilted covariance.
#[derive(Clone, Debug)]
pub enum HStrategy {
    /// Explicit ray directions (normalized internally), each scanned over
    /// the given magnitudes.
    RadialRays { directions: Vec<Vec<f64>>, magnitudes: Vec<f64> },
    /// Seeded uniform random unit directions over the given magnitudes.
    RandomDirections { count: usize, magnitudes: Vec<f64> },
}

/// Log-spaced magnitude ladder for scan strategies: `count` values from `lo`
/// to `hi` inclusive, multiplicatively spaced.
pub fn log_spaced_magnitudes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2, "need 0 < lo < hi and count >= 2");
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|k| lo * ratio.powi(k as i32)).collect()
}

impl HStrategy {
    fn shifts(&self, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let (directions, magnitudes): (Vec<Vec<f64>>, &[f64]) = match self {
            HStrategy::RadialRays { directions, magnitudes } => {
                if directions.is_empty() {
                    return Err(Error::invalid("scan needs at least one ray direction"));
                }
                let mut normed = Vec::with_capacity(directions.len());
                for d in directions {
                    if d.len() != dim {
                        return Err(Error::DimensionMismatch { expected: dim, got: d.len() });
                    }
                    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !(norm > 0.0) || !norm.is_finite() {
                        return Err(Error::invalid("ray directions must be nonzero and finite"));
                    }
                    normed.push(d.iter().map(|v| v / norm).collect());
                }
                (normed, magnitudes)
            }
            HStrategy::RandomDirections { count, magnitudes } => {
                if *count == 0 {
                    return Err(Error::invalid("scan needs at least one random direction"));
                }
                let mut r = rng::derived_rng(seed, 17);
                ((0..*count).map(|_| rng::unit_vector(&mut r, dim)).collect(), magnitudes)
            }
        };
        if magnitudes.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::invalid("scan magnitudes must be finite and positive"));
        }
        let mut shifts = vec![vec![0.0; dim]];
        for dir in &directions {
            for m in magnitudes {
                shifts.push(dir.iter().map(|v| v * m).collect());
            }
        }
        Ok(shifts)
    }
}

/// One scanned tilt: tilted moments or the sampling failure that replaced
/// them. `sigma` is the largest directional standard deviation, the square
/// root of the covariance operator norm.
#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub tilt: TiltParams,
    pub barycenter: Vec<f64>,
    pub cov_op_norm: f64,
    pub cov_trace: f64,
    pub sigma: f64,
    pub sigma_stderr: f64,
    pub n_eff: f64,
    pub low_n_eff: bool,
    pub error: Option<String>,
}

/// Result of a stability scan: every grid point plus the running suprema.
///
/// `beta_hat` is the supremum of `sigma` over the t = 0 slice and `m_hat`
/// over the whole grid; both are lower bounds for the corresponding suprema
/// over all shifts, and `m_hat >= beta_hat` holds by construction whenever
/// the t = 0 slice produced any usable point.
#[derive(Clone, Debug, Serialize)]
pub struct TiltScanReport {
    pub points: Vec<ScanPoint>,
    pub beta_hat: f64,
    pub beta_arg: Option<TiltParams>,
    pub beta_stderr: f64,
    pub m_hat: f64,
    pub m_arg: Option<TiltParams>,
    pub m_stderr: f64,
    pub failures: usize,
    pub low_n_eff_points: usize,
    pub n_per_point: usize,
    pub seed: u64,
}

impl TiltScanReport {
    /// Largest sigma among usable points at the given t (within one ulp).
    pub fn slice_sup(&self, t: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.error.is_none() && p.tilt.t == t)
            .map(|p| p.sigma)
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.max(s))))
    }
}

/// Stability constant over pure shifts: scans tau_h(mu) for h on the
/// strategy's grid and reports sup ||Cov||_op^{1/2} with its argument.
pub fn tilt_stability_scan(
    measure: &Measure,
    strategy: &HStrategy,
    n_per_point: usize,
    seed: u64,
) -> Result<TiltScanReport> {
    let shifts = strategy.shifts(measure.dim(), seed)?;
    let grid: Vec<TiltParams> = shifts.into_iter().map(|h| TiltParams { t: 0.0, h }).collect();
    Ok(scan_grid(measure, grid, n_per_point, seed))
}

/// Strong stability constant over the product grid of quadratic strengths
/// and shifts. The t = 0 slice is always included (inserted if absent) so
/// the report contains its own pure-shift anchor.
pub fn strong_tilt_scan(
    measure: &Measure,
    ts: &[f64],
    strategy: &HStrategy,
    n_per_point: usize,
    seed: u64,
) -> Result<TiltScanReport> {
    if ts.is_empty() {
        return Err(Error::invalid("strong scan needs a nonempty strength grid"));
    }
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("strong scan strengths must be finite and >= 0"));
    }
    let mut ts_sorted = ts.to_vec();
    ts_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite strengths"));
    ts_sorted.dedup();
    if ts_sorted[0] != 0.0 {
        ts_sorted.insert(0, 0.0);
    }
    let shifts = strategy.shifts(measure.dim(), seed)?;
    let mut grid = Vec::with_capacity(ts_sorted.len() * shifts.len());
    for &t in &ts_sorted {
        for h in &shifts {
            grid.push(TiltParams { t, h: h.clone() });
        }
    }
    Ok(scan_grid(measure, grid, n_per_point, seed))
}

fn scan_grid(measure: &Measure, grid: Vec<TiltParams>, n: usize, seed: u64) -> TiltScanReport {
    let points: Vec<ScanPoint> = grid
        .into_par_iter()
        .enumerate()
        .map(|(k, tilt)| {
            let pseed = seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            match sampling::sample(measure, &tilt, n, pseed) {
                Ok(cloud) => point_from_cloud(tilt, &cloud),
                Err(e) => ScanPoint {
                    tilt,
                    barycenter: Vec::new(),
                    cov_op_norm: f64::NAN,
                    cov_trace: f64::NAN,
                    sigma: f64::NAN,
                    sigma_stderr: f64::NAN,
                    n_eff: 0.0,
                    low_n_eff: true,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut beta_hat = f64::NAN;
    let mut beta_arg = None;
    let mut beta_stderr = f64::NAN;
    let mut m_hat = f64::NAN;
    let mut m_arg = None;
    let mut m_stderr = f64::NAN;
    let mut failures = 0;
    let mut low = 0;
    for p in &points {
        if p.error.is_some() {
            failures += 1;
            continue;
        }
        if p.low_n_eff {
            low += 1;
        }
        if p.tilt.t == 0.0 && !(p.sigma <= beta_hat) {
            beta_hat = p.sigma;
            beta_arg = Some(p.tilt.clone());
            beta_stderr = p.sigma_stderr;
        }
        if !(p.sigma <= m_hat) {
            m_hat = p.sigma;
            m_arg = Some(p.tilt.clone());
            m_stderr = p.sigma_stderr;
        }
    }
    TiltScanReport {
        points,
        beta_hat,
        beta_arg,
        beta_stderr,
        m_hat,
        m_arg,
        m_stderr,
        failures,
        low_n_eff_points: low,
        n_per_point: n,
        seed,
    }
}

fn point_from_cloud(tilt: TiltParams, cloud: &WeightedCloud) -> ScanPoint {
    let d = cloud.dim();
    let mean = cloud.mean();
    let cov = cloud.covariance();
    let (op, top) = linalg::top_eigenpair_psd(&cov.view(), OPNORM_REL_TOL, OPNORM_MAX_ITER);
    let trace = (0..d).map(|i| cov[[i, i]]).sum();
    let sigma = op.sqrt();
    // Standard error of the directional sd along the top eigendirection.
    let w = cloud.weights.as_slice().expect("contiguous weights");
    let center = top.dot(&mean);
    let mut var_se_sq = 0.0;
    for i in 0..cloud.n() {
        let p = cloud.points.row(i).dot(&top) - center;
        let dev = p * p - op;
        var_se_sq += w[i] * w[i] * dev * dev;
    }
    let sigma_stderr = if op > 0.0 { var_se_sq.sqrt() / (2.0 * sigma) } else { 0.0 };
    let n_eff = cloud.n_eff();
    ScanPoint {
        tilt,
        barycenter: mean.to_vec(),
        cov_op_norm: op,
        cov_trace: trace,
        sigma,
        sigma_stderr,
        n_eff,
        low_n_eff: n_eff < LOW_NEFF_FLAG,
        error: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{family1d, MeasureSpec};

    fn axes(dim: usize) -> Vec<Vec<f64>> {
        (0..dim)
            .map(|j| {
                let mut e = vec![0.0; dim];
                e[j] = 1.0;
                e
            })
            .collect()
    }

    #[test]
    fn gaussian_covariance_is_tilt_invariant() {
        let m = Measure::compile(&MeasureSpec::standard_gaussian(3)).unwrap();
        let mut dirs = axes(3);
        dirs.push(vec![1.0, 1.0, 1.0]);
        let strategy = HStrategy::RadialRays { directions: dirs, magnitudes: vec![0.5, 1.0, 2.0] };
        let report = tilt_stability_scan(&m, &strategy, 25_000, 71).unwrap();
        assert_eq!(report.failures, 0, "gaussian shifts sample in closed form");
        for p in &report.points {
            assert!(
                (p.sigma - 1.0).abs() <= 0.05,
                "pure shifts preserve gaussian covariance; sigma = {} at h = {:?}",
                p.sigma,
                p.tilt.h
            );
        }
        assert!(
            (report.beta_hat - 1.0).abs() <= 0.05,
            "gaussian stability constant {} should be 1 within 5%",
            report.beta_hat
        );
    }

    #[test]
    fn cube_stability_sits_between_one_and_support_bound() {
        let m = Measure::compile(&MeasureSpec::unit_variance_cube(2)).unwrap();
        let strategy = HStrategy::RadialRays {
            directions: axes(2),
            magnitudes: log_spaced_magnitudes(0.25, 4.0, 5),
        };
        let report = tilt_stability_scan(&m, &strategy, 30_000, 73).unwrap();
        let bound = 3f64.sqrt();
        assert!(
            report.beta_hat >= 0.97,
            "the h = 0 point already gives sigma 1, got beta_hat {}",
            report.beta_hat
        );
        assert!(
            report.beta_hat <= bound * 1.02,
            "no tilt of a cube exceeds the support half-width; beta_hat {}",
            report.beta_hat
        );
    }

    #[test]
    fn exponential_products_blow_up_along_the_negative_ray() {
        // Standardized left-exponential axes: the tilted variance along
        // h = -m scales like 1/(1 - m)^2 per axis, unbounded as m -> 1.
        let (_, spec) = family1d::one_dim_family()
            .into_iter()
            .find(|(name, _)| name == "exp_left")
            .expect("family contains the left exponential");
        let product = MeasureSpec::Product { factors: vec![spec.clone(), spec] };
        let m = Measure::compile(&product).unwrap();
        let inv = 0.5f64.sqrt();
        let strategy = HStrategy::RadialRays {
            directions: vec![vec![-inv, -inv]],
            magnitudes: vec![0.4, 0.8, 1.2],
        };
        let report = tilt_stability_scan(&m, &strategy, 30_000, 79).unwrap();
        assert_eq!(report.failures, 0, "product tilts sample by exact quadrature inversion");
        let sigmas: Vec<f64> =
            report.points.iter().filter(|p| p.tilt.h[0] != 0.0).map(|p| p.sigma).collect();
        assert_eq!(sigmas.len(), 3);
        assert!(
            sigmas[0] < sigmas[1] && sigmas[1] < sigmas[2],
            "directional sd should grow monotonically along the ray: {sigmas:?}"
        );
        assert!(
            sigmas[2] > 3.0,
            "sd {} at the strongest shift should dwarf the base sd 1",
            sigmas[2]
        );
        let arg = report.beta_arg.as_ref().expect("scan produced points");
        assert!(
            arg.h.iter().map(|v| v * v).sum::<f64>().sqrt() > 1.1,
            "supremum should sit at the strongest scanned shift, got {:?}",
            arg.h
        );
    }

    #[test]
    fn strong_scan_includes_zero_slice_and_dominates() {
        let m = Measure::compile(&MeasureSpec::standard_gaussian(2)).unwrap();
        let strategy =
            HStrategy::RadialRays { directions: axes(2), magnitudes: vec![0.5, 1.0] };
        // No zero in the strength grid: the scan must insert it.
        let report = strong_tilt_scan(&m, &[0.5, 1.0], &strategy, 25_000, 83).unwrap();
        assert!(
            report.points.iter().any(|p| p.tilt.t == 0.0),
            "strong scan must include the t = 0 anchor slice"
        );
        assert!(
            report.m_hat >= report.beta_hat - 1e-12,
            "full supremum {} cannot fall below its t = 0 slice {}",
            report.m_hat,
            report.beta_hat
        );
        assert!(
            (report.m_hat - 1.0).abs() <= 0.05,
            "gaussian strong constant {} should be 1 within 5% (supremum at t = 0)",
            report.m_hat
        );
    }

    #[test]
    fn cube_strong_scan_respects_curvature_cap() {
        // The (t, h)-tilted cube is 2t-strongly log-concave, so every
        // directional variance is at most 1/(2t) (Brascamp-Lieb); it also
        // stays below the pure-shift supremum squared.
        let m = Measure::compile(&MeasureSpec::unit_variance_cube(16)).unwrap();
        let mut dirs = axes(16);
        dirs.truncate(2);
        dirs.push(vec![1.0; 16]);
        let strategy = HStrategy::RadialRays { directions: dirs, magnitudes: vec![0.3, 0.8] };
        let ts = [0.25, 0.5, 1.0];
        let report = strong_tilt_scan(&m, &ts, &strategy, 20_000, 89).unwrap();
        assert_eq!(report.failures, 0);
        let beta_sq = report.beta_hat * report.beta_hat;
        for &t in &ts {
            let sup = report.slice_sup(t).expect("slice has points");
            let cap = beta_sq.min(1.0 / (2.0 * t));
            assert!(
                sup * sup <= cap * 1.10 + 3.0 * report.m_stderr,
                "slice supremum {}^2 at t = {t} exceeds the curvature cap {cap}",
                sup
            );
        }
    }

    #[test]
    fn random_direction_strategy_is_deterministic() {
        let m = Measure::compile(&MeasureSpec::standard_gaussian(3)).unwrap();
        let strategy = HStrategy::RandomDirections { count: 4, magnitudes: vec![0.5, 1.5] };
        let a = tilt_stability_scan(&m, &strategy, 4_000, 97).unwrap();
        let b = tilt_stability_scan(&m, &strategy, 4_000, 97).unwrap();
        assert_eq!(a.points.len(), 9, "4 directions x 2 magnitudes plus the zero shift");
        assert_eq!(
            a.beta_hat.to_bits(),
            b.beta_hat.to_bits(),
            "same seed must reproduce the scan bitwise"
        );
    }

    #[test]
    fn failed_points_are_recorded_not_fatal() {
        // Shift tilts of a ball sample by importance reweighting; an extreme
        // magnitude collapses n_eff and must be recorded, not propagated.
        let m = Measure::compile(&MeasureSpec::UniformBall { radius: 1.0, dim: 4 }).unwrap();
        let strategy = HStrategy::RadialRays {
            directions: vec![vec![1.0, 0.0, 0.0, 0.0]],
            magnitudes: vec![0.5, 40.0],
        };
        let report = tilt_stability_scan(&m, &strategy, 8_000, 101).unwrap();
        assert!(
            report.failures >= 1,
            "the magnitude-40 shift should degenerate the importance weights"
        );
        assert!(
            report.beta_hat.is_finite() && report.beta_hat > 0.0,
            "surviving points still anchor the supremum, got {}",
            report.beta_hat
        );
        let failed = report.points.iter().find(|p| p.error.is_some()).unwrap();
        assert!(
            failed.error.as_ref().unwrap().contains("degenerate"),
            "failure should carry the degeneracy diagnostic: {:?}",
            failed.error
        );
    }

    #[test]
    fn log_spaced_ladder_is_multiplicative() {
        let mags = log_spaced_magnitudes(0.1, 10.0, 5);
        assert_eq!(mags.len(), 5);
        assert!((mags[0] - 0.1).abs() < 1e-12 && (mags[4] - 10.0).abs() < 1e-9);
        for k in 1..4 {
            let r0 = mags[k] / mags[k - 1];
            let r1 = mags[k + 1] / mags[k];
            assert!((r0 - r1).abs() < 1e-9, "ratios should be constant: {mags:?}");
        }
    }
}
