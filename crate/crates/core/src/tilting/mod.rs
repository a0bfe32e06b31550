//! Exponential-tilt calculus on weighted clouds.
//!
//! A tilt (t, h) multiplies a base density by exp(-t|x|^2 + h.x). This module
//! estimates the objects that calculus produces from samples: the log-Laplace
//! transform and its derivatives (tilted barycenter and covariance),
//! covariance stability scans over tilt grids, inversion of the shift map
//! h0 -> h0 + 2t bar(tau_{h0} mu), decay of the second moment along the
//! quadratic-tilt flow, and the weight-overhead ratio that prices importance
//! reweighting toward a quadratic tilt.
//!
//! Reweighting a fixed cloud is exact in expectation but loses effective
//! sample size as the tilt strengthens. Operations on clouds therefore reject
//! degenerate weights with an error that points to direct tilted sampling,
//! while the scan operations sidestep the issue by drawing a fresh cloud from
//! the tilted measure at every grid point.

mod checks;
mod invert;
mod scan;

pub use checks::{
    perturbed_sigma_check, trace_decrease_check, PairSlope, PerturbedSigmaReport, TraceReport,
};
pub use invert::{invert_tilt_map, TiltInverse};
pub use scan::{
    log_spaced_magnitudes, strong_tilt_scan, tilt_stability_scan, HStrategy, ScanPoint,
    TiltScanReport,
};

use crate::cloud::{Estimate, WeightedCloud};
use crate::error::{Error, Result};
use crate::measures::TiltParams;
use crate::sampling::{self, DEFAULT_NEFF_FLOOR};
use ndarray::Array2;

/// Power-method settings shared by every covariance operator norm here.
pub(crate) const OPNORM_REL_TOL: f64 = 1e-8;
pub(crate) const OPNORM_MAX_ITER: usize = 10_000;

/// Empirical log-Laplace transform: log of the weighted mean of exp(h.x).
///
/// Exactly 0 at h = 0. The standard error is the delta-method error of the
/// weighted mean; `n_eff` is the effective sample size of the tilted weights
/// w_i exp(h.x_i), and the transform is rejected as degenerate when it falls
/// below the reweighting floor (sample the tilted measure directly instead).
pub fn log_laplace(cloud: &WeightedCloud, h: &[f64]) -> Result<Estimate> {
    if cloud.n() == 0 {
        return Err(Error::invalid("log-Laplace transform of an empty cloud"));
    }
    if h.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), got: h.len() });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("log-Laplace argument must be finite"));
    }
    if h.iter().all(|&v| v == 0.0) {
        return Ok(Estimate { value: 0.0, stderr: 0.0, n_eff: cloud.n_eff(), seed: cloud.seed });
    }
    let proj = cloud.project(h);
    let w = cloud.weights.as_slice().expect("contiguous weights");
    // Shift by the top exponent so the largest term is exp(0).
    let shift = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut mass = 0.0;
    for (p, wi) in proj.iter().zip(w) {
        mass += wi * (p - shift).exp();
    }
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::invalid("log-Laplace mass vanished under the weights"));
    }
    let mut wsq = 0.0;
    let mut var = 0.0;
    for (p, wi) in proj.iter().zip(w) {
        let e = (p - shift).exp();
        let tw = wi * e / mass;
        wsq += tw * tw;
        let dev = e - mass;
        var += wi * wi * dev * dev;
    }
    let n_eff = if wsq > 0.0 { 1.0 / wsq } else { 0.0 };
    if n_eff < DEFAULT_NEFF_FLOOR {
        return Err(Error::DegenerateWeights { n_eff, floor: DEFAULT_NEFF_FLOOR });
    }
    Ok(Estimate { value: mass.ln() + shift, stderr: var.sqrt() / mass, n_eff, seed: cloud.seed })
}

/// First two moments of the (t, h)-tilt of the cloud's law.
#[derive(Clone, Debug)]
pub struct TiltMoments {
    pub barycenter: Vec<f64>,
    /// Delta-method standard error of each barycenter coordinate.
    pub barycenter_stderr: Vec<f64>,
    pub covariance: Array2<f64>,
    /// Effective sample size of the reweighted cloud behind both moments.
    pub n_eff: f64,
    pub seed: u64,
}

/// Barycenter and covariance of the tilted law, by importance reweighting.
///
/// The identity tilt returns the cloud's own moments exactly. The gradient of
/// the sample log-Laplace transform in h equals this barycenter at (0, h),
/// and its Hessian equals the covariance; the unit tests pin that identity.
pub fn tilt_moments(cloud: &WeightedCloud, tilt: &TiltParams) -> Result<TiltMoments> {
    let rw = sampling::reweight_tilt(cloud, tilt)?;
    let mean = rw.mean();
    let covariance = rw.covariance();
    let w = rw.weights.as_slice().expect("contiguous weights");
    let d = rw.dim();
    let mut stderr = vec![0.0; d];
    for i in 0..rw.n() {
        let row = rw.points.row(i);
        for j in 0..d {
            let dev = row[j] - mean[j];
            stderr[j] += w[i] * w[i] * dev * dev;
        }
    }
    for s in stderr.iter_mut() {
        *s = s.sqrt();
    }
    Ok(TiltMoments {
        barycenter: mean.to_vec(),
        barycenter_stderr: stderr,
        covariance,
        n_eff: rw.n_eff(),
        seed: rw.seed,
    })
}

/// Second-moment overhead of the quadratic tilt weight w = exp(-t|x|^2):
/// E[w^2] / E[w]^2 over the cloud.
///
/// This prices reweighting toward the t-tilt (n_eff shrinks by roughly this
/// factor) and equals 1 + chi-square divergence of the tilted law from the
/// base law. Jensen's inequality on the empirical measure makes the estimate
/// >= 1 deterministically, and t = 0 returns exactly 1.
pub fn tilt_weight_overhead(cloud: &WeightedCloud, t: f64) -> Result<Estimate> {
    if cloud.n() == 0 {
        return Err(Error::invalid("weight overhead of an empty cloud"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("tilt strength must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(Estimate { value: 1.0, stderr: 0.0, n_eff: cloud.n_eff(), seed: cloud.seed });
    }
    let sq = cloud.squared_norms();
    let w = cloud.weights.as_slice().expect("contiguous weights");
    // Shift |x|^2 by its minimum: both means pick up a factor that cancels
    // exactly in A / B^2, and the largest term becomes exp(0).
    let s_min = sq.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut a_mean = 0.0;
    let mut b_mean = 0.0;
    for (s, wi) in sq.iter().zip(w) {
        let u = s - s_min;
        a_mean += wi * (-2.0 * t * u).exp();
        b_mean += wi * (-t * u).exp();
    }
    if !(b_mean > 0.0) {
        return Err(Error::invalid("all tilt weights vanished"));
    }
    let value = a_mean / (b_mean * b_mean);
    // n_eff of the doubled-strength weights, the more degenerate of the two.
    let mut wsq = 0.0;
    let mut var = 0.0;
    for (s, wi) in sq.iter().zip(w) {
        let u = s - s_min;
        let a = (-2.0 * t * u).exp();
        let b = (-t * u).exp();
        let tw = wi * a / a_mean;
        wsq += tw * tw;
        // Influence of point i on log(A/B^2), scaled by the ratio itself.
        let g = (a - a_mean) / a_mean - 2.0 * (b - b_mean) / b_mean;
        var += wi * wi * g * g;
    }
    let n_eff = if wsq > 0.0 { 1.0 / wsq } else { 0.0 };
    if n_eff < DEFAULT_NEFF_FLOOR {
        return Err(Error::DegenerateWeights { n_eff, floor: DEFAULT_NEFF_FLOOR });
    }
    Ok(Estimate { value, stderr: value * var.sqrt(), n_eff, seed: cloud.seed })
}
