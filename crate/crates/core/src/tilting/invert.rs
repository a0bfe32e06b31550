//! Inversion of the tilt shift map.
//!
//! For a quadratic strength t, the pure shift h0 and the combined tilt
//! (t, h) are linked by F(h0) = h0 + 2t * bar(tau_{h0} mu) = h, where bar is
//! the barycenter of the pure-shift tilt. F has Jacobian I + 2t Cov >= I, so
//! the damped fixed-point update h0 <- h0 + step (h - F(h0)) with step
//! 1/(1 + 2t lambda_max) contracts; lambda_max is the covariance operator
//! norm at the current iterate.
//!
//! Barycenters come from the cheapest exact backend available: the Gaussian
//! closed form bar = m + S h0, per-axis quadrature for coordinate-separable
//! measures (residuals down to the 1e-8 scale are then meaningful), and
//! otherwise fresh Monte Carlo clouds whose size grows with the iteration
//! count so late iterations average away the moment noise. With the Monte
//! Carlo backend the achievable tolerance is the moment noise floor, not
//! machine precision.

use super::{OPNORM_MAX_ITER, OPNORM_REL_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{Measure, MeasureSpec, TiltParams};
use crate::sampling;
use ndarray::{Array1, Array2};

/// Nodes per axis for the quadrature backend.
const AXIS_NODES: usize = 200_001;
/// Unbounded axes reject a shift whose mass runs into the grid edge: the
/// edge log weight must sit at least this far below the peak.
const EDGE_MARGIN: f64 = 10.0;
/// Base cloud size of the Monte Carlo backend; iteration k draws (k+1) times
/// this many points, capped at 32x.
const MC_BASE_SAMPLES: usize = 4_000;
const MC_GROWTH_CAP: usize = 32;

/// Solution of the shift-map inversion.
#[derive(Clone, Debug)]
pub struct TiltInverse {
    pub h0: Vec<f64>,
    /// |F(h0) - h| at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    /// Residual after every iteration, in order.
    pub residual_trace: Vec<f64>,
    pub seed: u64,
}

/// Finds the pure shift h0 with h0 + 2t bar(tau_{h0} mu) = h.
///
/// t = 0 returns h immediately (the map is the identity). Exceeding
/// `max_iters` yields a non-convergence error carrying the residual tail.
pub fn invert_tilt_map(
    measure: &Measure,
    t: f64,
    h: &[f64],
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<TiltInverse> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("tilt strength must be finite and >= 0, got {t}")));
    }
    if h.len() != measure.dim() {
        return Err(Error::DimensionMismatch { expected: measure.dim(), got: h.len() });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("target shift must be finite"));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("tolerance must be finite and positive, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::invalid("need at least one iteration"));
    }
    if t == 0.0 {
        return Ok(TiltInverse {
            h0: h.to_vec(),
            residual: 0.0,
            iterations: 0,
            residual_trace: Vec::new(),
            seed,
        });
    }
    let oracle = BarOracle::build(measure);
    let d = h.len();
    let mut h0 = h.to_vec();
    let mut trace = Vec::new();
    for k in 0..max_iters {
        let (bar, lam) = oracle.eval(&h0, k, seed)?;
        let mut residual_sq = 0.0;
        let mut gap = vec![0.0; d];
        for j in 0..d {
            let f = h0[j] + 2.0 * t * bar[j];
            gap[j] = h[j] - f;
            residual_sq += gap[j] * gap[j];
        }
        let residual = residual_sq.sqrt();
        trace.push(residual);
        if residual <= tol {
            return Ok(TiltInverse {
                h0,
                residual,
                iterations: k + 1,
                residual_trace: trace,
                seed,
            });
        }
        let step = 1.0 / (1.0 + 2.0 * t * lam.max(0.0));
        for j in 0..d {
            h0[j] += step * gap[j];
        }
    }
    let tail: Vec<f64> = trace.iter().rev().take(8).rev().cloned().collect();
    Err(Error::NoConvergence { iters: max_iters, tail })
}

/// Barycenter and covariance operator norm of tau_{h0} mu, by backend.
enum BarOracle<'a> {
    Gaussian { mean: Array1<f64>, cov: Array2<f64>, opnorm: f64 },
    Axes { axes: Vec<Axis> },
    MonteCarlo { measure: &'a Measure },
}

impl<'a> BarOracle<'a> {
    fn build(measure: &'a Measure) -> Self {
        if let Some((mean, chol, _)) = measure.gaussian_parts() {
            let d = mean.len();
            let mut cov = Array2::<f64>::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for k in 0..=i.min(j) {
                        s += chol[[i, k]] * chol[[j, k]];
                    }
                    cov[[i, j]] = s;
                }
            }
            let opnorm = linalg::opnorm_psd(&cov.view(), OPNORM_REL_TOL, OPNORM_MAX_ITER);
            return BarOracle::Gaussian { mean: mean.clone(), cov, opnorm };
        }
        if let Some(axes) = separable_axes(measure) {
            return BarOracle::Axes { axes };
        }
        BarOracle::MonteCarlo { measure }
    }

    fn eval(&self, h0: &[f64], iteration: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
        match self {
            // Pure shifts translate a Gaussian without changing its shape.
            BarOracle::Gaussian { mean, cov, opnorm } => {
                let d = mean.len();
                let mut bar = vec![0.0; d];
                for i in 0..d {
                    let mut s = mean[i];
                    for j in 0..d {
                        s += cov[[i, j]] * h0[j];
                    }
                    bar[i] = s;
                }
                Ok((bar, *opnorm))
            }
            BarOracle::Axes { axes } => {
                let mut bar = vec![0.0; axes.len()];
                let mut lam: f64 = 0.0;
                for (j, axis) in axes.iter().enumerate() {
                    let (m, v) = axis.moments(h0[j])?;
                    bar[j] = m;
                    lam = lam.max(v);
                }
                Ok((bar, lam))
            }
            BarOracle::MonteCarlo { measure } => {
                let n = MC_BASE_SAMPLES * (iteration + 1).min(MC_GROWTH_CAP);
                let pseed = seed ^ (iteration as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let tilt = TiltParams { t: 0.0, h: h0.to_vec() };
                let cloud = sampling::sample(measure, &tilt, n, pseed)?;
                let bar = cloud.mean().to_vec();
                let cov = cloud.covariance();
                let lam = linalg::opnorm_psd(&cov.view(), OPNORM_REL_TOL, OPNORM_MAX_ITER);
                Ok((bar, lam))
            }
        }
    }
}

/// Fixed quadrature grid for one coordinate of a separable measure.
struct Axis {
    xs: Vec<f64>,
    logf: Vec<f64>,
    bounded: bool,
}

impl Axis {
    fn of_1d(factor: &Measure) -> Axis {
        let (lo, hi) = factor.sampling_box();
        let (lo, hi) = (lo[0], hi[0]);
        let step = (hi - lo) / (AXIS_NODES - 1) as f64;
        let xs: Vec<f64> = (0..AXIS_NODES)
            .map(|i| if i == AXIS_NODES - 1 { hi } else { lo + step * i as f64 })
            .collect();
        let logf = xs.iter().map(|&x| factor.log_density(&[x])).collect();
        Axis { xs, logf, bounded: factor.has_bounded_support() }
    }

    fn uniform(half_width: f64) -> Axis {
        let step = 2.0 * half_width / (AXIS_NODES - 1) as f64;
        let xs: Vec<f64> = (0..AXIS_NODES)
            .map(|i| {
                if i == AXIS_NODES - 1 {
                    half_width
                } else {
                    -half_width + step * i as f64
                }
            })
            .collect();
        Axis { xs, logf: vec![0.0; AXIS_NODES], bounded: true }
    }

    /// Mean and variance of the axis density tilted by exp(hj x), by
    /// trapezoid quadrature on the fixed grid.
    fn moments(&self, hj: f64) -> Result<(f64, f64)> {
        let n = self.xs.len();
        let mut logw: Vec<f64> = (0..n).map(|i| self.logf[i] + hj * self.xs[i]).collect();
        // Trapezoid end weights.
        let half = (0.5f64).ln();
        logw[0] += half;
        logw[n - 1] += half;
        let peak = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::invalid("axis density vanished on its grid"));
        }
        if !self.bounded && logw[0].max(logw[n - 1]) > peak - EDGE_MARGIN {
            return Err(Error::invalid(
                "shift pushes mass to the edge of the quadrature box; \
                 use a sampling backend for this tilt",
            ));
        }
        let mut mass = 0.0;
        let mut first = 0.0;
        for i in 0..n {
            let w = (logw[i] - peak).exp();
            mass += w;
            first += w * self.xs[i];
        }
        let mean = first / mass;
        let mut second = 0.0;
        for i in 0..n {
            let w = (logw[i] - peak).exp();
            let dev = self.xs[i] - mean;
            second += w * dev * dev;
        }
        Ok((mean, second / mass))
    }
}

/// Per-axis quadrature applies when the measure factorizes over coordinates
/// with one-dimensional factors; Gaussians are handled in closed form first.
fn separable_axes(measure: &Measure) -> Option<Vec<Axis>> {
    if let Some(factors) = measure.product_factors() {
        if factors.iter().all(|f| f.dim() == 1) {
            return Some(factors.iter().map(Axis::of_1d).collect());
        }
        return None;
    }
    match &measure.spec {
        MeasureSpec::UniformCube { half_width, dim } => {
            Some((0..*dim).map(|_| Axis::uniform(*half_width)).collect())
        }
        _ if measure.dim() == 1 => Some(vec![Axis::of_1d(measure)]),
        _ => None,
    }
}
