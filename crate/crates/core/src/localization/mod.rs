//! A measure-valued diffusion realized by reweighting a fixed particle cloud.
//!
//! The weights follow the exponential family exp(-t|x|^2 + h.x): at time t
//! the cloud carries the quadratic tilt of strength t with a random shift
//! h_t, advanced by the Euler scheme
//!
//!   h_{k+1} = h_k + 2 a_k dt + sqrt(2 dt) xi_k,
//!
//! where a_k is the current weighted barycenter and xi_k is standard normal.
//! With the exp(-t|x|^2 + h.x) convention these are the unique drift and
//! noise scalings under which every reweighted mean is a martingale: the Ito
//! correction of the shift exactly cancels the time derivative of the
//! quadratic term. Because the weights are an explicit function of (t, h_t),
//! the density dynamics hold automatically on the discrete cloud and the only
//! error sources are the finite ensemble and the time step.
//!
//! Martingality is the engine behind the decompositions checked in `checks`:
//! the entropy of g^2 splits into the mean entropy under the terminal
//! reweighted measures plus the entropy of the mass martingale M_t = E_t g^2,
//! and the variance splits likewise. The quadratic tilt contracts the
//! reweighted measures -- their subgaussian constant is capped by
//! 1/sqrt(2t) -- so a bound on the martingale part transfers functional
//! inequalities back to the base measure.
//!
//! Weights degenerate as t grows; paths stop (without error) once the
//! effective sample size falls below the floor, and report `truncated`.

mod checks;

pub use checks::{
    entropy_decomposition_check, lsi_from_strong_tilt_check, martingale_check,
    variance_decomposition_check, EntropyDecompositionReport, LsiFromTiltReport, LsiTiltEntry,
    MartingaleReport, StepQvCheck, VarianceDecompositionReport,
};

use crate::cloud::{Estimate, WeightedCloud};
use crate::error::{Error, Result};
use crate::linalg;
use crate::psi::net::DirectionNet;
use crate::psi::sigma::sigma_sg;
use crate::rng;
use crate::sampling::DEFAULT_NEFF_FLOOR;
use ndarray::{Array1, Array2};
use rayon::prelude::*;

pub(crate) use crate::tilting::{OPNORM_MAX_ITER, OPNORM_REL_TOL};

/// Minimum effective sample size of the base cloud before a path may start.
pub const BASE_NEFF_MIN: f64 = 1_000.0;

/// One realized path of the reweighting diffusion on a fixed base cloud.
///
/// All per-step vectors are indexed by the grid `ts`; `noise` has one entry
/// fewer (the increment leading out of each grid time). A path that hits the
/// weight floor before the horizon keeps every sound step, drops the rest,
/// and sets `truncated`.
#[derive(Clone, Debug)]
pub struct LocalizationPath {
    /// Time grid 0 = t_0 < ... < t_K; ends at the horizon unless truncated.
    pub ts: Vec<f64>,
    /// Shift h_{t_k}; h_0 = 0.
    pub hs: Vec<Vec<f64>>,
    /// Standard-normal increments xi_k; the applied step is
    /// 2 a_k dt + sqrt(2 dt) xi_k.
    pub noise: Vec<Vec<f64>>,
    /// Weighted barycenter a_{t_k}.
    pub barycenters: Vec<Vec<f64>>,
    /// Weighted covariance A_{t_k}.
    pub covariances: Vec<Array2<f64>>,
    /// ||A_{t_k}||_op.
    pub cov_op_norms: Vec<f64>,
    /// Normalized weights over the base cloud at each grid time.
    pub weights: Vec<Vec<f64>>,
    /// Effective sample size of the weights at each grid time.
    pub n_eff: Vec<f64>,
    /// The weight floor stopped the path before the horizon.
    pub truncated: bool,
    pub seed: u64,
}

impl LocalizationPath {
    pub fn steps(&self) -> usize {
        self.ts.len().saturating_sub(1)
    }

    /// Structural invariants: strictly increasing grid starting at 0, zero
    /// initial shift, normalized nonnegative weights at every step, and
    /// consistent lengths across the per-step fields.
    pub fn validate(&self) -> Result<()> {
        let k = self.ts.len();
        if k == 0 {
            return Err(Error::invalid("empty path"));
        }
        if self.ts[0] != 0.0 {
            return Err(Error::invalid("path grid must start at t = 0"));
        }
        if self.ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("path grid must be strictly increasing"));
        }
        if self.hs[0].iter().any(|v| *v != 0.0) {
            return Err(Error::invalid("initial shift must be zero"));
        }
        let lengths_ok = self.hs.len() == k
            && self.noise.len() == k - 1
            && self.barycenters.len() == k
            && self.covariances.len() == k
            && self.cov_op_norms.len() == k
            && self.weights.len() == k
            && self.n_eff.len() == k;
        if !lengths_ok {
            return Err(Error::invalid("per-step field lengths disagree with the grid"));
        }
        for (step, w) in self.weights.iter().enumerate() {
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!("step {step} has an invalid weight")));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > crate::cloud::WEIGHT_SUM_TOL {
                return Err(Error::invalid(format!(
                    "step {step} weights sum to {total}, not 1"
                )));
            }
        }
        Ok(())
    }
}

/// Per-path trace of the reweighted mean of one function: the raw material
/// of the martingale checks.
#[derive(Clone, Debug)]
pub struct MartingaleTrace {
    /// M_{t_k} = sum_i w_i(t_k) phi(x_i) along the grid.
    pub values: Vec<f64>,
    /// values[k+1] - values[k].
    pub increments: Vec<f64>,
    /// Index of the path within its ensemble.
    pub path_index: usize,
}

/// Trace of `phi` (given by its values on the base points) along one path.
pub fn martingale_trace(
    path: &LocalizationPath,
    phi: &[f64],
    path_index: usize,
) -> MartingaleTrace {
    let values: Vec<f64> = path
        .weights
        .iter()
        .map(|w| w.iter().zip(phi).map(|(wi, p)| wi * p).sum())
        .collect();
    let increments = values.windows(2).map(|v| v[1] - v[0]).collect();
    MartingaleTrace { values, increments, path_index }
}

/// Simulate one path of the reweighting diffusion up to `t_final`.
///
/// The grid is uniform with K = ceil(t_final / dt) steps, so the effective
/// step is at most the requested `dt`. Preconditions: dt must not exceed
/// 0.1 / max(1, ||A_0||_op) (the Euler drift stays a small fraction of the
/// state) and the base cloud must carry at least `BASE_NEFF_MIN` effective
/// samples. Weight collapse below the reweighting floor truncates the path
/// instead of failing.
pub fn simulate_path(
    cloud: &WeightedCloud,
    t_final: f64,
    dt: f64,
    seed: u64,
) -> Result<LocalizationPath> {
    if cloud.n() == 0 {
        return Err(Error::invalid("cannot localize an empty cloud"));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::invalid(format!("horizon {t_final} must be positive finite")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step {dt} must be positive finite")));
    }
    if cloud.n_eff() < BASE_NEFF_MIN {
        return Err(Error::invalid(format!(
            "base cloud carries {:.1} effective samples; localization needs {BASE_NEFF_MIN}",
            cloud.n_eff()
        )));
    }
    let d = cloud.dim();
    let base_mean = cloud.mean();
    let base_cov = linalg::weighted_cov(
        &cloud.points.view(),
        cloud.weights.as_slice().expect("contiguous weights"),
        &base_mean.view(),
    );
    let op0 = linalg::opnorm_psd(&base_cov.view(), OPNORM_REL_TOL, OPNORM_MAX_ITER);
    let dt_max = 0.1 / op0.max(1.0);
    if dt > dt_max {
        return Err(Error::invalid(format!(
            "time step {dt} exceeds 0.1 / max(1, ||A_0||_op) = {dt_max:.4}"
        )));
    }

    let steps = (t_final / dt).ceil() as usize;
    let sq: Vec<f64> = cloud.squared_norms();
    let log_w0: Vec<f64> = cloud
        .weights
        .iter()
        .map(|w| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
        .collect();
    let n = cloud.n();
    let mut rng = rng::root_rng(seed);

    let mut path = LocalizationPath {
        ts: Vec::with_capacity(steps + 1),
        hs: Vec::with_capacity(steps + 1),
        noise: Vec::with_capacity(steps),
        barycenters: Vec::with_capacity(steps + 1),
        covariances: Vec::with_capacity(steps + 1),
        cov_op_norms: Vec::with_capacity(steps + 1),
        weights: Vec::with_capacity(steps + 1),
        n_eff: Vec::with_capacity(steps + 1),
        truncated: false,
        seed,
    };

    let mut h = vec![0.0; d];
    let mut logw = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    for k in 0..=steps {
        let t = t_final * (k as f64 / steps as f64);
        let mut max_lw = f64::NEG_INFINITY;
        for i in 0..n {
            let row = cloud.points.row(i);
            let x = row.as_slice().expect("contiguous row");
            let mut hx = 0.0;
            for j in 0..d {
                hx += h[j] * x[j];
            }
            let lw = log_w0[i] - t * sq[i] + hx;
            logw[i] = lw;
            if lw > max_lw {
                max_lw = lw;
            }
        }
        let mut total = 0.0;
        for i in 0..n {
            w[i] = (logw[i] - max_lw).exp();
            total += w[i];
        }
        let mut sum_sq = 0.0;
        for wi in w.iter_mut() {
            *wi /= total;
            sum_sq += *wi * *wi;
        }
        let n_eff = 1.0 / sum_sq;
        if n_eff < DEFAULT_NEFF_FLOOR {
            // Weight collapse: keep the sound prefix and drop the dangling
            // noise increment that led into the degenerate state.
            path.truncated = true;
            path.noise.pop();
            break;
        }
        let mean = linalg::weighted_mean(&cloud.points.view(), &w);
        let cov = linalg::weighted_cov(&cloud.points.view(), &w, &mean.view());
        let op = linalg::opnorm_psd(&cov.view(), OPNORM_REL_TOL, OPNORM_MAX_ITER);
        path.ts.push(t);
        path.hs.push(h.clone());
        path.weights.push(w.clone());
        path.n_eff.push(n_eff);
        path.cov_op_norms.push(op);
        path.covariances.push(cov);
        if k == steps {
            path.barycenters.push(mean.to_vec());
            break;
        }
        let dt_eff = t_final / steps as f64;
        let mut xi = vec![0.0; d];
        rng::fill_standard_normal(&mut rng, &mut xi);
        let root = (2.0 * dt_eff).sqrt();
        for j in 0..d {
            h[j] += 2.0 * mean[j] * dt_eff + root * xi[j];
        }
        path.noise.push(xi);
        path.barycenters.push(mean.to_vec());
    }
    Ok(path)
}

/// Independent paths from derived seeds, in parallel; path p uses the stream
/// seed ^ (p+1) * odd constant, so ensembles are reproducible and extending
/// the count leaves earlier paths unchanged.
pub fn ensemble_paths(
    cloud: &WeightedCloud,
    t_final: f64,
    dt: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<LocalizationPath>> {
    if count == 0 {
        return Err(Error::invalid("ensemble needs at least one path"));
    }
    (0..count)
        .into_par_iter()
        .map(|p| {
            let pseed = seed ^ (p as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            simulate_path(cloud, t_final, dt, pseed)
        })
        .collect()
}

/// The MGF-normalized subgaussian constant of the reweighted cloud at every
/// grid time of one path, over the given direction net.
///
/// Each step needs enough effective samples for the constant to mean
/// anything; the estimator's own floor (stricter than the path floor)
/// propagates as an error.
pub fn sigma_tilde_path(
    cloud: &WeightedCloud,
    path: &LocalizationPath,
    net: &DirectionNet,
) -> Result<Vec<Estimate>> {
    let mut scratch = cloud.clone();
    let mut out = Vec::with_capacity(path.ts.len());
    for w in &path.weights {
        scratch.weights = Array1::from_vec(w.clone());
        let sg = sigma_sg(&scratch, net)?;
        out.push(sg.sigma_tilde);
    }
    Ok(out)
}
