//! Scalar functionals of sample clouds and 1D densities: Orlicz psi2/psi1
//! norms, subgaussian constants over direction nets, concentration-function
//! lower bounds, entropy and Dirichlet functionals with the induced
//! log-Sobolev/Poincare ratio bounds, and the half-line isoperimetric
//! functional of one-dimensional densities.
//!
//! The psi_p norm of a scalar X is the smallest K > 0 with
//! E exp(|X|^p / K^p) <= 2. It is computed by monotone bisection on K with
//! all exponential moments evaluated through log-sum-exp, so intermediate
//! overflow never occurs. Empirical moments are truncated at the sample
//! maximum: the estimator never extrapolates tail mass the sample cannot
//! witness, which makes every reported psi value a lower-bound-flavored
//! plug-in estimate.

pub mod concentration;
pub mod functionals;
pub mod ledoux;
pub mod net;
pub mod sigma;

pub use concentration::{concentration_function_lb, ConcentrationCurve};
pub use functionals::{
    dirichlet_energy, entropy_functional, lsi_ratio_lb, poincare_ratio_lb, variance_functional,
    FunctionDictionary, RatioLowerBound, TestFn,
};
pub use ledoux::{ledoux_k_1d, LedouxK};
pub use net::DirectionNet;
pub use sigma::{norm_tail_bound_check, sigma_sg, NormTailReport, SigmaSubgaussian};

use crate::cloud::{self, Estimate, WeightedCloud};
use crate::error::{Error, Result};
use crate::quad::Quadrature1d;

/// Relative bisection tolerance for psi-norm roots.
pub const PSI_REL_TOL: f64 = 1e-3;
/// Minimum effective sample size for sample-based psi estimates.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 1_000.0;
/// A root beyond this multiple of the sample standard deviation is reported
/// as infinite.
const INFINITE_ROOT_FACTOR: f64 = 1e6;

/// psi2 norm of weighted scalar samples: smallest K with
/// weighted-mean exp(X^2/K^2) <= 2. Returns value +inf (with +inf stderr)
/// when no K up to 1e6 standard deviations works.
pub fn psi2_norm(values: &[f64], weights: &[f64], seed: u64) -> Result<Estimate> {
    psi_norm_weighted(values, weights, 2, seed)
}

/// psi1 norm of weighted scalar samples: smallest K with
/// weighted-mean exp(|X|/K) <= 2.
pub fn psi1_norm(values: &[f64], weights: &[f64], seed: u64) -> Result<Estimate> {
    psi_norm_weighted(values, weights, 1, seed)
}

fn psi_norm_weighted(values: &[f64], weights: &[f64], p: u32, seed: u64) -> Result<Estimate> {
    if values.is_empty() {
        return Err(Error::invalid("psi norm of an empty sample"));
    }
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("weights sum to zero"));
    }
    let norm_w: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let n_eff = cloud::n_eff(&norm_w);
    if n_eff < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::invalid(format!(
            "psi norm needs at least {MIN_EFFECTIVE_SAMPLES} effective samples, got {n_eff:.1}"
        )));
    }
    let phis: Vec<f64> = match p {
        2 => values.iter().map(|v| v * v).collect(),
        1 => values.iter().map(|v| v.abs()).collect(),
        _ => unreachable!("psi exponent is 1 or 2"),
    };
    let sd = {
        let m: f64 = norm_w.iter().zip(values).map(|(w, v)| w * v).sum();
        let var: f64 = norm_w.iter().zip(values).map(|(w, v)| w * (v - m) * (v - m)).sum();
        var.max(0.0).sqrt()
    };
    let root = match psi_root(&phis, &norm_w, p, sd) {
        PsiRoot::Zero => return Ok(Estimate { value: 0.0, stderr: 0.0, n_eff, seed }),
        PsiRoot::Infinite => {
            return Ok(Estimate { value: f64::INFINITY, stderr: f64::INFINITY, n_eff, seed })
        }
        PsiRoot::Finite(k) => k,
    };
    let stderr = psi_stderr(&phis, &norm_w, p, root);
    Ok(Estimate { value: root, stderr, n_eff, seed })
}

enum PsiRoot {
    Zero,
    Finite(f64),
    Infinite,
}

/// ln of the weighted mean of exp(phi_i / K^p), via log-sum-exp.
fn log_s(phis: &[f64], norm_w: &[f64], p: u32, k: f64) -> f64 {
    let kp = k.powi(p as i32);
    crate::quad::logsumexp(
        phis.iter()
            .zip(norm_w)
            .map(|(&phi, &w)| if w > 0.0 { w.ln() + phi / kp } else { f64::NEG_INFINITY }),
    )
}

/// Smallest K with S(K) <= 2 for S(K) = sum_i w_i exp(phi_i/K^p), found by
/// halving from the certified upper bracket (max phi / ln 2)^(1/p) and then
/// bisecting to relative tolerance.
fn psi_root(phis: &[f64], norm_w: &[f64], p: u32, sd: f64) -> PsiRoot {
    let ln2 = std::f64::consts::LN_2;
    let max_phi = phis
        .iter()
        .zip(norm_w)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&phi, _)| phi)
        .fold(0.0f64, f64::max);
    if max_phi == 0.0 {
        return PsiRoot::Zero;
    }
    // S(hi) <= sum w exp(max_phi/hi^p) = 2 certifies the upper end.
    let mut hi = (max_phi / ln2).powf(1.0 / p as f64);
    if sd > 0.0 && hi > INFINITE_ROOT_FACTOR * sd {
        if log_s(phis, norm_w, p, INFINITE_ROOT_FACTOR * sd) > ln2 {
            return PsiRoot::Infinite;
        }
        hi = INFINITE_ROOT_FACTOR * sd;
    }
    let mut lo = hi;
    for _ in 0..400 {
        let cand = lo * 0.5;
        if log_s(phis, norm_w, p, cand) > ln2 {
            break;
        }
        lo = cand;
        if lo < f64::MIN_POSITIVE * 1e10 {
            return PsiRoot::Zero;
        }
    }
    if lo == hi {
        // The bracket top was already the infimum region's edge; widen up.
        // (Cannot happen for hi built from max_phi, kept for the capped case.)
        return PsiRoot::Finite(hi);
    }
    lo *= 0.5;
    // Invariant: S(lo) > 2 >= S(hi); S decreasing in K.
    while hi - lo > PSI_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if log_s(phis, norm_w, p, mid) > ln2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    PsiRoot::Finite(0.5 * (lo + hi))
}

/// Delta-method standard error of the psi root: se(S hat at the root) divided
/// by |dS/dK| there.
fn psi_stderr(phis: &[f64], norm_w: &[f64], p: u32, k: f64) -> f64 {
    let kp = k.powi(p as i32);
    let mut s = 0.0;
    let mut ds = 0.0;
    let es: Vec<f64> = phis.iter().map(|phi| (phi / kp).min(700.0).exp()).collect();
    for ((&w, &e), &phi) in norm_w.iter().zip(&es).zip(phis) {
        s += w * e;
        ds += w * e * phi;
    }
    // dS/dK = -p/K^(p+1) * sum w e phi.
    let slope = p as f64 / (k * kp) * ds;
    if slope <= 0.0 {
        return f64::INFINITY;
    }
    let var_s: f64 = norm_w.iter().zip(&es).map(|(&w, &e)| w * w * (e - s) * (e - s)).sum();
    var_s.sqrt() / slope
}

/// psi_p norm of Y = value(X) under a 1D quadrature law: the exact-oracle
/// counterpart of the sample estimators. Returns +inf when the integrand of
/// the exponential moment is still climbing at an outermost grid node whose
/// density has decayed far below the mode: the finite root is then a
/// truncation artifact, and for the log-concave tails this detects, the true
/// moment diverges at every K the grid could certify.
pub fn psi_from_quadrature(
    engine: &Quadrature1d,
    p: u32,
    value: impl Fn(f64) -> f64,
) -> Result<f64> {
    if engine.is_empty() {
        return Err(Error::invalid("empty quadrature grid"));
    }
    let phis: Vec<f64> = engine
        .points()
        .iter()
        .map(|&x| {
            let y = value(x);
            match p {
                2 => y * y,
                1 => y.abs(),
                _ => unreachable!("psi exponent is 1 or 2"),
            }
        })
        .collect();
    let probs = engine.probs();
    let sd_proxy = {
        let m: f64 = engine.points().iter().zip(probs).map(|(&x, &w)| w * value(x)).sum();
        let v: f64 = engine
            .points()
            .iter()
            .zip(probs)
            .map(|(&x, &w)| {
                let d = value(x) - m;
                w * d * d
            })
            .sum();
        v.max(0.0).sqrt()
    };
    let root = match psi_root(&phis, probs, p, sd_proxy) {
        PsiRoot::Zero => return Ok(0.0),
        PsiRoot::Infinite => return Ok(f64::INFINITY),
        PsiRoot::Finite(k) => k,
    };
    // Truncation guard: the moment integrand log f + phi/K^p must be falling
    // at the outermost nodes. If it is still rising into an edge where the
    // density has decayed far below the mode, extending the grid would only
    // raise the moment, so the bisection root is a truncation artifact.
    // Bounded supports are exempt: their density does not decay at the edge.
    let logf = engine.log_density_values();
    let n = phis.len();
    let live: Vec<usize> = (0..n).filter(|&i| probs[i] > 0.0 && logf[i].is_finite()).collect();
    if live.len() >= 3 {
        let kp = root.powi(p as i32);
        let term = |i: usize| logf[i] + phis[i] / kp;
        let peak = live.iter().map(|&i| logf[i]).fold(f64::NEG_INFINITY, f64::max);
        let (l0, l1) = (live[0], live[1]);
        let (r0, r1) = (live[live.len() - 1], live[live.len() - 2]);
        let climbs_left = term(l0) >= term(l1) && logf[l0] < peak - 5.0;
        let climbs_right = term(r0) >= term(r1) && logf[r0] < peak - 5.0;
        if climbs_left || climbs_right {
            return Ok(f64::INFINITY);
        }
    }
    Ok(root)
}

/// psi1 norm of the centered squared norm |x|^2 - E|x|^2 over the cloud: the
/// norm-fluctuation scale.
pub fn norm_fluctuation_psi1(cloud: &WeightedCloud) -> Result<Estimate> {
    if cloud.n() == 0 {
        return Err(Error::invalid("norm fluctuation of an empty cloud"));
    }
    let sq = cloud.squared_norms();
    let w = cloud.weights.as_slice().expect("contiguous weights");
    let m2: f64 = w.iter().zip(&sq).map(|(wi, s)| wi * s).sum::<f64>() / w.iter().sum::<f64>();
    let centered: Vec<f64> = sq.iter().map(|s| s - m2).collect();
    // Deviations at the float resolution of the mean are pure rounding noise
    // from the centering pass, not fluctuation; report an exact zero.
    let max_dev = centered.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if max_dev <= 1e-9 * (1.0 + m2.abs()) {
        return Ok(Estimate { value: 0.0, stderr: 0.0, n_eff: cloud.n_eff(), seed: cloud.seed });
    }
    psi1_norm(&centered, w, cloud.seed)
}
