//! Weighted sample clouds from any measure family, tilted or not, with
//! deterministic seeding.
//!
//! Strategy by family:
//! - Gaussian: closed-form tilted Gaussian (tilting a Gaussian is Gaussian).
//! - UniformCube: exact per-coordinate truncated normal / exponential draws
//!   (the tilt factorizes across coordinates).
//! - Product / OneDimGrid: per-factor inverse-CDF draws from a 1D quadrature
//!   grid of the tilted factor density.
//! - UniformBall / RadialProfile: exact radial inverse-CDF draws for h = 0;
//!   a linear tilt is applied by importance reweighting with a degeneracy
//!   guard.
//! - SmoothPotential: MALA on the tilted potential.
//! - TaperedCube: hit-and-run with exact chord conditionals, or rejection
//!   sampling from a product proposal as an independent cross-check.
//!
//! Every routine takes an explicit seed; identical inputs give bit-identical
//! clouds.

pub mod hit_and_run;
pub mod mala;

pub use hit_and_run::{
    hit_and_run, hit_and_run_chains, hit_and_run_tilted, rejection_sample_body,
    rejection_sample_tapered_tilted,
};
pub use mala::{mala_sample, MalaResult};

use crate::cloud::WeightedCloud;
use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureSpec, TiltParams};
use crate::quad::Quadrature1d;
use crate::{dist, rng};
use ndarray::Array2;
use rand::Rng;

/// Default effective-sample-size floor below which importance reweighting is
/// rejected as statistically unsound.
pub const DEFAULT_NEFF_FLOOR: f64 = 100.0;

/// Tunables for the family dispatcher.
#[derive(Clone, Debug)]
pub struct SampleConfig {
    /// Initial MALA step (adapted during burn-in).
    pub mala_step: f64,
    pub mala_burn_in: usize,
    /// Hit-and-run burn-in, in units of d^2 steps.
    pub har_burn_factor: usize,
    /// Hit-and-run thinning, in units of d steps.
    pub har_thin_factor: usize,
    /// Quadrature grid size for 1D inverse-CDF sampling.
    pub quad_points: usize,
    /// Effective-sample-size floor for reweighting fallbacks.
    pub neff_floor: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            mala_step: 0.1,
            mala_burn_in: 2000,
            har_burn_factor: 10,
            har_thin_factor: 1,
            quad_points: 200_001,
            neff_floor: DEFAULT_NEFF_FLOOR,
        }
    }
}

/// Draw `n` points from the tilted measure using the family-appropriate
/// sampler (see module docs). Deterministic given the seed.
pub fn sample(measure: &Measure, tilt: &TiltParams, n: usize, seed: u64) -> Result<WeightedCloud> {
    sample_with(measure, tilt, n, seed, &SampleConfig::default())
}

pub fn sample_with(
    measure: &Measure,
    tilt: &TiltParams,
    n: usize,
    seed: u64,
    cfg: &SampleConfig,
) -> Result<WeightedCloud> {
    tilt.validate()?;
    let d = measure.dim();
    if tilt.h.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: tilt.h.len() });
    }
    match &measure.spec {
        MeasureSpec::Gaussian { .. } => sample_gaussian_tilted(measure, tilt, n, seed),
        MeasureSpec::UniformCube { half_width, dim } => {
            Ok(sample_cube_tilted(*half_width, *dim, tilt, n, seed))
        }
        MeasureSpec::Product { .. } | MeasureSpec::OneDimGrid { .. } => {
            sample_product_tilted(measure, tilt, n, seed, cfg.quad_points)
        }
        MeasureSpec::UniformBall { .. } | MeasureSpec::RadialProfile { .. } => {
            sample_radial_tilted(measure, tilt, n, seed, cfg)
        }
        MeasureSpec::SmoothPotential { .. } => {
            let out = mala_sample(measure, tilt, n, cfg.mala_step, cfg.mala_burn_in, seed)?;
            Ok(out.cloud)
        }
        MeasureSpec::TaperedCube { n: body_n, c0 } => {
            let body = crate::measures::body::TaperedCubeBody::new(*body_n, *c0)?;
            let dim = body_n + 1;
            hit_and_run_tilted(
                &body,
                tilt,
                n,
                cfg.har_burn_factor * dim * dim,
                cfg.har_thin_factor * dim,
                seed,
            )
        }
    }
}

/// Closed-form sampler for a tilted Gaussian: for N(m, S), the (t, h) tilt is
/// N((S^-1 + 2tI)^-1 (S^-1 m + h), (S^-1 + 2tI)^-1).
fn sample_gaussian_tilted(
    measure: &Measure,
    tilt: &TiltParams,
    n: usize,
    seed: u64,
) -> Result<WeightedCloud> {
    let (mean, _, precision) = measure.gaussian_parts().expect("gaussian family");
    let d = mean.len();
    let mut prec_t = precision.clone();
    for i in 0..d {
        prec_t[[i, i]] += 2.0 * tilt.t;
    }
    let cov_t = crate::linalg::spd_inverse(&prec_t.view())?;
    let chol_t = crate::linalg::cholesky(&cov_t.view())?;
    // mean_t = cov_t * (precision * mean + h)
    let mut rhs = vec![0.0; d];
    for i in 0..d {
        let mut s = tilt.h[i];
        for j in 0..d {
            s += precision[[i, j]] * mean[j];
        }
        rhs[i] = s;
    }
    let mut mean_t = vec![0.0; d];
    for i in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            s += cov_t[[i, j]] * rhs[j];
        }
        mean_t[i] = s;
    }
    let mut rng = rng::root_rng(seed);
    let mut pts = Array2::zeros((n, d));
    let mut z = vec![0.0; d];
    for i in 0..n {
        rng::fill_standard_normal(&mut rng, &mut z);
        for r in 0..d {
            let mut s = mean_t[r];
            for c in 0..=r {
                s += chol_t[[r, c]] * z[c];
            }
            pts[[i, r]] = s;
        }
    }
    Ok(WeightedCloud::new_uniform(
        pts,
        seed,
        format!("gaussian_closed_form(t={}, n={n})", tilt.t),
    ))
}

/// Exact per-coordinate sampler for the tilted uniform cube: coordinate i has
/// density proportional to exp(-t x^2 + h_i x) on [-hw, hw].
fn sample_cube_tilted(hw: f64, d: usize, tilt: &TiltParams, n: usize, seed: u64) -> WeightedCloud {
    let mut rng = rng::root_rng(seed);
    let mut pts = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            pts[[i, j]] = draw_tilted_interval(&mut rng, tilt.t, tilt.h[j], -hw, hw);
        }
    }
    WeightedCloud::new_uniform(pts, seed, format!("cube_exact(t={}, n={n})", tilt.t))
}

/// One draw from density proportional to exp(-t x^2 + h x) on [lo, hi].
pub(crate) fn draw_tilted_interval<R: Rng + ?Sized>(
    rng: &mut R,
    t: f64,
    h: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    if t > 0.0 {
        dist::trunc_normal(rng, h / (2.0 * t), 1.0 / (2.0 * t).sqrt(), lo, hi)
    } else if h != 0.0 {
        lo + dist::trunc_exp(rng, -h, hi - lo)
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Per-factor inverse-CDF draws for product and 1D-grid families.
fn sample_product_tilted(
    measure: &Measure,
    tilt: &TiltParams,
    n: usize,
    seed: u64,
    quad_points: usize,
) -> Result<WeightedCloud> {
    let d = measure.dim();
    let factors: Vec<&Measure> = match measure.product_factors() {
        Some(fs) => fs.iter().collect(),
        None => vec![measure], // OneDimGrid: a single 1D factor.
    };
    debug_assert_eq!(factors.len(), d);
    // The tilt factorizes: factor j sees (t, h_j).
    let engines: Vec<Quadrature1d> = factors
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let t1 = TiltParams { t: tilt.t, h: vec![tilt.h[j]] };
            sample_1d_quadrature(f, &t1, quad_points)
        })
        .collect::<Result<_>>()?;
    let mut rng = rng::root_rng(seed);
    let mut pts = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            let u: f64 = rng.gen();
            pts[[i, j]] = engines[j].quantile(u);
        }
    }
    Ok(WeightedCloud::new_uniform(
        pts,
        seed,
        format!("product_inverse_cdf(t={}, n={n})", tilt.t),
    ))
}

/// Radial families: length from the 1D density r^{d-1} lambda(r) e^{-t r^2},
/// direction uniform on the sphere; a nonzero h is applied by reweighting.
fn sample_radial_tilted(
    measure: &Measure,
    tilt: &TiltParams,
    n: usize,
    seed: u64,
    cfg: &SampleConfig,
) -> Result<WeightedCloud> {
    let d = measure.dim();
    let (_, hi) = measure.sampling_box();
    let r_max = hi[0];
    let dm1 = (d - 1) as f64;
    let radial_logpdf = |r: f64| -> f64 {
        if r <= 0.0 || r > r_max {
            return f64::NEG_INFINITY;
        }
        let mut probe = vec![0.0; d];
        probe[0] = r;
        let base = measure.log_density(&probe);
        if base == f64::NEG_INFINITY {
            return base;
        }
        base + dm1 * r.ln() - tilt.t * r * r
    };
    let engine = Quadrature1d::on_interval(0.0, r_max, cfg.quad_points, radial_logpdf)?;
    let mut rng = rng::root_rng(seed);
    let mut pts = Array2::zeros((n, d));
    let mut dir = vec![0.0; d];
    for i in 0..n {
        let u: f64 = rng.gen();
        let r = engine.quantile(u);
        rng::fill_standard_normal(&mut rng, &mut dir);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        for j in 0..d {
            pts[[i, j]] = r * dir[j] / norm;
        }
    }
    let cloud = WeightedCloud::new_uniform(
        pts,
        seed,
        format!("radial_inverse_cdf(t={}, n={n})", tilt.t),
    );
    if tilt.h.iter().all(|&v| v == 0.0) {
        return Ok(cloud);
    }
    // Linear part of the tilt via importance weights exp(h.x).
    let h_only = TiltParams { t: 0.0, h: tilt.h.clone() };
    reweight_tilt_with_floor(&cloud, &h_only, cfg.neff_floor)
}

/// Multiply the weights by exp(-t|x|^2 + h.x) and renormalize; errors with a
/// degeneracy diagnostic when the effective sample size falls below `floor`
/// (direct sampling from the tilted measure is then the sound route).
pub fn reweight_tilt(cloud: &WeightedCloud, tilt: &TiltParams) -> Result<WeightedCloud> {
    reweight_tilt_with_floor(cloud, tilt, DEFAULT_NEFF_FLOOR)
}

pub fn reweight_tilt_with_floor(
    cloud: &WeightedCloud,
    tilt: &TiltParams,
    floor: f64,
) -> Result<WeightedCloud> {
    tilt.validate()?;
    if cloud.n() == 0 {
        return Err(Error::invalid("cannot reweight an empty cloud"));
    }
    if tilt.h.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), got: tilt.h.len() });
    }
    if tilt.is_identity() {
        return Ok(cloud.clone());
    }
    let n = cloud.n();
    let mut logw: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let row = cloud.points.row(i);
        let x = row.as_slice().expect("contiguous row");
        let lw = if cloud.weights[i] > 0.0 {
            cloud.weights[i].ln() + tilt.log_factor(x)
        } else {
            f64::NEG_INFINITY
        };
        logw.push(lw);
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::invalid("all reweighted masses vanished"));
    }
    let raw: Vec<f64> = logw.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let n_eff = crate::cloud::n_eff(&weights);
    if n_eff < floor {
        return Err(Error::DegenerateWeights { n_eff, floor });
    }
    WeightedCloud::new_weighted(
        cloud.points.clone(),
        ndarray::Array1::from_vec(weights),
        cloud.seed,
        format!("{} | reweight(t={}, |h|={:.3})", cloud.provenance, tilt.t, {
            tilt.h.iter().map(|v| v * v).sum::<f64>().sqrt()
        }),
    )
}

/// The exact-moment 1D engine: quadrature grid of the tilted density, giving
/// deterministic moments, CDF, quantiles, and pointwise density values -- the
/// oracle backend for the one-dimensional analyses.
pub fn sample_1d_quadrature(
    measure: &Measure,
    tilt: &TiltParams,
    n_points: usize,
) -> Result<Quadrature1d> {
    if measure.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: measure.dim() });
    }
    tilt.validate()?;
    if tilt.h.len() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: tilt.h.len() });
    }
    let logpdf = |x: f64| measure.log_density_tilted(tilt, &[x]);
    if measure.has_bounded_support() {
        let (lo, hi) = measure.sampling_box();
        Quadrature1d::on_interval(lo[0], hi[0], n_points, logpdf)
    } else {
        // Center/scale cues for the expansion; the tilt can move the mode,
        // which the expansion tracks on its own.
        let (center, scale) = match &measure.spec {
            MeasureSpec::Gaussian { mean, covariance } => (mean[0], covariance[0][0].sqrt()),
            _ => (0.0, 1.0),
        };
        Quadrature1d::auto(center, scale, n_points, logpdf)
    }
}

/// IID draws through the inverse CDF of a 1D quadrature engine.
pub fn draws_from_quadrature(engine: &Quadrature1d, n: usize, seed: u64) -> WeightedCloud {
    let mut rng = rng::root_rng(seed);
    let mut pts = Array2::zeros((n, 1));
    for i in 0..n {
        let u: f64 = rng.gen();
        pts[[i, 0]] = engine.quantile(u);
    }
    WeightedCloud::new_uniform(pts, seed, format!("quadrature_inverse_cdf(n={n})"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;

    fn compile(spec: &MeasureSpec) -> Measure {
        Measure::compile(spec).unwrap()
    }

    #[test]
    fn gaussian_tilt_closed_form_moments() {
        let m = compile(&MeasureSpec::standard_gaussian(8));
        let mut h = vec![0.0; 8];
        h[0] = 1.0;
        let tilt = TiltParams::new(0.5, h).unwrap();
        let n = 40_000;
        let cloud = sample(&m, &tilt, n, 2024).unwrap();
        cloud.validate().unwrap();
        // Tilted law is N(e1/2, I/2).
        let mean = cloud.mean();
        let cov = cloud.covariance();
        let se_mean = (0.5f64 / n as f64).sqrt();
        assert!(
            (mean[0] - 0.5).abs() < 4.0 * se_mean,
            "tilted mean[0] = {} should be 0.5",
            mean[0]
        );
        for j in 1..8 {
            assert!(mean[j].abs() < 4.0 * se_mean, "tilted mean[{j}] = {}", mean[j]);
        }
        let se_var = 0.5 * (2.0f64 / n as f64).sqrt();
        for j in 0..8 {
            assert!(
                (cov[[j, j]] - 0.5).abs() < 4.0 * se_var,
                "tilted var[{j}] = {} should be 0.5",
                cov[[j, j]]
            );
        }
    }

    #[test]
    fn cube_sampler_matches_uniform_moments() {
        let m = compile(&MeasureSpec::unit_variance_cube(4));
        let tilt = TiltParams::none(4);
        let n = 50_000;
        let cloud = sample(&m, &tilt, n, 7).unwrap();
        let cov = cloud.covariance();
        let se = (1.0f64 * 0.8 / n as f64).sqrt(); // Var(x^2) = 9/5 - 1 = 0.8 for x ~ U
        for j in 0..4 {
            assert!(
                (cov[[j, j]] - 1.0).abs() < 4.0 * se,
                "cube variance[{j}] = {}",
                cov[[j, j]]
            );
        }
    }

    #[test]
    fn tilted_cube_matches_quadrature_moments() {
        let hw = 3f64.sqrt();
        let m = compile(&MeasureSpec::unit_variance_cube(2));
        let tilt = TiltParams::new(0.8, vec![0.7, -0.3]).unwrap();
        let n = 60_000;
        let cloud = sample(&m, &tilt, n, 11).unwrap();
        // Coordinate j has density ~ exp(-t x^2 + h_j x) on [-hw, hw].
        for j in 0..2 {
            let hj = tilt.h[j];
            let q = Quadrature1d::on_interval(-hw, hw, 100_001, |x| {
                -tilt.t * x * x + hj * x
            })
            .unwrap();
            let proj: Vec<f64> = (0..n).map(|i| cloud.points[[i, j]]).collect();
            let mean = proj.iter().sum::<f64>() / n as f64;
            let se = (q.variance() / n as f64).sqrt();
            assert!(
                (mean - q.mean()).abs() < 4.0 * se,
                "coordinate {j}: sample mean {mean} vs quadrature {}",
                q.mean()
            );
        }
    }

    #[test]
    fn ball_radial_sampler_second_moment() {
        // Uniform on the unit ball in R^3: E|X|^2 = 3/5.
        let m = compile(&MeasureSpec::UniformBall { radius: 1.0, dim: 3 });
        let n = 50_000;
        let cloud = sample(&m, &TiltParams::none(3), n, 5).unwrap();
        let m2: Vec<f64> = cloud.squared_norms();
        let est = cloud.estimate_mean(&m2);
        assert!(
            (est.value - 0.6).abs() < 4.0 * est.stderr,
            "ball E|X|^2 = {} +- {}, want 3/5",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn reweight_identity_and_closed_form() {
        let m = compile(&MeasureSpec::standard_gaussian(4));
        let base = sample(&m, &TiltParams::none(4), 40_000, 31).unwrap();
        let same = reweight_tilt(&base, &TiltParams::none(4)).unwrap();
        assert_eq!(same.weights, base.weights, "identity tilt must not touch weights");

        // tilt (0, h): mean shifts to h.
        let h = vec![0.3, -0.2, 0.1, 0.0];
        let shifted = reweight_tilt(&base, &TiltParams::new(0.0, h.clone()).unwrap()).unwrap();
        shifted.validate().unwrap();
        let mean = shifted.mean();
        for j in 0..4 {
            let proj: Vec<f64> = (0..shifted.n()).map(|i| shifted.points[[i, j]]).collect();
            let est = shifted.estimate_mean(&proj);
            assert!(
                (mean[j] - h[j]).abs() < 4.0 * est.stderr.max(1e-3),
                "reweighted mean[{j}] = {} vs h = {}",
                mean[j],
                h[j]
            );
        }

        // tilt (t, 0): E|x|^2 = n/(1+2t).
        let t = 0.5;
        let scaled = reweight_tilt(&base, &TiltParams::new(t, vec![0.0; 4]).unwrap()).unwrap();
        let m2 = scaled.squared_norms();
        let est = scaled.estimate_mean(&m2);
        let want = 4.0 / (1.0 + 2.0 * t);
        assert!(
            (est.value - want).abs() < 4.0 * est.stderr,
            "reweighted E|x|^2 = {} +- {}, want {want}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn reweight_degeneracy_guard_fires() {
        let m = compile(&MeasureSpec::standard_gaussian(2));
        let base = sample(&m, &TiltParams::none(2), 2_000, 13).unwrap();
        // A huge shift pushes all mass onto a couple of points.
        let r = reweight_tilt(&base, &TiltParams::new(0.0, vec![50.0, 0.0]).unwrap());
        match r {
            Err(Error::DegenerateWeights { n_eff, floor }) => {
                assert!(n_eff < floor, "degeneracy diagnostic: n_eff={n_eff} floor={floor}");
            }
            other => panic!("expected DegenerateWeights, got {other:?}"),
        }
    }

    #[test]
    fn quadrature_engine_examples() {
        // Standard Gaussian on [-10, 10], step 1e-3: variance 1 within 1e-6.
        let m = compile(&MeasureSpec::standard_gaussian(1));
        let q = Quadrature1d::on_interval(-10.0, 10.0, 20_001, |x| m.log_density(&[x])).unwrap();
        assert!((q.variance() - 1.0).abs() < 1e-6, "gaussian variance {}", q.variance());
        assert_eq!(q.mean(), 0.0, "symmetric grid mean must be exactly zero");

        // Exp(1) shifted to mean zero: Var = 1, E X^3 = 2.
        let grid = crate::measures::family1d::one_dim_family()
            .into_iter()
            .find(|(n, _)| n == "exp_right")
            .unwrap()
            .1;
        let em = compile(&grid);
        let q = sample_1d_quadrature(&em, &TiltParams::none(1), 400_001).unwrap();
        assert!((q.variance() - 1.0).abs() < 2e-3, "exp variance {}", q.variance());
        assert!((q.central_moment(3) - 2.0).abs() < 2e-2, "exp third moment {}", q.central_moment(3));
    }

    #[test]
    fn determinism_same_seed_same_cloud() {
        let m = compile(&MeasureSpec::SmoothPotential { quadratic: 0.5, quartic: 0.25, dim: 2 });
        let tilt = TiltParams::new(0.2, vec![0.1, 0.0]).unwrap();
        let a = sample(&m, &tilt, 500, 99).unwrap();
        let b = sample(&m, &tilt, 500, 99).unwrap();
        assert_eq!(a.points, b.points, "same seed must give bit-identical points");
        let c = sample(&m, &tilt, 500, 100).unwrap();
        assert_ne!(a.points, c.points, "different seed must move the cloud");
    }

    #[test]
    fn inverse_cdf_draws_follow_engine() {
        let m = compile(&MeasureSpec::standard_gaussian(1));
        let q = sample_1d_quadrature(&m, &TiltParams::none(1), 200_001).unwrap();
        let cloud = draws_from_quadrature(&q, 100_000, 3);
        let vals: Vec<f64> = (0..cloud.n()).map(|i| cloud.points[[i, 0]]).collect();
        let est = cloud.estimate_mean(&vals);
        assert!(est.value.abs() < 4.0 * est.stderr, "inverse-CDF mean {}", est.value);
    }
}
