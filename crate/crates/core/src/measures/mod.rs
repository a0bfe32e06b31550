//! Declarative log-concave measure families with exact unnormalized log
//! densities, optional smooth-potential gradients, and support geometry.
//!
//! A `MeasureSpec` is the serializable description (family + parameters); a
//! `Measure` is its compiled form with factorizations precomputed for hot
//! loops. Normalization constants are never computed anywhere: every
//! downstream estimator works with self-normalized weights, so log densities
//! are only meaningful up to an additive constant (chosen as 0 at the mode
//! where a natural mode exists).
//!
//! Tilting is uniform across families: `TiltParams { t, h }` multiplies the
//! density by exp(-t|x|^2 + h.x).

pub mod body;
pub mod family1d;

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

pub use body::{make_tapered_cube_body, slice_density_lastcoord, ConvexBody, TaperedCubeBody};

/// Serializable description of a log-concave measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// N(mean, covariance) with SPD covariance.
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    /// Uniform on [-half_width, half_width]^dim.
    UniformCube { half_width: f64, dim: usize },
    /// Uniform on the Euclidean ball of the given radius.
    UniformBall { radius: f64, dim: usize },
    /// Density proportional to exp(log_profile(|x|)), with the log profile
    /// given as a table over radii starting at 0, interpolated linearly,
    /// concave and nonincreasing; zero beyond the last radius.
    RadialProfile { radii: Vec<f64>, log_profile: Vec<f64>, dim: usize },
    /// Product of independent one-dimensional factors.
    Product { factors: Vec<MeasureSpec> },
    /// One-dimensional density tabulated on the uniform grid
    /// x0, x0+dx, ...; positive on the table (its support), zero outside;
    /// log density interpolated linearly between grid points.
    OneDimGrid { x0: f64, dx: f64, density: Vec<f64> },
    /// Density exp(-V) with the smooth radial potential
    /// V(x) = (quadratic/2)|x|^2 + (quartic/4)|x|^4.
    SmoothPotential { quadratic: f64, quartic: f64, dim: usize },
    /// Uniform measure on the tapered cube in R^{n+1}: points (x, lambda)
    /// with max_i |x_i| <= sqrt(3) and |x|_2 <= sqrt(n) + c0(1 - |lambda|).
    TaperedCube { n: usize, c0: f64 },
}

/// Tilt parameters (t, h): multiply the density by exp(-t|x|^2 + h.x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltParams {
    pub t: f64,
    pub h: Vec<f64>,
}

impl TiltParams {
    pub fn none(dim: usize) -> Self {
        TiltParams { t: 0.0, h: vec![0.0; dim] }
    }

    pub fn new(t: f64, h: Vec<f64>) -> Result<Self> {
        let tp = TiltParams { t, h };
        tp.validate()?;
        Ok(tp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!("tilt t must be finite and >= 0, got {}", self.t)));
        }
        if self.h.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tilt h must be finite"));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.t == 0.0 && self.h.iter().all(|&v| v == 0.0)
    }

    /// log of the tilt factor: -t|x|^2 + h.x.
    pub fn log_factor(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.h.len());
        let mut s = 0.0;
        let mut n2 = 0.0;
        for (xi, hi) in x.iter().zip(&self.h) {
            s += hi * xi;
            n2 += xi * xi;
        }
        s - self.t * n2
    }
}

impl MeasureSpec {
    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::Gaussian { mean, .. } => mean.len(),
            MeasureSpec::UniformCube { dim, .. }
            | MeasureSpec::UniformBall { dim, .. }
            | MeasureSpec::RadialProfile { dim, .. }
            | MeasureSpec::SmoothPotential { dim, .. } => *dim,
            MeasureSpec::Product { factors } => factors.len(),
            MeasureSpec::OneDimGrid { .. } => 1,
            MeasureSpec::TaperedCube { n, .. } => n + 1,
        }
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian_diag(&vec![1.0; dim])
    }

    pub fn gaussian_diag(variances: &[f64]) -> Self {
        let d = variances.len();
        let mut cov = vec![vec![0.0; d]; d];
        for (i, v) in variances.iter().enumerate() {
            cov[i][i] = *v;
        }
        MeasureSpec::Gaussian { mean: vec![0.0; d], covariance: cov }
    }

    /// Unit-variance cube: Uniform[-sqrt3, sqrt3]^dim.
    pub fn unit_variance_cube(dim: usize) -> Self {
        MeasureSpec::UniformCube { half_width: 3f64.sqrt(), dim }
    }

    /// Build a OneDimGrid from raw nonnegative density values, normalizing
    /// the trapezoid mass to 1.
    pub fn one_dim_grid(x0: f64, dx: f64, mut density: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite() && x0.is_finite()) {
            return Err(Error::invalid("grid needs finite x0 and dx > 0"));
        }
        if density.len() < 2 {
            return Err(Error::invalid("grid needs at least 2 density values"));
        }
        if density.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid(
                "grid density values must be finite and positive (trim the support instead)",
            ));
        }
        let n = density.len();
        let mut mass = 0.0;
        for (i, v) in density.iter().enumerate() {
            let c = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            mass += c * v * dx;
        }
        for v in &mut density {
            *v /= mass;
        }
        Ok(MeasureSpec::OneDimGrid { x0, dx, density })
    }

    /// Radial profile from a log-profile function tabulated on [0, r_max].
    pub fn radial_from_fn(
        log_profile: impl Fn(f64) -> f64,
        r_max: f64,
        table_len: usize,
        dim: usize,
    ) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) || table_len < 2 || dim == 0 {
            return Err(Error::invalid("radial profile needs r_max > 0, table_len >= 2, dim >= 1"));
        }
        let step = r_max / (table_len - 1) as f64;
        let radii: Vec<f64> = (0..table_len).map(|i| step * i as f64).collect();
        let values: Vec<f64> = radii.iter().map(|&r| log_profile(r)).collect();
        let spec = MeasureSpec::RadialProfile { radii, log_profile: values, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::Gaussian { mean, covariance } => {
                let d = mean.len();
                if d == 0 {
                    return Err(Error::invalid("Gaussian needs dim >= 1"));
                }
                if covariance.len() != d || covariance.iter().any(|row| row.len() != d) {
                    return Err(Error::DimensionMismatch { expected: d, got: covariance.len() });
                }
                if mean.iter().any(|v| !v.is_finite())
                    || covariance.iter().flatten().any(|v| !v.is_finite())
                {
                    return Err(Error::invalid("Gaussian parameters must be finite"));
                }
                for i in 0..d {
                    for j in 0..i {
                        if (covariance[i][j] - covariance[j][i]).abs()
                            > 1e-10 * (1.0 + covariance[i][i].abs() + covariance[j][j].abs())
                        {
                            return Err(Error::invalid("covariance must be symmetric"));
                        }
                    }
                }
                let cov = nested_to_array(covariance);
                linalg::cholesky(&cov.view())?;
                Ok(())
            }
            MeasureSpec::UniformCube { half_width, dim } => {
                if !(half_width.is_finite() && *half_width > 0.0) || *dim == 0 {
                    return Err(Error::invalid("cube needs half_width > 0, dim >= 1"));
                }
                Ok(())
            }
            MeasureSpec::UniformBall { radius, dim } => {
                if !(radius.is_finite() && *radius > 0.0) || *dim == 0 {
                    return Err(Error::invalid("ball needs radius > 0, dim >= 1"));
                }
                Ok(())
            }
            MeasureSpec::RadialProfile { radii, log_profile, dim } => {
                if *dim == 0 || radii.len() < 2 || radii.len() != log_profile.len() {
                    return Err(Error::invalid("radial profile table malformed"));
                }
                if radii[0] != 0.0 {
                    return Err(Error::invalid("radial profile table must start at r = 0"));
                }
                if log_profile.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("radial log profile must be finite on its table"));
                }
                let mut prev_slope = f64::INFINITY;
                for w in 0..radii.len() - 1 {
                    let dr = radii[w + 1] - radii[w];
                    if !(dr > 0.0) {
                        return Err(Error::invalid("radii must be strictly increasing"));
                    }
                    let slope = (log_profile[w + 1] - log_profile[w]) / dr;
                    if slope > 1e-9 {
                        return Err(Error::invalid("radial log profile must be nonincreasing"));
                    }
                    if slope > prev_slope + 1e-9 {
                        return Err(Error::invalid("radial log profile must be concave"));
                    }
                    prev_slope = slope;
                }
                Ok(())
            }
            MeasureSpec::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::invalid("product needs at least one factor"));
                }
                for f in factors {
                    if f.dim() != 1 {
                        return Err(Error::invalid("product factors must be one-dimensional"));
                    }
                    f.validate()?;
                }
                Ok(())
            }
            MeasureSpec::OneDimGrid { x0, dx, density } => {
                if !(dx.is_finite() && *dx > 0.0 && x0.is_finite()) || density.len() < 2 {
                    return Err(Error::invalid("grid needs finite x0, dx > 0, >= 2 values"));
                }
                if density.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::invalid("grid density values must be positive"));
                }
                let n = density.len();
                let mut mass = 0.0;
                for (i, v) in density.iter().enumerate() {
                    let c = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    mass += c * v * dx;
                }
                if (mass - 1.0).abs() > 1e-3 {
                    return Err(Error::invalid(format!(
                        "grid density integrates to {mass}, expected 1 within 1e-3"
                    )));
                }
                // Discrete log-concavity of the table (uniform spacing).
                for i in 1..n - 1 {
                    let second =
                        density[i - 1].ln() - 2.0 * density[i].ln() + density[i + 1].ln();
                    if second > 1e-7 {
                        return Err(Error::invalid(format!(
                            "grid density is not log-concave near index {i}"
                        )));
                    }
                }
                Ok(())
            }
            MeasureSpec::SmoothPotential { quadratic, quartic, dim } => {
                if *dim == 0 {
                    return Err(Error::invalid("smooth potential needs dim >= 1"));
                }
                if !(quadratic.is_finite() && quartic.is_finite())
                    || *quadratic < 0.0
                    || *quartic < 0.0
                    || (*quadratic == 0.0 && *quartic == 0.0)
                {
                    return Err(Error::invalid(
                        "smooth potential needs quadratic, quartic >= 0, not both zero",
                    ));
                }
                Ok(())
            }
            MeasureSpec::TaperedCube { n, c0 } => {
                if *n == 0 || !(c0.is_finite() && *c0 > 0.0) {
                    return Err(Error::invalid("tapered cube needs n >= 1 and c0 > 0"));
                }
                Ok(())
            }
        }
    }
}

fn nested_to_array(rows: &[Vec<f64>]) -> Array2<f64> {
    let d = rows.len();
    let mut a = Array2::zeros((d, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            a[[i, j]] = *v;
        }
    }
    a
}

/// Compiled measure: family-specific precomputations for hot evaluation loops.
#[derive(Clone, Debug)]
pub struct Measure {
    pub spec: MeasureSpec,
    kind: Kind,
}

#[derive(Clone, Debug)]
enum Kind {
    Gaussian {
        mean: Array1<f64>,
        /// Lower Cholesky factor of the covariance.
        chol: Array2<f64>,
        /// Inverse covariance (for gradients and tilt closed forms).
        precision: Array2<f64>,
    },
    Cube {
        hw: f64,
        dim: usize,
    },
    Ball {
        radius: f64,
        dim: usize,
    },
    Radial {
        radii: Vec<f64>,
        logv: Vec<f64>,
        dim: usize,
    },
    Product {
        factors: Vec<Measure>,
    },
    Grid {
        x0: f64,
        dx: f64,
        logv: Vec<f64>,
    },
    Smooth {
        q: f64,
        c: f64,
        dim: usize,
    },
    Tapered {
        body: TaperedCubeBody,
    },
}

impl Measure {
    pub fn compile(spec: &MeasureSpec) -> Result<Self> {
        spec.validate()?;
        let kind = match spec {
            MeasureSpec::Gaussian { mean, covariance } => {
                let cov = nested_to_array(covariance);
                let chol = linalg::cholesky(&cov.view())?;
                let precision = linalg::spd_inverse(&cov.view())?;
                Kind::Gaussian { mean: Array1::from_vec(mean.clone()), chol, precision }
            }
            MeasureSpec::UniformCube { half_width, dim } => Kind::Cube { hw: *half_width, dim: *dim },
            MeasureSpec::UniformBall { radius, dim } => Kind::Ball { radius: *radius, dim: *dim },
            MeasureSpec::RadialProfile { radii, log_profile, dim } => Kind::Radial {
                radii: radii.clone(),
                logv: log_profile.clone(),
                dim: *dim,
            },
            MeasureSpec::Product { factors } => Kind::Product {
                factors: factors.iter().map(Measure::compile).collect::<Result<_>>()?,
            },
            MeasureSpec::OneDimGrid { x0, dx, density } => Kind::Grid {
                x0: *x0,
                dx: *dx,
                logv: density.iter().map(|v| v.ln()).collect(),
            },
            MeasureSpec::SmoothPotential { quadratic, quartic, dim } => {
                Kind::Smooth { q: *quadratic, c: *quartic, dim: *dim }
            }
            MeasureSpec::TaperedCube { n, c0 } => {
                Kind::Tapered { body: TaperedCubeBody::new(*n, *c0)? }
            }
        };
        Ok(Measure { spec: spec.clone(), kind })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Unnormalized log density of the untilted measure; -inf off support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim(), "point dimension mismatch");
        match &self.kind {
            Kind::Gaussian { mean, chol, .. } => {
                -0.5 * linalg::mahalanobis_sq(&chol.view(), x, mean.as_slice().unwrap())
            }
            Kind::Cube { hw, .. } => {
                if x.iter().all(|v| v.abs() <= *hw) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::Ball { radius, .. } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                if n2 <= radius * radius {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::Radial { radii, logv, .. } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                interp_table(radii, logv, r)
            }
            Kind::Product { factors } => {
                let mut s = 0.0;
                for (f, &xi) in factors.iter().zip(x) {
                    s += f.log_density(&[xi]);
                    if s == f64::NEG_INFINITY {
                        return s;
                    }
                }
                s
            }
            Kind::Grid { x0, dx, logv } => {
                let u = (x[0] - x0) / dx;
                let last = (logv.len() - 1) as f64;
                if !(0.0..=last).contains(&u) {
                    return f64::NEG_INFINITY;
                }
                let i = (u.floor() as usize).min(logv.len() - 2);
                let frac = u - i as f64;
                logv[i] * (1.0 - frac) + logv[i + 1] * frac
            }
            Kind::Smooth { q, c, .. } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                -(0.5 * q * n2 + 0.25 * c * n2 * n2)
            }
            Kind::Tapered { body } => {
                if body.contains(x) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Unnormalized log density of the tilted measure
    /// log f(x) - t|x|^2 + h.x; -inf off support.
    pub fn log_density_tilted(&self, tilt: &TiltParams, x: &[f64]) -> f64 {
        let base = self.log_density(x);
        if base == f64::NEG_INFINITY {
            return base;
        }
        base + tilt.log_factor(x)
    }

    /// Gradient of the tilted potential V(x) + t|x|^2 - h.x for families with
    /// a smooth potential (Gaussian, SmoothPotential).
    pub fn grad_potential_tilted(&self, tilt: &TiltParams, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = match &self.kind {
            Kind::Gaussian { mean, precision, .. } => {
                let d = x.len();
                let mut g = vec![0.0; d];
                for i in 0..d {
                    let mut s = 0.0;
                    for j in 0..d {
                        s += precision[[i, j]] * (x[j] - mean[j]);
                    }
                    g[i] = s;
                }
                g
            }
            Kind::Smooth { q, c, .. } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                let coef = q + c * n2;
                x.iter().map(|v| coef * v).collect()
            }
            _ => {
                return Err(Error::invalid(
                    "gradient available only for smooth-potential families",
                ))
            }
        };
        for i in 0..x.len() {
            g[i] += 2.0 * tilt.t * x[i] - tilt.h[i];
        }
        Ok(g)
    }

    /// Cholesky factor of the Gaussian covariance, if this is a Gaussian.
    pub fn gaussian_parts(&self) -> Option<(&Array1<f64>, &Array2<f64>, &Array2<f64>)> {
        match &self.kind {
            Kind::Gaussian { mean, chol, precision } => Some((mean, chol, precision)),
            _ => None,
        }
    }

    pub fn product_factors(&self) -> Option<&[Measure]> {
        match &self.kind {
            Kind::Product { factors } => Some(factors),
            _ => None,
        }
    }

    /// The body carrying the measure, when the measure is uniform on one.
    pub fn as_body(&self) -> Option<Box<dyn ConvexBody>> {
        match &self.kind {
            Kind::Cube { hw, dim } => Some(Box::new(body::CubeBody::new(*hw, *dim))),
            Kind::Ball { radius, dim } => Some(Box::new(body::BallBody::new(*radius, *dim))),
            Kind::Tapered { body } => Some(Box::new(body.clone())),
            _ => None,
        }
    }

    pub fn has_bounded_support(&self) -> bool {
        match &self.kind {
            Kind::Cube { .. } | Kind::Ball { .. } | Kind::Radial { .. } | Kind::Grid { .. }
            | Kind::Tapered { .. } => true,
            Kind::Gaussian { .. } | Kind::Smooth { .. } => false,
            Kind::Product { factors } => factors.iter().all(Measure::has_bounded_support),
        }
    }

    /// Axis-aligned box that contains the support (bounded families) or all
    /// but a negligible e^-LOG_DROP-level density fraction (unbounded ones).
    pub fn sampling_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            Kind::Gaussian { mean, chol, .. } => {
                let d = mean.len();
                let mut lo = vec![0.0; d];
                let mut hi = vec![0.0; d];
                for i in 0..d {
                    // Row norm of the Cholesky factor is sqrt of Cov_ii.
                    let sd = (0..d).map(|j| chol[[i, j]] * chol[[i, j]]).sum::<f64>().sqrt();
                    lo[i] = mean[i] - 14.0 * sd;
                    hi[i] = mean[i] + 14.0 * sd;
                }
                (lo, hi)
            }
            Kind::Cube { hw, dim } => (vec![-hw; *dim], vec![*hw; *dim]),
            Kind::Ball { radius, dim } => (vec![-radius; *dim], vec![*radius; *dim]),
            Kind::Radial { radii, dim, .. } => {
                let r = *radii.last().unwrap();
                (vec![-r; *dim], vec![r; *dim])
            }
            Kind::Product { factors } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for f in factors {
                    let (l, h) = f.sampling_box();
                    lo.push(l[0]);
                    hi.push(h[0]);
                }
                (lo, hi)
            }
            Kind::Grid { x0, dx, logv } => {
                let end = x0 + dx * (logv.len() - 1) as f64;
                (vec![*x0], vec![end])
            }
            Kind::Smooth { q, c, dim } => {
                // Radius where V reaches LOG_DROP.
                let drop = crate::quad::LOG_DROP;
                let r2 = if *c > 0.0 {
                    (-q + (q * q + 8.0 * c * drop).sqrt()) / c
                } else {
                    2.0 * drop / q
                };
                let r = r2.sqrt();
                (vec![-r; *dim], vec![r; *dim])
            }
            Kind::Tapered { body } => body.bounding_box(),
        }
    }
}

fn interp_table(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > *xs.last().unwrap() {
        return f64::NEG_INFINITY;
    }
    let idx = xs.partition_point(|&r| r <= x);
    if idx >= xs.len() {
        return *vs.last().unwrap();
    }
    let i = idx - 1;
    let span = xs[i + 1] - xs[i];
    let frac = (x - xs[i]) / span;
    vs[i] * (1.0 - frac) + vs[i + 1] * frac
}

/// Free-function form of the density evaluation: compile-and-evaluate.
/// Hot loops should compile a `Measure` once instead.
pub fn log_density_unnormalized(spec: &MeasureSpec, tilt: &TiltParams, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: x.len() });
    }
    if tilt.h.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: tilt.h.len() });
    }
    tilt.validate()?;
    let m = Measure::compile(spec)?;
    Ok(m.log_density_tilted(tilt, x))
}

/// Spot-check midpoint log-concavity of the tilted density on random
/// segments inside the sampling box: log f((x+y)/2) must be at least the
/// average of the endpoint values, up to interpolation tolerance. Segments
/// with an endpoint off the support are skipped. Returns the number of
/// segments actually checked.
pub fn midpoint_logconcavity_check(
    measure: &Measure,
    tilt: &TiltParams,
    segments: usize,
    seed: u64,
) -> Result<usize> {
    use rand::Rng;
    let (lo, hi) = measure.sampling_box();
    let d = measure.dim();
    let mut rng = crate::rng::root_rng(seed);
    let mut checked = 0usize;
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut mid = vec![0.0; d];
    for _ in 0..segments {
        for i in 0..d {
            x[i] = rng.gen_range(lo[i]..hi[i]);
            y[i] = rng.gen_range(lo[i]..hi[i]);
            mid[i] = 0.5 * (x[i] + y[i]);
        }
        let fx = measure.log_density_tilted(tilt, &x);
        let fy = measure.log_density_tilted(tilt, &y);
        if fx == f64::NEG_INFINITY || fy == f64::NEG_INFINITY {
            continue;
        }
        let fm = measure.log_density_tilted(tilt, &mid);
        let lhs = fm;
        let rhs = 0.5 * (fx + fy);
        if lhs < rhs - 1e-7 * (1.0 + rhs.abs()) {
            return Err(Error::invalid(format!(
                "midpoint concavity violated: f(mid)={lhs} < avg={rhs} at segment {checked}"
            )));
        }
        checked += 1;
    }
    Ok(checked)
}
