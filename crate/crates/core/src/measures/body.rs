//! Convex bodies with membership, bounding boxes, and analytic chords.
//!
//! Chords (the intersection of a line with the body) are the geometric
//! primitive behind hit-and-run sampling; each body computes them in closed
//! form except for the tapered cube's cone constraint, which is convex in the
//! line parameter and solved by bisection in O(1) evaluations after
//! precomputing three dot products.

use crate::cloud::Estimate;
use crate::dist;
use crate::error::{Error, Result};
use rand::Rng;

/// Pull chord endpoints a hair toward the interior anchor s = 0 so the
/// returned parameters stay members despite roundoff in the boundary solve.
fn inward(lo: f64, hi: f64) -> (f64, f64) {
    let margin = |s: f64| 1e-12 * (1.0 + s.abs());
    ((lo + margin(lo)).min(0.0), (hi - margin(hi)).max(0.0))
}

pub trait ConvexBody: Send + Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
    /// Axis-aligned box containing the body: (lower, upper) corners.
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);
    /// A strictly interior point.
    fn interior_point(&self) -> Vec<f64>;
    /// Parameter interval {s : x + s u inside body} for an interior x.
    /// Both returned endpoints are certified members (up to 1e-12 slack).
    fn chord(&self, x: &[f64], u: &[f64]) -> (f64, f64);
}

#[derive(Clone, Debug)]
pub struct CubeBody {
    hw: f64,
    dim: usize,
}

impl CubeBody {
    pub fn new(hw: f64, dim: usize) -> Self {
        assert!(hw > 0.0 && dim > 0);
        CubeBody { hw, dim }
    }
}

impl ConvexBody for CubeBody {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.abs() <= self.hw)
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-self.hw; self.dim], vec![self.hw; self.dim])
    }

    fn interior_point(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn chord(&self, x: &[f64], u: &[f64]) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..self.dim {
            if u[i].abs() < 1e-300 {
                continue;
            }
            let a = (-self.hw - x[i]) / u[i];
            let b = (self.hw - x[i]) / u[i];
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            lo = lo.max(a);
            hi = hi.min(b);
        }
        debug_assert!(lo <= hi, "chord called with x outside the cube");
        inward(lo, hi)
    }
}

#[derive(Clone, Debug)]
pub struct BallBody {
    radius: f64,
    dim: usize,
}

impl BallBody {
    pub fn new(radius: f64, dim: usize) -> Self {
        assert!(radius > 0.0 && dim > 0);
        BallBody { radius, dim }
    }
}

impl ConvexBody for BallBody {
    fn dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().map(|v| v * v).sum::<f64>() <= self.radius * self.radius
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![-self.radius; self.dim], vec![self.radius; self.dim])
    }

    fn interior_point(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn chord(&self, x: &[f64], u: &[f64]) -> (f64, f64) {
        // |x + s u|^2 = r^2: a s^2 + 2 b s + c = 0.
        let a: f64 = u.iter().map(|v| v * v).sum();
        let b: f64 = x.iter().zip(u).map(|(xi, ui)| xi * ui).sum();
        let c: f64 = x.iter().map(|v| v * v).sum::<f64>() - self.radius * self.radius;
        let disc = (b * b - a * c).max(0.0);
        let sq = disc.sqrt();
        inward((-b - sq) / a, (-b + sq) / a)
    }
}

/// The tapered cube in R^{n+1}: points (x, lambda) with
/// max_i |x_i| <= sqrt(3)  and  |x|_2 <= sqrt(n) + c0 (1 - |lambda|).
///
/// The lambda-range implied by the cone constraint is
/// |lambda| <= 1 + sqrt(n)/c0 (attained as |x| shrinks to 0), and the
/// admissible Euclidean radius of the x-part shrinks linearly in |lambda|.
#[derive(Clone, Debug)]
pub struct TaperedCubeBody {
    n: usize,
    c0: f64,
    sqrt_n: f64,
    lambda_max: f64,
}

impl TaperedCubeBody {
    pub fn new(n: usize, c0: f64) -> Result<Self> {
        if n == 0 || !(c0.is_finite() && c0 > 0.0) {
            return Err(Error::invalid("tapered cube needs n >= 1 and c0 > 0"));
        }
        let sqrt_n = (n as f64).sqrt();
        Ok(TaperedCubeBody { n, c0, sqrt_n, lambda_max: 1.0 + sqrt_n / c0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Admissible |x|_2 radius at a given lambda (negative when the slice is
    /// empty).
    pub fn slice_radius(&self, lambda: f64) -> f64 {
        self.sqrt_n + self.c0 * (1.0 - lambda.abs())
    }

    fn cone_margin(&self, x_norm: f64, lambda: f64) -> f64 {
        x_norm + self.c0 * lambda.abs() - self.sqrt_n - self.c0
    }
}

impl ConvexBody for TaperedCubeBody {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn contains(&self, p: &[f64]) -> bool {
        if p.len() != self.n + 1 {
            return false;
        }
        let (x, lambda) = (&p[..self.n], p[self.n]);
        let hw = 3f64.sqrt();
        if x.iter().any(|v| v.abs() > hw) {
            return false;
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.cone_margin(norm, lambda) <= 0.0
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let hw = 3f64.sqrt();
        let mut lo = vec![-hw; self.n + 1];
        let mut hi = vec![hw; self.n + 1];
        lo[self.n] = -self.lambda_max;
        hi[self.n] = self.lambda_max;
        (lo, hi)
    }

    fn interior_point(&self) -> Vec<f64> {
        vec![0.0; self.n + 1]
    }

    fn chord(&self, p: &[f64], u: &[f64]) -> (f64, f64) {
        let n = self.n;
        let (x, lam) = (&p[..n], p[n]);
        let (ux, ulam) = (&u[..n], u[n]);
        // Cube part: per-coordinate interval intersection.
        let hw = 3f64.sqrt();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..n {
            if ux[i].abs() < 1e-300 {
                continue;
            }
            let a = (-hw - x[i]) / ux[i];
            let b = (hw - x[i]) / ux[i];
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            lo = lo.max(a);
            hi = hi.min(b);
        }
        // Lambda box implied by the cone at |x| = 0.
        if ulam.abs() >= 1e-300 {
            let a = (-self.lambda_max - lam) / ulam;
            let b = (self.lambda_max - lam) / ulam;
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            lo = lo.max(a);
            hi = hi.min(b);
        }
        if !lo.is_finite() || !hi.is_finite() {
            // Degenerate direction (u = 0): no movement possible.
            return (0.0, 0.0);
        }
        // Cone part: g(s) = |x + s ux| + c0 |lam + s ulam| - sqrt(n) - c0 is
        // convex with g(0) <= 0; bisect for each root when the box endpoint
        // violates it.
        let a2: f64 = x.iter().map(|v| v * v).sum();
        let ab: f64 = x.iter().zip(ux).map(|(a, b)| a * b).sum();
        let b2: f64 = ux.iter().map(|v| v * v).sum();
        let g = |s: f64| -> f64 {
            let norm = (a2 + 2.0 * ab * s + b2 * s * s).max(0.0).sqrt();
            self.cone_margin(norm, lam + s * ulam)
        };
        debug_assert!(g(0.0) <= 1e-9, "chord called with point outside the cone");
        let mut s_hi = hi;
        if g(hi) > 0.0 {
            let (mut inside, mut outside) = (0.0f64, hi);
            for _ in 0..90 {
                let mid = 0.5 * (inside + outside);
                if g(mid) <= 0.0 {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            s_hi = inside;
        }
        let mut s_lo = lo;
        if g(lo) > 0.0 {
            let (mut inside, mut outside) = (0.0f64, lo);
            for _ in 0..90 {
                let mid = 0.5 * (inside + outside);
                if g(mid) <= 0.0 {
                    inside = mid;
                } else {
                    outside = mid;
                }
            }
            s_lo = inside;
        }
        inward(s_lo, s_hi)
    }
}

/// Constructor for the tapered cube body in R^{n+1}.
pub fn make_tapered_cube_body(n: usize, c0: f64) -> Result<TaperedCubeBody> {
    TaperedCubeBody::new(n, c0)
}

/// Monte Carlo estimate of the (unnormalized) last-coordinate density of the
/// Gaussian-tilted uniform measure on the tapered cube.
#[derive(Clone, Debug)]
pub struct SliceDensity {
    pub lambdas: Vec<f64>,
    pub values: Vec<Estimate>,
}

/// Unnormalized density f_t(lambda) of the last coordinate of the measure
/// proportional to exp(-t |(x, lambda)|^2) restricted to the tapered cube,
/// estimated per grid point by Monte Carlo over the x-slice.
///
/// The slice integral factorizes as
/// f_t(lambda) = e^{-t lambda^2} * Integral_{cube} e^{-t|x|^2}
///               1{|x| <= slice_radius(lambda)} dx,
/// and x is drawn once from the per-coordinate truncated Gaussian
/// (coordinate-uniform when t = 0); the lambda-independent normalizer drops
/// out. Common samples across grid points make the ratio of any two values
/// far more accurate than the per-point standard errors suggest. Grid points
/// with an empty slice report exactly 0.
pub fn slice_density_lastcoord(
    body: &TaperedCubeBody,
    tilt_t: f64,
    lambdas: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SliceDensity> {
    if !(tilt_t >= 0.0 && tilt_t.is_finite()) {
        return Err(Error::invalid("tilt_t must be finite and >= 0"));
    }
    if lambdas.is_empty() {
        return Err(Error::BadGrid("empty lambda grid".into()));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid("lambda grid must be strictly increasing".into()));
    }
    if n_samples == 0 {
        return Err(Error::invalid("need n_samples >= 1"));
    }
    let hw = 3f64.sqrt();
    let n = body.n();
    let mut rng = crate::rng::root_rng(seed);
    let mut norms: Vec<f64> = Vec::with_capacity(n_samples);
    if tilt_t == 0.0 {
        for _ in 0..n_samples {
            let mut n2 = 0.0;
            for _ in 0..n {
                let v: f64 = rng.gen_range(-hw..hw);
                n2 += v * v;
            }
            norms.push(n2.sqrt());
        }
    } else {
        let sd = 1.0 / (2.0 * tilt_t).sqrt();
        for _ in 0..n_samples {
            let mut n2 = 0.0;
            for _ in 0..n {
                let v = dist::trunc_normal(&mut rng, 0.0, sd, -hw, hw);
                n2 += v * v;
            }
            norms.push(n2.sqrt());
        }
    }
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total = n_samples as f64;
    let values = lambdas
        .iter()
        .map(|&lam| {
            let radius = body.slice_radius(lam);
            let count = if radius < 0.0 {
                0
            } else {
                norms.partition_point(|&r| r <= radius)
            };
            let frac = count as f64 / total;
            let scale = (-tilt_t * lam * lam).exp();
            Estimate {
                value: scale * frac,
                stderr: scale * (frac * (1.0 - frac) / total).sqrt(),
                n_eff: total,
                seed,
            }
        })
        .collect();
    Ok(SliceDensity { lambdas: lambdas.to_vec(), values })
}
