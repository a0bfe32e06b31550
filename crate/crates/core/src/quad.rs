//! Deterministic 1D quadrature on uniform grids.
//!
//! This is the oracle engine behind exact-moment 1D sampling, reference
//! values for Orlicz norms, and 1D tilt computations. Everything is the
//! trapezoid rule on a uniform grid: unnormalized log densities go in,
//! normalized point masses come out. Unbounded supports are truncated where
//! the log density falls `LOG_DROP` units below its maximum (density ratio
//! e^-90), far below every tolerance used by the estimators built on top.
//! Grids are aligned to support edges by bisection so indicator-type
//! densities do not pay an O(step) boundary penalty.

use crate::error::{Error, Result};

/// Log-density drop (from the maximum) at which tails are truncated.
pub const LOG_DROP: f64 = 90.0;

const MAX_POINTS: usize = 8_000_001;

/// Numerically stable log(sum(exp(x_i))). Empty or all -inf input gives -inf.
pub fn logsumexp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = terms.into_iter().collect();
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

#[derive(Clone, Debug)]
pub struct Quadrature1d {
    xs: Vec<f64>,
    /// Normalized trapezoid masses (sum exactly renormalized to 1).
    probs: Vec<f64>,
    /// Running sum of `probs`, precomputed so quantile lookups bisect.
    cdf: Vec<f64>,
    /// Unnormalized log-density values at the grid points.
    logf: Vec<f64>,
    step: f64,
}

impl Quadrature1d {
    /// Build on a fixed interval with `n` uniformly spaced points.
    pub fn on_interval(
        lo: f64,
        hi: f64,
        n: usize,
        logpdf: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::BadGrid(format!("bad interval [{lo}, {hi}]")));
        }
        if !(9..=MAX_POINTS).contains(&n) {
            return Err(Error::BadGrid(format!("grid size {n} out of range")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        // Pin the last node to hi exactly: lo + step*(n-1) can round one ulp
        // past the support edge, silently zeroing the boundary mass. On
        // symmetric intervals, mirror the nodes bitwise so that even
        // densities produce exactly mirrored masses (and exactly zero odd
        // moments via paired summation).
        let xs: Vec<f64> = if lo == -hi {
            let mut xs = vec![0.0; n];
            for i in 0..n / 2 {
                let x = if i == 0 { lo } else { lo + step * i as f64 };
                xs[i] = x;
                xs[n - 1 - i] = -x;
            }
            xs
        } else {
            (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
        };
        let logf: Vec<f64> = xs.iter().map(|&x| logpdf(x)).collect();
        Self::from_grid(xs, logf, step)
    }

    /// Build on an automatically chosen interval: expand around
    /// `center +- scale` until the log density drops `LOG_DROP` below its
    /// maximum (or leaves the support), align to support edges, then lay
    /// down ~`n_target` points.
    pub fn auto(
        center: f64,
        scale: f64,
        n_target: usize,
        logpdf: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(center.is_finite() && scale.is_finite() && scale > 0.0) {
            return Err(Error::BadGrid("bad center/scale".into()));
        }
        const COARSE: usize = 4097;
        let mut half = 8.0 * scale;
        let (lo, hi, coarse_xs, coarse_logf) = loop {
            let lo = center - half;
            let hi = center + half;
            let step = (hi - lo) / (COARSE - 1) as f64;
            let xs: Vec<f64> = (0..COARSE).map(|i| lo + step * i as f64).collect();
            let lf: Vec<f64> = xs.iter().map(|&x| logpdf(x)).collect();
            let max = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                if half > 1e9 * scale {
                    return Err(Error::BadGrid("no density mass found".into()));
                }
                half *= 4.0;
                continue;
            }
            let cut = max - LOG_DROP;
            if lf[0] <= cut && lf[COARSE - 1] <= cut {
                break (lo, hi, xs, lf);
            }
            if half > 1e12 * scale {
                return Err(Error::BadGrid(
                    "density tail does not decay within expansion budget".into(),
                ));
            }
            half *= 4.0;
        };
        let max = coarse_logf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cut = max - LOG_DROP;
        let i_lo = coarse_logf.iter().position(|&v| v > cut).unwrap();
        let i_hi = coarse_logf.iter().rposition(|&v| v > cut).unwrap();
        // Step one coarse cell outward, then tighten support edges exactly.
        let mut a = if i_lo > 0 { coarse_xs[i_lo - 1] } else { lo };
        let mut b = if i_hi + 1 < COARSE { coarse_xs[i_hi + 1] } else { hi };
        if i_lo > 0 && !coarse_logf[i_lo - 1].is_finite() {
            a = refine_edge(coarse_xs[i_lo - 1], coarse_xs[i_lo], &logpdf);
        }
        if i_hi + 1 < COARSE && !coarse_logf[i_hi + 1].is_finite() {
            b = refine_edge(coarse_xs[i_hi + 1], coarse_xs[i_hi], &logpdf);
        }
        let n = n_target.clamp(9, MAX_POINTS);
        Self::on_interval(a, b, n, logpdf)
    }

    fn from_grid(xs: Vec<f64>, logf: Vec<f64>, step: f64) -> Result<Self> {
        let n = xs.len();
        if logf.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::BadGrid("log density must be finite or -inf".into()));
        }
        let max = logf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::BadGrid("density is zero on the whole grid".into()));
        }
        let mut probs: Vec<f64> = (0..n)
            .map(|i| {
                let c = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                c * (logf[i] - max).exp()
            })
            .collect();
        let total: f64 = probs.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::BadGrid("density mass is not positive".into()));
        }
        for p in &mut probs {
            *p /= total;
        }
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        Ok(Quadrature1d { xs, probs, cdf, logf, step })
    }

    pub fn points(&self) -> &[f64] {
        &self.xs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_density_values(&self) -> &[f64] {
        &self.logf
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Normalized pointwise density at node `i` (mass divided by the node's
    /// trapezoid cell length, which is halved at the two ends).
    pub fn density_at(&self, i: usize) -> f64 {
        let coef = if i == 0 || i == self.xs.len() - 1 { 0.5 } else { 1.0 };
        self.probs[i] / (coef * self.step)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Exactly rescale the grid x -> c*x (masses unchanged). Used where exact
    /// scale equivariance of downstream statistics is required.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0 && c.is_finite(), "scale factor must be positive");
        Quadrature1d {
            xs: self.xs.iter().map(|x| c * x).collect(),
            probs: self.probs.clone(),
            cdf: self.cdf.clone(),
            logf: self.logf.clone(),
            step: self.step * c,
        }
    }

    /// Expectation with paired-end summation: terms at i and n-1-i are added
    /// together first, so mirrored masses cancel odd integrands exactly.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let n = self.xs.len();
        let term = |i: usize| self.probs[i] * g(self.xs[i]);
        let mut s = 0.0;
        let (mut i, mut j) = (0, n - 1);
        while i < j {
            s += term(i) + term(j);
            i += 1;
            j -= 1;
        }
        if i == j {
            s += term(i);
        }
        s
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    pub fn moment(&self, k: u32) -> f64 {
        self.expect(|x| x.powi(k as i32))
    }

    pub fn central_moment(&self, k: u32) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m).powi(k as i32))
    }

    /// log E[e^{s X}], stable for any s.
    pub fn log_mgf(&self, s: f64) -> f64 {
        logsumexp(
            self.xs
                .iter()
                .zip(&self.probs)
                .map(|(&x, &p)| if p > 0.0 { p.ln() + s * x } else { f64::NEG_INFINITY }),
        )
    }

    /// Forward and backward cumulative masses: out.0[i] = P(X <= x_i),
    /// out.1[i] = P(X >= x_i). Backward accumulation keeps tail values exact
    /// at small magnitudes instead of computing 1 - cdf.
    pub fn cdf_arrays(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.probs.len();
        let mut fwd = vec![0.0; n];
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.probs[i];
            fwd[i] = acc;
        }
        let mut bwd = vec![0.0; n];
        acc = 0.0;
        for i in (0..n).rev() {
            acc += self.probs[i];
            bwd[i] = acc;
        }
        (fwd, bwd)
    }

    /// Quantile with linear interpolation inside grid cells; q in [0, 1].
    /// Bisects the precomputed CDF, so a lookup costs O(log n).
    pub fn quantile(&self, q: f64) -> f64 {
        assert!((0.0..=1.0).contains(&q), "quantile level {q} outside [0,1]");
        let i = self.cdf.partition_point(|&c| c < q);
        if i >= self.cdf.len() {
            return *self.xs.last().unwrap();
        }
        if i == 0 || self.probs[i] <= 0.0 {
            return self.xs[i];
        }
        let acc = self.cdf[i - 1];
        let frac = (q - acc) / self.probs[i];
        self.xs[i - 1] + frac.clamp(0.0, 1.0) * (self.xs[i] - self.xs[i - 1])
    }
}

/// Bisect between a point outside the support (log density -inf) and one
/// inside it; returns a point inside, within 1e-15 relative of the edge.
fn refine_edge(outside: f64, inside: f64, logpdf: &impl Fn(f64) -> f64) -> f64 {
    let (mut out, mut ins) = (outside, inside);
    for _ in 0..80 {
        let mid = 0.5 * (out + ins);
        if logpdf(mid).is_finite() {
            ins = mid;
        } else {
            out = mid;
        }
    }
    ins
}
