//! Shared 1D sampling primitives: truncated normal and truncated exponential
//! draws used by chord samplers, slice estimators, and rejection proposals.
//!
//! The truncated normal uses the inverse CDF on the tail-safe side and falls
//! back to an exponential-proposal rejection step when the window sits so far
//! out that CDF values underflow. All draws consume a bounded number of
//! uniforms in expectation, so samplers built on these stay fast.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Draw from N(mean, sd^2) conditioned on [lo, hi].
pub fn trunc_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    assert!(sd > 0.0 && lo <= hi, "need sd > 0 and lo <= hi, got sd={sd} [{lo},{hi}]");
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    // Work on the lower-tail side, where CDF values stay representable.
    let (za, zb, flip) = if a + b > 0.0 { (-b, -a, true) } else { (a, b, false) };
    let z = trunc_std_normal(rng, za, zb);
    let z = if flip { -z } else { z };
    (mean + sd * z).clamp(lo, hi)
}

/// Standard normal conditioned on [a, b] with a + b <= 0.
fn trunc_std_normal<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let ca = n.cdf(a);
    let cb = n.cdf(b);
    if cb > ca && cb > 0.0 {
        let u = rng.gen_range(ca..cb);
        return n.inverse_cdf(u).clamp(a, b);
    }
    // Both CDF values underflowed: the window lies beyond z ~ -37. Mass
    // concentrates at b; with v = b - z the density is proportional to
    // exp(b*v - v^2/2) on [0, b-a].
    let rate = -b;
    let len = b - a;
    debug_assert!(rate > 0.0, "underflow branch requires a far lower tail");
    loop {
        if rate * len > 1e-2 {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let v = e / rate;
            if v <= len && rng.gen::<f64>() < (-0.5 * v * v).exp() {
                return b - v;
            }
        } else {
            // Window much shorter than the decay scale: near-flat density.
            let v = rng.gen::<f64>() * len;
            if rng.gen::<f64>() < (b * v - 0.5 * v * v).exp() {
                return b - v;
            }
        }
    }
}

/// Draw S on [0, len] with density proportional to exp(-rate * s); any real
/// rate (negative means increasing density), rate = 0 means uniform.
pub fn trunc_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64, len: f64) -> f64 {
    assert!(len > 0.0 && len.is_finite() && rate.is_finite(), "bad trunc_exp args");
    let u: f64 = rng.gen();
    if (rate * len).abs() < 1e-12 {
        return u * len;
    }
    // Inverse CDF: s = -ln(1 - u(1 - e^{-rate*len})) / rate, via expm1/ln_1p.
    let q = -(-rate * len).exp_m1();
    let s = -(-u * q).ln_1p() / rate;
    s.clamp(0.0, len)
}
