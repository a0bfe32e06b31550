//! Concentration-function lower bounds over restricted half-measure set
//! families.
//!
//! The concentration function takes a supremum over all sets of measure 1/2,
//! which no estimator can scan. We restrict to two tractable families: half-
//! spaces through the directional median, and the centered ball of median
//! radius together with its complement. Every reported curve value is
//! therefore a LOWER bound on the true concentration function.

use crate::cloud::{weighted_median, WeightedCloud};
use crate::error::{Error, Result};

const MIN_CLOUD: usize = 10_000;

#[derive(Clone, Debug)]
pub struct ConcentrationCurve {
    pub rs: Vec<f64>,
    /// Lower bound on alpha(r): max over the set family of the mass farther
    /// than r from the chosen half-measure set.
    pub alpha: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Name of the family member attaining each maximum.
    pub argmax: Vec<String>,
}

/// Curve of lower bounds on the concentration function at the radii `rs`,
/// scanning half-spaces through the median along each supplied direction
/// plus the centered median ball and its complement.
pub fn concentration_function_lb(
    cloud: &WeightedCloud,
    rs: &[f64],
    directions: &[Vec<f64>],
) -> Result<ConcentrationCurve> {
    if cloud.n() < MIN_CLOUD {
        return Err(Error::invalid(format!(
            "concentration curve needs at least {MIN_CLOUD} points, got {}",
            cloud.n()
        )));
    }
    if rs.is_empty() {
        return Err(Error::invalid("empty radius grid"));
    }
    if rs.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::invalid("radii must be finite and nonnegative"));
    }
    let weights = cloud.weights.as_slice().expect("contiguous weights");
    // Each family member is a scalar statistic s(x) with a cut c so that the
    // half-measure set is {s <= c} (or {s >= c}); the mass beyond distance r
    // is then a one-sided tail of s. The statistics are 1-Lipschitz in x, so
    // the tail at offset r is exactly mu(A_r^c) for half-spaces and the ball.
    struct Member {
        name: String,
        values: Vec<f64>,
        cut: f64,
        upper: bool, // A_r^c = {values > cut + r} when true, {values < cut - r} otherwise
    }
    let mut members = Vec::new();
    for (k, theta) in directions.iter().enumerate() {
        if theta.len() != cloud.dim() {
            return Err(Error::DimensionMismatch { expected: cloud.dim(), got: theta.len() });
        }
        let proj = cloud.project(theta);
        let med = weighted_median(&proj, weights);
        members.push(Member {
            name: format!("half_space[{k}]+"),
            values: proj.clone(),
            cut: med,
            upper: true,
        });
        members.push(Member {
            name: format!("half_space[{k}]-"),
            values: proj,
            cut: med,
            upper: false,
        });
    }
    let radii: Vec<f64> = cloud.squared_norms().iter().map(|s| s.sqrt()).collect();
    let med_r = weighted_median(&radii, weights);
    members.push(Member {
        name: "ball_complement".into(),
        values: radii.clone(),
        cut: med_r,
        upper: false, // A = {|x| >= med}: points deeper than r inside the ball
    });
    members.push(Member {
        name: "ball".into(),
        values: radii,
        cut: med_r,
        upper: true, // A = {|x| <= med}: points farther than r outside
    });

    let sum_w_sq: f64 = weights.iter().map(|w| w * w).sum();
    let mut alpha = Vec::with_capacity(rs.len());
    let mut stderr = Vec::with_capacity(rs.len());
    let mut argmax = Vec::with_capacity(rs.len());
    for &r in rs {
        let mut best = f64::NEG_INFINITY;
        let mut best_name = String::new();
        for m in &members {
            let tail: f64 = if m.upper {
                let c = m.cut + r;
                weights.iter().zip(&m.values).filter(|(_, v)| **v > c).map(|(w, _)| w).sum()
            } else {
                let c = m.cut - r;
                weights.iter().zip(&m.values).filter(|(_, v)| **v < c).map(|(w, _)| w).sum()
            };
            if tail > best {
                best = tail;
                best_name = m.name.clone();
            }
        }
        alpha.push(best);
        stderr.push((best * (1.0 - best).max(0.0) * sum_w_sq).sqrt());
        argmax.push(best_name);
    }
    Ok(ConcentrationCurve { rs: rs.to_vec(), alpha, stderr, argmax })
}
