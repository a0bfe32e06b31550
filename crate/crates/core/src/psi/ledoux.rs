//! The half-line isoperimetric functional of a one-dimensional density.
//!
//! For a 1D probability with density f and CDF F, the functional scans sets
//! S = (-inf, s] and computes
//!     I(s) = f(s) / ( F(s) (1 - F(s)) sqrt(log 1/min(F(s), 1 - F(s))) ),
//! returning k = 1 / inf_s I(s). The infimum over all sets is restricted to
//! half-lines, which for log-concave measures are the natural candidate
//! extremizers; the restriction is part of the definition here, not an
//! assumption of optimality. Tail CDF values come from a backward
//! accumulation, so 1 - F never suffers cancellation.

use crate::error::{Error, Result};
use crate::quad::Quadrature1d;

/// Smallest tail mass admitted into the scan; below this the grid cannot
/// resolve the density against the CDF product.
const TAIL_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug)]
pub struct LedouxK {
    /// k = 1 / inf_s I(s) over half-lines.
    pub k: f64,
    /// Location of the infimum.
    pub argmin: f64,
    /// Set when the scan cannot pin the extremizing cut: the infimum lands
    /// on the edge of the resolvable range, or a neighboring node's value
    /// differs from it by more than 1%.
    pub coarse: bool,
}

/// Half-line isoperimetric constant of a 1D quadrature engine.
pub fn ledoux_k_1d(engine: &Quadrature1d) -> Result<LedouxK> {
    if engine.len() < 9 {
        return Err(Error::invalid("ledoux scan needs a nontrivial grid"));
    }
    let (fwd, bwd) = engine.cdf_arrays();
    let xs = engine.points();
    // I at every grid node whose two tails the grid can resolve.
    let mut vals: Vec<(usize, f64)> = Vec::new();
    for i in 0..xs.len() {
        let f = engine.density_at(i);
        let (cdf, tail) = (fwd[i], bwd[i]);
        let m = cdf.min(tail);
        if f > 0.0 && m > TAIL_FLOOR && cdf < 1.0 && tail < 1.0 {
            let denom = cdf * tail * (1.0 / m).ln().sqrt();
            if denom > 0.0 {
                vals.push((i, f / denom));
            }
        }
    }
    if vals.len() < 3 {
        return Err(Error::invalid("no resolvable half-line cut on the grid"));
    }
    let mut best_j = 0usize;
    for (j, v) in vals.iter().enumerate() {
        if v.1 < vals[best_j].1 {
            best_j = j;
        }
    }
    let best = vals[best_j].1;
    let k = 1.0 / best;
    let argmin = xs[vals[best_j].0];
    // The minimum must sit strictly inside the resolvable run with both
    // neighbors within 1%; otherwise the grid has not resolved the cut.
    let coarse = best_j == 0 || best_j + 1 == vals.len() || {
        let gap_lo = (vals[best_j - 1].1 - best) / best;
        let gap_hi = (vals[best_j + 1].1 - best) / best;
        gap_lo.max(gap_hi) > 1e-2
    };
    Ok(LedouxK { k, argmin, coarse })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_engine(n: usize) -> Quadrature1d {
        Quadrature1d::on_interval(-14.0, 14.0, n, |x| -0.5 * x * x).unwrap()
    }

    #[test]
    fn gaussian_k_matches_log_sobolev_scale() {
        // Closed-form oracle: minimizing f/(F (1-F) sqrt(log 1/min(F,1-F)))
        // over s through the erfc CDF gives inf I = 1.24840 at s = +-1.948,
        // so k = 0.80103. It is commensurate with the log-Sobolev constant 1.
        let k = ledoux_k_1d(&gaussian_engine(400_001)).unwrap();
        assert!(!k.coarse, "fine gaussian grid must not flag refinement");
        assert!(
            (k.k - 0.80103).abs() < 0.008,
            "gaussian half-line constant {} should be 0.80103 within 1%",
            k.k
        );
        assert!(
            k.argmin.abs() > 1.5 && k.argmin.abs() < 2.5,
            "gaussian argmin {} should sit near +-1.95",
            k.argmin
        );
    }

    #[test]
    fn uniform_k_is_grid_stable() {
        let hw = 3f64.sqrt();
        let coarse = Quadrature1d::on_interval(-hw, hw, 100_001, |_| 0.0).unwrap();
        let fine = Quadrature1d::on_interval(-hw, hw, 400_001, |_| 0.0).unwrap();
        let a = ledoux_k_1d(&coarse).unwrap();
        let b = ledoux_k_1d(&fine).unwrap();
        assert!(a.k.is_finite() && a.k > 0.0, "uniform k = {}", a.k);
        assert!(
            (a.k - b.k).abs() < 1e-2 * b.k,
            "uniform k at two resolutions: {} vs {}",
            a.k,
            b.k
        );
        assert!(!b.coarse, "the fine uniform scan is converged");
    }

    #[test]
    fn k_scales_as_square_root_of_variance_scaling() {
        // Scaling the variance by c scales points by sqrt(c) and k by
        // sqrt(c) exactly, because the scan covaries with the grid.
        let engine = gaussian_engine(200_001);
        let c = 2.56f64;
        let scaled = engine.scaled(c.sqrt());
        let a = ledoux_k_1d(&engine).unwrap();
        let b = ledoux_k_1d(&scaled).unwrap();
        assert!(
            (b.k - c.sqrt() * a.k).abs() <= 1e-12 * b.k,
            "k must scale exactly: {} vs {}",
            b.k,
            c.sqrt() * a.k
        );
    }

    #[test]
    fn coarse_grids_raise_the_refinement_flag() {
        // With only a few nodes the tail cut cannot stabilize.
        let engine = gaussian_engine(33);
        let k = ledoux_k_1d(&engine).unwrap();
        assert!(k.coarse, "a 33-node gaussian scan must flag coarseness, got {k:?}");
    }
}
