//! Finite direction nets on the unit sphere.
//!
//! Dimension 1 is the exact net {+1, -1}; dimension 2 uses an angular grid
//! whose chord spacing certifies the resolution; higher dimensions build a
//! greedy maximal packing seeded with the coordinate axes. A maximal
//! r-packing is an r-cover, but stochastic saturation leaves thin uncovered
//! pockets, so the build then runs probe-and-insert repair rounds at a
//! slightly tighter radius until a full round finds nothing to add. The
//! cover property is finally spot-checked on random directions and the net
//! carries a `coarse` flag when the check, the repair budget, or a size cap
//! fails it.

use crate::error::{Error, Result};
use crate::rng;
use rand_chacha::ChaCha8Rng;

/// Consecutive rejected candidates before the greedy packing is declared
/// saturated.
const SATURATION_REJECTS: usize = 4_000;
const SPOT_CHECK_TRIALS: usize = 1_000;
/// Probes per repair round; any probe beyond the repair radius joins the net.
const REPAIR_TRIALS: usize = 30_000;
const REPAIR_ROUNDS: usize = 25;
/// Repair inserts at 97% of the resolution so certification keeps slack.
const REPAIR_MARGIN: f64 = 0.97;

#[derive(Clone, Debug)]
pub struct DirectionNet {
    pub vectors: Vec<Vec<f64>>,
    pub resolution: f64,
    /// Set when the build could not certify that every unit vector has a net
    /// element within the resolution (size cap hit or spot check failed).
    pub coarse: bool,
}

impl DirectionNet {
    /// Net with the default size cap of 20000 directions.
    pub fn build(dim: usize, resolution: f64, seed: u64) -> Result<Self> {
        Self::build_capped(dim, resolution, seed, 20_000)
    }

    pub fn build_capped(
        dim: usize,
        resolution: f64,
        seed: u64,
        max_size: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("direction net needs dimension at least 1"));
        }
        if !(resolution > 0.0 && resolution < 1.0) {
            return Err(Error::invalid(format!("resolution {resolution} must be in (0,1)")));
        }
        let mut net = match dim {
            1 => DirectionNet { vectors: vec![vec![1.0], vec![-1.0]], resolution, coarse: false },
            2 => Self::angular_grid(resolution),
            _ => Self::greedy_packing(dim, resolution, seed, max_size),
        };
        if net.spot_check(SPOT_CHECK_TRIALS, seed ^ 0x9e37_79b9_7f4a_7c15) > resolution {
            net.coarse = true;
        }
        Ok(net)
    }

    /// 2D net on an angular grid: spacing 2 asin(r/2) radians keeps every
    /// unit vector within chord distance r of a grid point.
    fn angular_grid(resolution: f64) -> DirectionNet {
        let spacing = 2.0 * (resolution / 2.0).asin();
        let m = (std::f64::consts::TAU / spacing).ceil() as usize;
        let vectors = (0..m)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / m as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        DirectionNet { vectors, resolution, coarse: false }
    }

    fn greedy_packing(dim: usize, resolution: f64, seed: u64, max_size: usize) -> DirectionNet {
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            vectors.push(e.clone());
            e[i] = -1.0;
            vectors.push(e);
        }
        let mut rng = rng::root_rng(seed);
        let mut rejects = 0usize;
        while vectors.len() < max_size && rejects < SATURATION_REJECTS {
            let cand = rng::unit_vector(&mut rng, dim);
            if min_distance(&vectors, &cand) > resolution {
                vectors.push(cand);
                rejects = 0;
            } else {
                rejects += 1;
            }
        }
        if vectors.len() >= max_size {
            return DirectionNet { vectors, resolution, coarse: true };
        }
        // Saturation is stochastic, so thin uncovered pockets remain. Probe
        // rounds insert anything found beyond a slightly tighter radius; a
        // round with no insertion certifies the cover with slack to spare.
        let repair_radius = REPAIR_MARGIN * resolution;
        for round in 0..REPAIR_ROUNDS {
            let mut probe_rng = rng::derived_rng(seed, round as u64 + 1);
            let mut inserted = false;
            for _ in 0..REPAIR_TRIALS {
                let cand = rng::unit_vector(&mut probe_rng, dim);
                if min_distance(&vectors, &cand) > repair_radius {
                    if vectors.len() >= max_size {
                        return DirectionNet { vectors, resolution, coarse: true };
                    }
                    vectors.push(cand);
                    inserted = true;
                }
            }
            if !inserted {
                return DirectionNet { vectors, resolution, coarse: false };
            }
        }
        DirectionNet { vectors, resolution, coarse: true }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Largest distance from `trials` random unit vectors to the net: an
    /// empirical upper-bound probe of the covering radius.
    pub fn spot_check(&self, trials: usize, seed: u64) -> f64 {
        let mut rng: ChaCha8Rng = rng::root_rng(seed);
        let dim = self.dim();
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let v = rng::unit_vector(&mut rng, dim);
            worst = worst.max(min_distance(&self.vectors, &v));
        }
        worst
    }
}

fn min_distance(net: &[Vec<f64>], v: &[f64]) -> f64 {
    net.iter()
        .map(|u| {
            u.iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}
