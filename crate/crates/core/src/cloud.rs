//! Weighted sample clouds: the carrier of every Monte Carlo estimate.
//!
//! A cloud is an N x d matrix of points plus nonnegative weights summing to
//! one. Importance reweighting only ever multiplies weights and renormalizes,
//! so normalizing constants of the underlying measures never enter.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct WeightedCloud {
    pub points: Array2<f64>,
    pub weights: Array1<f64>,
    pub seed: u64,
    pub provenance: String,
}

/// Scalar estimate with its standard error, the effective sample size of the
/// weights behind it, and the seed that produced it.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_eff: f64,
    pub seed: u64,
}

impl Estimate {
    pub fn exact(value: f64, seed: u64) -> Self {
        Estimate { value, stderr: 0.0, n_eff: f64::INFINITY, seed }
    }
}

impl WeightedCloud {
    /// Uniform-weight cloud.
    pub fn new_uniform(points: Array2<f64>, seed: u64, provenance: impl Into<String>) -> Self {
        let n = points.nrows();
        let w = if n == 0 { 1.0 } else { 1.0 / n as f64 };
        WeightedCloud {
            points,
            weights: Array1::from_elem(n, w),
            seed,
            provenance: provenance.into(),
        }
    }

    pub fn new_weighted(
        points: Array2<f64>,
        mut weights: Array1<f64>,
        seed: u64,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if points.nrows() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.nrows(), got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.sum();
        if points.nrows() > 0 {
            if total <= 0.0 {
                return Err(Error::invalid("weights sum to zero"));
            }
            weights /= total;
        }
        Ok(WeightedCloud { points, weights, seed, provenance: provenance.into() })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Effective sample size 1 / sum w_i^2 of the normalized weights.
    pub fn n_eff(&self) -> f64 {
        n_eff(self.weights.as_slice().unwrap())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Ok(());
        }
        let total = self.weights.sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weight sum {total} drifted from 1")));
        }
        if self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::invalid("negative weight"));
        }
        Ok(())
    }

    pub fn mean(&self) -> Array1<f64> {
        linalg::weighted_mean(&self.points.view(), self.weights.as_slice().unwrap())
    }

    pub fn covariance(&self) -> Array2<f64> {
        let m = self.mean();
        linalg::weighted_cov(&self.points.view(), self.weights.as_slice().unwrap(), &m.view())
    }

    /// Marginal samples x_i . theta.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(theta.len(), d, "direction dimension mismatch");
        (0..self.n())
            .map(|i| {
                let row = self.points.row(i);
                let mut s = 0.0;
                for j in 0..d {
                    s += row[j] * theta[j];
                }
                s
            })
            .collect()
    }

    pub fn squared_norms(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.points.row(i).iter().map(|x| x * x).sum())
            .collect()
    }

    /// Weighted mean of a scalar function of the points, as an `Estimate`.
    pub fn estimate_mean(&self, values: &[f64]) -> Estimate {
        let w = self.weights.as_slice().unwrap();
        let (m, se) = weighted_mean_stderr(values, w);
        Estimate { value: m, stderr: se, n_eff: self.n_eff(), seed: self.seed }
    }

    /// Binary matrix dump (fixed little-endian layout) plus JSON sidecar.
    pub fn save(&self, path_prefix: &Path) -> Result<()> {
        let bin_path = path_prefix.with_extension("cloud");
        let mut f = std::fs::File::create(&bin_path)?;
        f.write_all(b"WCLD0001")?;
        f.write_all(&(self.n() as u64).to_le_bytes())?;
        f.write_all(&(self.dim() as u64).to_le_bytes())?;
        f.write_all(&self.seed.to_le_bytes())?;
        for v in self.points.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
        for v in self.weights.iter() {
            f.write_all(&v.to_le_bytes())?;
        }
        let sidecar = CloudSidecar {
            n: self.n(),
            dim: self.dim(),
            seed: self.seed,
            provenance: self.provenance.clone(),
            n_eff: self.n_eff(),
        };
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path_prefix.with_extension("json"), json)?;
        Ok(())
    }

    pub fn load(path_prefix: &Path) -> Result<Self> {
        let bin_path = path_prefix.with_extension("cloud");
        let mut f = std::fs::File::open(&bin_path)?;
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != b"WCLD0001" {
            return Err(Error::Format("bad cloud magic".into()));
        }
        let mut u = [0u8; 8];
        f.read_exact(&mut u)?;
        let n = u64::from_le_bytes(u) as usize;
        f.read_exact(&mut u)?;
        let d = u64::from_le_bytes(u) as usize;
        f.read_exact(&mut u)?;
        let seed = u64::from_le_bytes(u);
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            f.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let pts = read_f64s(n * d)?;
        let w = read_f64s(n)?;
        let provenance: String =
            match std::fs::read_to_string(path_prefix.with_extension("json")) {
                Ok(json) => serde_json::from_str::<CloudSidecar>(&json)
                    .map(|s| s.provenance)
                    .unwrap_or_default(),
                Err(_) => String::new(),
            };
        let points = Array2::from_shape_vec((n, d), pts)
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(WeightedCloud { points, weights: Array1::from_vec(w), seed, provenance })
    }

    /// CSV export for small clouds: one row per point, weight last.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::new();
        for j in 0..d {
            out.push_str(&format!("x{j},"));
        }
        out.push_str("weight\n");
        for i in 0..self.n() {
            for j in 0..d {
                out.push_str(&format!("{},", self.points[[i, j]]));
            }
            out.push_str(&format!("{}\n", self.weights[i]));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct CloudSidecar {
    n: usize,
    dim: usize,
    seed: u64,
    provenance: String,
    n_eff: f64,
}

pub fn n_eff(weights: &[f64]) -> f64 {
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if sq <= 0.0 {
        0.0
    } else {
        1.0 / sq
    }
}

/// Self-normalized weighted mean with its delta-method standard error
/// sqrt(sum w_i^2 (x_i - mean)^2), exact for iid uniform weights.
pub fn weighted_mean_stderr(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let m: f64 = values.iter().zip(weights).map(|(x, w)| x * w).sum();
    let var: f64 = values
        .iter()
        .zip(weights)
        .map(|(x, w)| {
            let d = x - m;
            w * w * d * d
        })
        .sum();
    (m, var.sqrt())
}

pub fn weighted_mean_scalar(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(x, w)| x * w).sum()
}

pub fn weighted_variance(values: &[f64], weights: &[f64]) -> f64 {
    let m = weighted_mean_scalar(values, weights);
    values
        .iter()
        .zip(weights)
        .map(|(x, w)| {
            let d = x - m;
            w * d * d
        })
        .sum()
}

/// Weighted quantile by sorting; q in [0, 1].
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut acc = 0.0;
    for &i in &idx {
        acc += weights[i];
        if acc >= q {
            return values[i];
        }
    }
    values[*idx.last().unwrap()]
}

pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    weighted_quantile(values, weights, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_cloud_invariants() {
        let c = WeightedCloud::new_uniform(array![[0.0, 1.0], [2.0, 3.0]], 1, "test");
        c.validate().unwrap();
        assert_eq!(c.n(), 2);
        assert_eq!(c.dim(), 2);
        assert!((c.n_eff() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cloud_is_valid() {
        let c = WeightedCloud::new_uniform(Array2::zeros((0, 3)), 1, "empty");
        c.validate().unwrap();
        assert_eq!(c.n(), 0);
    }

    #[test]
    fn weights_renormalize_on_construction() {
        let c = WeightedCloud::new_weighted(
            array![[0.0], [1.0], [2.0]],
            array![2.0, 2.0, 4.0],
            9,
            "w",
        )
        .unwrap();
        c.validate().unwrap();
        assert!((c.weights[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn negative_weight_rejected() {
        let r = WeightedCloud::new_weighted(array![[0.0]], array![-1.0], 0, "bad");
        assert!(r.is_err());
    }

    #[test]
    fn weighted_median_matches_simple_case() {
        let v = [3.0, 1.0, 2.0];
        let w = [1.0 / 3.0; 3];
        assert_eq!(weighted_median(&v, &w), 2.0);
    }

    #[test]
    fn roundtrip_binary_format() {
        let dir = tempfile::tempdir().unwrap();
        let c = WeightedCloud::new_weighted(
            array![[0.5, -1.5], [2.25, 3.0]],
            array![0.25, 0.75],
            42,
            "roundtrip",
        )
        .unwrap();
        let prefix = dir.path().join("cloud_a");
        c.save(&prefix).unwrap();
        let back = WeightedCloud::load(&prefix).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.provenance, "roundtrip");
        assert_eq!(back.points, c.points);
        assert_eq!(back.weights, c.weights);
    }

    #[test]
    fn estimate_mean_stderr_matches_iid_formula() {
        // Uniform weights: delta-method stderr reduces to sd / sqrt(n).
        let n = 1000usize;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64) / (n as f64)).collect();
        let w = vec![1.0 / n as f64; n];
        let (m, se) = weighted_mean_stderr(&vals, &w);
        let sd: f64 =
            (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
        assert!((se - sd / (n as f64).sqrt()).abs() < 1e-12);
    }
}
