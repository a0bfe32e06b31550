//! Subgaussian constants of sample clouds over direction nets, and the
//! deviation check for the Euclidean norm that they imply.

use super::net::DirectionNet;
use super::{psi2_norm, MIN_EFFECTIVE_SAMPLES};
use crate::cloud::{Estimate, WeightedCloud};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Number of points on the log-spaced MGF argument grid per direction.
const U_GRID: usize = 24;

#[derive(Clone, Debug)]
pub struct SigmaSubgaussian {
    /// Net supremum of directional psi2 norms of the centered marginals.
    pub psi2_sup: Estimate,
    /// MGF variant: sup over net directions and a log-spaced u-grid of
    /// sqrt(2 log MGF(u)) / u on centered marginals.
    pub sigma_tilde: Estimate,
    /// Direction attaining the psi2 supremum.
    pub argmax_direction: Vec<f64>,
    /// Propagated from the net: the resolution guarantee was not certified.
    pub coarse_net: bool,
}

/// Both subgaussian functionals over the net. The cloud is centered
/// internally (its barycenter is subtracted from every marginal).
pub fn sigma_sg(cloud: &WeightedCloud, net: &DirectionNet) -> Result<SigmaSubgaussian> {
    if cloud.n() == 0 {
        return Err(Error::invalid("subgaussian constant of an empty cloud"));
    }
    if net.is_empty() || net.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), got: net.dim() });
    }
    if cloud.n_eff() < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::invalid(format!(
            "subgaussian constant needs {MIN_EFFECTIVE_SAMPLES} effective samples, got {:.1}",
            cloud.n_eff()
        )));
    }
    let weights = cloud.weights.as_slice().expect("contiguous weights");
    let mean = cloud.mean();
    let per_direction: Vec<(Estimate, Estimate)> = net
        .vectors
        .par_iter()
        .map(|theta| {
            let center: f64 = theta.iter().zip(mean.iter()).map(|(t, m)| t * m).sum();
            let proj: Vec<f64> = cloud.project(theta).into_iter().map(|p| p - center).collect();
            let psi2 = psi2_norm(&proj, weights, cloud.seed)?;
            let tilde = directional_sigma_tilde(&proj, weights, cloud.seed);
            Ok((psi2, tilde))
        })
        .collect::<Result<_>>()?;
    let (mut best_psi2, mut best_dir) = (per_direction[0].0, 0usize);
    let mut best_tilde = per_direction[0].1;
    for (i, (p2, st)) in per_direction.iter().enumerate().skip(1) {
        if p2.value > best_psi2.value {
            best_psi2 = *p2;
            best_dir = i;
        }
        if st.value > best_tilde.value {
            best_tilde = *st;
        }
    }
    Ok(SigmaSubgaussian {
        psi2_sup: best_psi2,
        sigma_tilde: best_tilde,
        argmax_direction: net.vectors[best_dir].clone(),
        coarse_net: net.coarse,
    })
}

/// sup over the u-grid of sqrt(2 log MGF(u))/u for one centered marginal.
/// The grid is logarithmic in [0.1, 2] standard deviations of exponential
/// scale; beyond that the empirical MGF concentrates on a handful of extreme
/// samples and the supremum would report noise instead of tail structure.
fn directional_sigma_tilde(centered: &[f64], weights: &[f64], seed: u64) -> Estimate {
    let total: f64 = weights.iter().sum();
    let var: f64 =
        weights.iter().zip(centered).map(|(w, c)| w * c * c).sum::<f64>() / total;
    let sd = var.max(0.0).sqrt();
    let n_eff = crate::cloud::n_eff(weights);
    if sd == 0.0 {
        return Estimate { value: 0.0, stderr: 0.0, n_eff, seed };
    }
    let (u_min, u_max) = (0.1 / sd, 2.0 / sd);
    let ratio = (u_max / u_min).powf(1.0 / (U_GRID - 1) as f64);
    let mut best = Estimate { value: 0.0, stderr: 0.0, n_eff, seed };
    let mut u = u_min;
    for _ in 0..U_GRID {
        // MGF via a max-shift; the empirical MGF of a centered sample is >= 1
        // by Jensen, so the logarithm is safe.
        let shift = centered.iter().fold(f64::NEG_INFINITY, |a, &c| a.max(u * c));
        let mut m_shifted = 0.0;
        for (w, c) in weights.iter().zip(centered) {
            m_shifted += w / total * (u * c - shift).exp();
        }
        let log_m = shift + m_shifted.ln();
        if log_m <= 0.0 {
            u *= ratio;
            continue;
        }
        let value = (2.0 * log_m).sqrt() / u;
        // Delta method through M: d value / d log M = value / (2 log M);
        // se(log M) = se(M)/M = se(M_shifted)/M_shifted.
        let var_m: f64 = weights
            .iter()
            .zip(centered)
            .map(|(w, c)| {
                let dev = (u * c - shift).exp() - m_shifted;
                (w / total) * (w / total) * dev * dev
            })
            .sum();
        let se_log_m = var_m.sqrt() / m_shifted;
        let stderr = value / (2.0 * log_m) * se_log_m;
        if value > best.value {
            best = Estimate { value, stderr, n_eff, seed };
        }
        u *= ratio;
    }
    best
}

/// Comparison of empirical norm exceedance frequencies with the subgaussian
/// deviation bound P(|X| >= t) <= exp(-t^2/(2 c0 sigma^2)), claimed for
/// t >= 2 c0 sqrt(n) sigma.
#[derive(Clone, Debug)]
pub struct NormTailReport {
    pub sigma_sg: f64,
    /// Thresholds {2, 3, 4} sqrt(n) sigma.
    pub thresholds: Vec<f64>,
    /// Weighted exceedance frequency at each threshold.
    pub frequencies: Vec<f64>,
    /// Bound value exp(-t^2/(2 c0 sigma^2)) at the input c0.
    pub bounds: Vec<f64>,
    /// Whether every in-scope threshold (t >= 2 c0 sqrt(n) sigma) satisfies
    /// frequency <= bound at the input c0.
    pub holds: bool,
    /// Smallest c0 making the bound hold at every threshold of this sample;
    /// 0 when no threshold was exceeded at all.
    pub fitted_c0: f64,
}

pub fn norm_tail_bound_check(
    cloud: &WeightedCloud,
    sigma_sg: f64,
    c0: f64,
) -> Result<NormTailReport> {
    if cloud.n() == 0 {
        return Err(Error::invalid("norm tail check of an empty cloud"));
    }
    if !(sigma_sg > 0.0 && sigma_sg.is_finite()) {
        return Err(Error::invalid(format!("sigma_sg {sigma_sg} must be positive finite")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::invalid(format!("c0 {c0} must be positive finite")));
    }
    let dim_scale = (cloud.dim() as f64).sqrt();
    let norms: Vec<f64> = cloud.squared_norms().iter().map(|s| s.sqrt()).collect();
    let weights = cloud.weights.as_slice().expect("contiguous weights");
    let thresholds: Vec<f64> = [2.0, 3.0, 4.0].iter().map(|j| j * dim_scale * sigma_sg).collect();
    let mut frequencies = Vec::with_capacity(3);
    let mut bounds = Vec::with_capacity(3);
    let mut holds = true;
    let mut fitted = 0.0f64;
    for &t in &thresholds {
        let freq: f64 = weights
            .iter()
            .zip(&norms)
            .filter(|(_, &r)| r >= t)
            .map(|(w, _)| w)
            .sum();
        let bound = (-t * t / (2.0 * c0 * sigma_sg * sigma_sg)).exp();
        let in_scope = t >= 2.0 * c0 * dim_scale * sigma_sg;
        if in_scope && freq > bound {
            holds = false;
        }
        if freq > 0.0 {
            // Smallest c0 with exp(-t^2/(2 c0 sigma^2)) >= freq.
            fitted = fitted.max(t * t / (2.0 * sigma_sg * sigma_sg * (1.0 / freq).ln()));
        }
        frequencies.push(freq);
        bounds.push(bound);
    }
    Ok(NormTailReport { sigma_sg, thresholds, frequencies, bounds, holds, fitted_c0: fitted })
}
