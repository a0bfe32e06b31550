//! Test functions with exact gradient oracles, and the entropy / Dirichlet
//! functionals they feed. The ratio Ent(g^2) / (2 energy) over a dictionary
//! is a certified lower bound on the squared log-Sobolev constant, and
//! Var(g) / energy the analog for the Poincare constant; both are reported
//! with the name of the maximizing function.

use crate::cloud::{weighted_mean_scalar, Estimate, WeightedCloud};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// A named test function with a closed-form gradient.
#[derive(Clone, Debug)]
pub enum TestFn {
    /// x . theta
    Linear { theta: Vec<f64> },
    /// exp(s (x . theta) / 2)
    ExpLinear { theta: Vec<f64>, s: f64 },
    /// |x|
    Norm,
    /// Logistic step across the hyperplane x . theta = offset, of width w:
    /// 1 / (1 + exp(-(x.theta - offset)/w)).
    HalfSpaceSigmoid { theta: Vec<f64>, offset: f64, width: f64 },
    /// exp(-(|x| - r0)^2 / (2 w^2))
    RadialBump { r0: f64, width: f64 },
}

impl TestFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFn::Linear { theta } => dot(x, theta),
            TestFn::ExpLinear { theta, s } => (0.5 * s * dot(x, theta)).exp(),
            TestFn::Norm => norm(x),
            TestFn::HalfSpaceSigmoid { theta, offset, width } => {
                logistic((dot(x, theta) - offset) / width)
            }
            TestFn::RadialBump { r0, width } => {
                let d = norm(x) - r0;
                (-d * d / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TestFn::Linear { theta } => theta.clone(),
            TestFn::ExpLinear { theta, s } => {
                let g = 0.5 * s * self.eval(x);
                theta.iter().map(|t| g * t).collect()
            }
            TestFn::Norm => {
                let r = norm(x);
                if r == 0.0 {
                    vec![0.0; x.len()]
                } else {
                    x.iter().map(|v| v / r).collect()
                }
            }
            TestFn::HalfSpaceSigmoid { theta, offset, width } => {
                let p = logistic((dot(x, theta) - offset) / width);
                let g = p * (1.0 - p) / width;
                theta.iter().map(|t| g * t).collect()
            }
            TestFn::RadialBump { r0, width } => {
                let r = norm(x);
                if r == 0.0 {
                    return vec![0.0; x.len()];
                }
                let d = r - r0;
                let f = (-d * d / (2.0 * width * width)).exp();
                let g = -d / (width * width) * f / r;
                x.iter().map(|v| g * v).collect()
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            TestFn::Linear { theta } => format!("linear[{}]", fmt_dir(theta)),
            TestFn::ExpLinear { theta, s } => format!("exp_linear[s={s:.4}, {}]", fmt_dir(theta)),
            TestFn::Norm => "norm".into(),
            TestFn::HalfSpaceSigmoid { offset, width, .. } => {
                format!("half_space_sigmoid[b={offset:.3}, w={width:.3}]")
            }
            TestFn::RadialBump { r0, width } => format!("radial_bump[r0={r0:.3}, w={width:.3}]"),
        }
    }

    /// The image of this function under the point rescaling x -> c x: the
    /// returned function satisfies out(c x) = self(x) for the shape families
    /// and out(c x) = c self(x) for the homogeneous ones. Either way the
    /// entropy-to-energy ratios scale by exactly c^2.
    pub fn rescaled(&self, c: f64) -> TestFn {
        match self {
            TestFn::Linear { theta } => TestFn::Linear { theta: theta.clone() },
            TestFn::ExpLinear { theta, s } => {
                TestFn::ExpLinear { theta: theta.clone(), s: s / c }
            }
            TestFn::Norm => TestFn::Norm,
            TestFn::HalfSpaceSigmoid { theta, offset, width } => TestFn::HalfSpaceSigmoid {
                theta: theta.clone(),
                offset: c * offset,
                width: c * width,
            },
            TestFn::RadialBump { r0, width } => {
                TestFn::RadialBump { r0: c * r0, width: c * width }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len(), "direction dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn fmt_dir(theta: &[f64]) -> String {
    if let Some(i) = theta.iter().position(|&t| t != 0.0) {
        if theta.iter().enumerate().all(|(j, &t)| t == 0.0 || j == i) {
            return format!("e{}", i + 1);
        }
    }
    "dir".into()
}

/// A named, ordered collection of test functions. Order matters: ratio
/// argmax reports break ties in favor of the first-listed entry.
#[derive(Clone, Debug)]
pub struct FunctionDictionary {
    pub entries: Vec<TestFn>,
}

/// Number of log-spaced s values for the exp-linear scan.
const S_GRID: usize = 12;

impl FunctionDictionary {
    pub fn new(entries: Vec<TestFn>) -> Self {
        FunctionDictionary { entries }
    }

    /// Dictionary adapted to a cloud: linear and exp-linear forms along the
    /// coordinate axes (s log-spaced in [0.01, 3/sd]), the norm, half-space
    /// sigmoids at the directional quartiles, and a radial bump at the median
    /// radius.
    pub fn for_cloud(cloud: &WeightedCloud) -> Self {
        let d = cloud.dim();
        let weights = cloud.weights.as_slice().expect("contiguous weights");
        let mut entries = Vec::new();
        let axes: Vec<usize> = (0..d.min(4)).collect();
        for &i in &axes {
            let mut theta = vec![0.0; d];
            theta[i] = 1.0;
            entries.push(TestFn::Linear { theta });
        }
        for &i in &axes {
            let mut theta = vec![0.0; d];
            theta[i] = 1.0;
            let proj = cloud.project(&theta);
            let sd = crate::cloud::weighted_variance(&proj, weights).max(1e-12).sqrt();
            let (s_min, s_max) = (0.01, 3.0 / sd);
            let ratio = (s_max / s_min).powf(1.0 / (S_GRID - 1) as f64);
            let mut s = s_min;
            for _ in 0..S_GRID {
                entries.push(TestFn::ExpLinear { theta: theta.clone(), s });
                s *= ratio;
            }
        }
        entries.push(TestFn::Norm);
        let radii: Vec<f64> = cloud.squared_norms().iter().map(|v| v.sqrt()).collect();
        let med_r = crate::cloud::weighted_median(&radii, weights);
        let sd_r = crate::cloud::weighted_variance(&radii, weights).max(1e-12).sqrt();
        entries.push(TestFn::RadialBump { r0: med_r, width: sd_r.max(1e-6) });
        if d > 0 {
            let mut theta = vec![0.0; d];
            theta[0] = 1.0;
            let proj = cloud.project(&theta);
            for q in [0.25, 0.5, 0.75] {
                let b = crate::cloud::weighted_quantile(&proj, weights, q);
                let sd = crate::cloud::weighted_variance(&proj, weights).max(1e-12).sqrt();
                entries.push(TestFn::HalfSpaceSigmoid {
                    theta: theta.clone(),
                    offset: b,
                    width: 0.5 * sd,
                });
            }
        }
        FunctionDictionary { entries }
    }

    /// Entry-wise rescaling matching the point map x -> c x.
    pub fn rescaled(&self, c: f64) -> Self {
        FunctionDictionary { entries: self.entries.iter().map(|e| e.rescaled(c)).collect() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ent(g^2) = E g^2 log g^2 - E g^2 log E g^2, self-normalized over the
/// cloud weights; errors when the mean of g^2 is not positive.
pub fn entropy_functional(cloud: &WeightedCloud, f: &TestFn) -> Result<Estimate> {
    if cloud.n() == 0 {
        return Err(Error::invalid("entropy of an empty cloud"));
    }
    let weights = cloud.weights.as_slice().expect("contiguous weights");
    let n = cloud.n();
    let mut sq = Vec::with_capacity(n);
    let mut al = Vec::with_capacity(n);
    for i in 0..n {
        let row = cloud.points.row(i);
        let g = f.eval(row.as_slice().expect("contiguous row"));
        let s = g * g;
        sq.push(s);
        al.push(if s > 0.0 { s * s.ln() } else { 0.0 });
    }
    match entropy_core(&sq, &al, weights) {
        Some((ent, se)) => {
            Ok(Estimate { value: ent, stderr: se, n_eff: cloud.n_eff(), seed: cloud.seed })
        }
        None => Err(Error::invalid("mean of g^2 must be positive for the entropy")),
    }
}

/// Core of the entropy functional over precomputed values sq_i = g(x_i)^2 and
/// al_i = sq_i log sq_i: the plug-in value with its influence-function
/// stderr, or `None` when the mean of g^2 is not positive. Shared with the
/// per-step entropies of the localization checks, where only the weights
/// change between calls.
pub(crate) fn entropy_core(sq: &[f64], al: &[f64], weights: &[f64]) -> Option<(f64, f64)> {
    let mut s_mean = 0.0; // E g^2
    let mut a_mean = 0.0; // E g^2 log g^2
    for ((s, a), w) in sq.iter().zip(al).zip(weights) {
        s_mean += w * s;
        a_mean += w * a;
    }
    if !(s_mean > 0.0) {
        return None;
    }
    // The entropy of a constant is identically zero; computing it as a
    // difference of two accumulations would leave float noise instead.
    let (s_min, s_max) =
        sq.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if s_max - s_min <= 1e-14 * s_max {
        return Some((0.0, 0.0));
    }
    let ent = a_mean - s_mean * s_mean.ln();
    // Influence function of Ent at the plug-in: a - (1 + log S) s, up to its
    // own weighted mean.
    let c = 1.0 + s_mean.ln();
    let infl_mean: f64 =
        weights.iter().zip(sq.iter().zip(al)).map(|(w, (s, a))| w * (a - c * s)).sum();
    let var: f64 = weights
        .iter()
        .zip(sq.iter().zip(al))
        .map(|(w, (s, a))| {
            let d = a - c * s - infl_mean;
            w * w * d * d
        })
        .sum();
    Some((ent, var.sqrt()))
}

/// Plug-in Dirichlet energy E |grad g|^2 over the cloud.
pub fn dirichlet_energy(cloud: &WeightedCloud, f: &TestFn) -> Result<Estimate> {
    if cloud.n() == 0 {
        return Err(Error::invalid("dirichlet energy of an empty cloud"));
    }
    let vals: Vec<f64> = (0..cloud.n())
        .map(|i| {
            let row = cloud.points.row(i);
            let g = f.grad(row.as_slice().expect("contiguous row"));
            g.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    Ok(cloud.estimate_mean(&vals))
}

/// Plug-in variance of g over the cloud, with a delta-method stderr.
pub fn variance_functional(cloud: &WeightedCloud, f: &TestFn) -> Result<Estimate> {
    if cloud.n() == 0 {
        return Err(Error::invalid("variance of an empty cloud"));
    }
    let weights = cloud.weights.as_slice().expect("contiguous weights");
    let vals: Vec<f64> = (0..cloud.n())
        .map(|i| f.eval(cloud.points.row(i).as_slice().expect("contiguous row")))
        .collect();
    // The variance of a constant is identically zero, not centering noise.
    let (v_min, v_max) =
        vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if v_max - v_min <= 1e-14 * v_max.abs().max(v_min.abs()) {
        return Ok(Estimate { value: 0.0, stderr: 0.0, n_eff: cloud.n_eff(), seed: cloud.seed });
    }
    let m = weighted_mean_scalar(&vals, weights);
    let var: f64 = weights.iter().zip(&vals).map(|(w, v)| w * (v - m) * (v - m)).sum();
    let se: f64 = weights
        .iter()
        .zip(&vals)
        .map(|(w, v)| {
            let d = (v - m) * (v - m) - var;
            w * w * d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(Estimate { value: var, stderr: se, n_eff: cloud.n_eff(), seed: cloud.seed })
}

/// A certified lower bound obtained as a maximum over dictionary entries.
#[derive(Clone, Debug)]
pub struct RatioLowerBound {
    pub value: Estimate,
    /// Name of the maximizing dictionary entry (first listed wins ties).
    pub argmax: String,
}

/// sup over the dictionary of Ent(g^2) / (2 E|grad g|^2): a lower bound on
/// the squared log-Sobolev constant rho^2.
pub fn lsi_ratio_lb(cloud: &WeightedCloud, dict: &FunctionDictionary) -> Result<RatioLowerBound> {
    ratio_lb(cloud, dict, |cloud, f| {
        let energy = dirichlet_energy(cloud, f)?;
        if !(energy.value > 0.0) {
            return Ok(None);
        }
        // Entries with a vanishing g^2 mean carry no entropy information;
        // they are skipped rather than failing the supremum.
        match entropy_functional(cloud, f) {
            Ok(ent) => Ok(ratio_estimate(ent, energy, 2.0, cloud)),
            Err(Error::InvalidInput(_)) => Ok(None),
            Err(e) => Err(e),
        }
    })
}

/// sup over the dictionary of Var(g) / E|grad g|^2: a lower bound on the
/// squared Poincare constant K^2.
pub fn poincare_ratio_lb(
    cloud: &WeightedCloud,
    dict: &FunctionDictionary,
) -> Result<RatioLowerBound> {
    ratio_lb(cloud, dict, |cloud, f| {
        let var = variance_functional(cloud, f)?;
        let energy = dirichlet_energy(cloud, f)?;
        Ok(ratio_estimate(var, energy, 1.0, cloud))
    })
}

/// numerator/(factor * energy) with first-order error propagation; None when
/// the energy is not positive (constant functions carry no information).
fn ratio_estimate(
    num: Estimate,
    energy: Estimate,
    factor: f64,
    cloud: &WeightedCloud,
) -> Option<Estimate> {
    if !(energy.value > 0.0) {
        return None;
    }
    let value = num.value / (factor * energy.value);
    let rel_num = if num.value != 0.0 { num.stderr / num.value.abs() } else { 0.0 };
    let rel_en = energy.stderr / energy.value;
    let stderr = if num.value != 0.0 {
        value.abs() * (rel_num * rel_num + rel_en * rel_en).sqrt()
    } else {
        num.stderr / (factor * energy.value)
    };
    Some(Estimate { value, stderr, n_eff: cloud.n_eff(), seed: cloud.seed })
}

fn ratio_lb(
    cloud: &WeightedCloud,
    dict: &FunctionDictionary,
    eval: impl Fn(&WeightedCloud, &TestFn) -> Result<Option<Estimate>> + Sync,
) -> Result<RatioLowerBound> {
    if dict.is_empty() {
        return Err(Error::invalid("empty function dictionary"));
    }
    if cloud.n() == 0 {
        return Err(Error::invalid("ratio bound of an empty cloud"));
    }
    let evals: Vec<Option<Estimate>> = dict
        .entries
        .par_iter()
        .map(|f| eval(cloud, f))
        .collect::<Result<_>>()?;
    let mut best: Option<(Estimate, usize)> = None;
    for (i, e) in evals.iter().enumerate() {
        if let Some(est) = e {
            // Strict improvement only: earlier entries win ties.
            if best.map_or(true, |(b, _)| est.value > b.value) {
                best = Some((*est, i));
            }
        }
    }
    match best {
        Some((est, i)) => Ok(RatioLowerBound { value: est, argmax: dict.entries[i].name() }),
        None => Ok(RatioLowerBound {
            value: Estimate { value: 0.0, stderr: 0.0, n_eff: cloud.n_eff(), seed: cloud.seed },
            argmax: "none (all entries degenerate)".into(),
        }),
    }
}
