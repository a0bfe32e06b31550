//! e4: concentration on rotationally invariant log-concave measures.
//!
//! Two radial-profile measures normalized to E|x|^2 = dim are sampled, and
//! the measured concentration-function lower bound is required to sit under
//! a gaussian-shaped envelope exp(-c r^2) with a frozen rate, out to
//! r = sqrt(dim). Independently, the certified log-Sobolev ratio lower bound
//! must stay within a frozen multiple of the psi2 norm of a single
//! coordinate -- the rotationally-invariant world keeps its log-Sobolev
//! constant pinned to one-dimensional subgaussian behavior.

use crate::config::ScenarioConfig;
use crate::registry::ConstantsStore;
use crate::report::{Assertion, ScenarioReport};
use crate::scenarios::{measure_by_name, unit_axis};
use anyhow::{Context, Result};
use loglab_core::psi::{concentration_function_lb, lsi_ratio_lb, psi2_norm, FunctionDictionary};
use loglab_core::sampling::sample;
use loglab_core::{Measure, TiltParams};

/// Half-space directions probed by the concentration functional: a few axes
/// plus the main diagonal (rotational invariance makes the choice mild).
fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = (0..dim.min(4)).map(|i| unit_axis(dim, i)).collect();
    dirs.push(vec![1.0 / (dim as f64).sqrt(); dim]);
    dirs
}

pub fn run(cfg: &ScenarioConfig, store: &mut ConstantsStore) -> Result<ScenarioReport> {
    let mut rep = ScenarioReport::new("e4", cfg.seed);
    let dim = cfg.dims[0];
    let n_samples = cfg.sample_sizes[0];
    let r_cap = (dim as f64).sqrt();
    let mut summary_labels = Vec::new();
    let mut summary_rows = Vec::new();
    for (mi, name) in cfg.measures.iter().enumerate() {
        let spec = measure_by_name(name, dim)?;
        let m = Measure::compile(&spec).with_context(|| format!("compiling {name}({dim})"))?;
        let seed = cfg.subseed((mi as u64 + 1) << 20);
        let cloud = sample(&m, &TiltParams::none(dim), n_samples, seed)
            .with_context(|| format!("sampling {name}({dim})"))?;

        let rs: Vec<f64> = cfg.r_grid.iter().copied().filter(|r| *r <= r_cap + 1e-12).collect();
        if rs.is_empty() {
            anyhow::bail!("e4: r_grid has no entries below sqrt(dim) = {r_cap}");
        }
        let curve = concentration_function_lb(&cloud, &rs, &probe_directions(dim))?;
        let mut rows = Vec::new();
        for (i, &r) in rs.iter().enumerate() {
            rows.push(vec![r, curve.alpha[i], curve.stderr[i]]);
        }
        rep.curve(
            format!("concentration_{name}"),
            vec!["r".into(), "alpha_lb".into(), "stderr".into()],
            Vec::new(),
            rows,
        );
        if store.is_fit() {
            for (i, &r) in rs.iter().enumerate() {
                // Only resolvable positive levels inform the decay rate: a
                // zero estimate sits under every envelope.
                if curve.alpha[i] > 2.0 / n_samples as f64 {
                    store.fit_min("e4_alpha_decay", -curve.alpha[i].ln() / (r * r));
                }
            }
        } else {
            let c = store.get("e4_alpha_decay")?;
            rep.constants_used.insert("e4_alpha_decay".into(), c);
            for (i, &r) in rs.iter().enumerate() {
                let id = format!("e4.alpha_decay/{name}/r{i}");
                let tol = cfg.tolerance(&id, 4.0 * curve.stderr[i]);
                rep.record(
                    Assertion::le(id, curve.alpha[i], (-c * r * r).exp(), tol).with_detail(
                        format!("concentration lower bound at r={r:.3} vs exp(-c r^2)"),
                    ),
                );
            }
        }

        // Certified log-Sobolev ratio lower bound vs one-coordinate psi2.
        let dict = FunctionDictionary::for_cloud(&cloud);
        let ratio = lsi_ratio_lb(&cloud, &dict)?;
        let rho_lb = ratio.value.value.max(0.0).sqrt();
        let rho_se =
            if rho_lb > 0.0 { ratio.value.stderr / (2.0 * rho_lb) } else { ratio.value.stderr };
        let w = cloud.weights.as_slice().expect("contiguous weights");
        let first = cloud.project(&unit_axis(dim, 0));
        let psi2 = psi2_norm(&first, w, seed ^ 0x11)?;
        if store.is_fit() {
            store.fit_max("e4_rot_ratio_cap", rho_lb / psi2.value);
        } else {
            let cap = store.get("e4_rot_ratio_cap")?;
            rep.constants_used.insert("e4_rot_ratio_cap".into(), cap);
            let id = format!("e4.rho_lb_vs_coordinate_psi2/{name}");
            let tol = cfg.tolerance(&id, 4.0 * (rho_se + cap * psi2.stderr));
            rep.record(Assertion::le(id, rho_lb, cap * psi2.value, tol).with_detail(format!(
                "sqrt of ratio lower bound (argmax {}) vs cap * psi2(x_1)",
                ratio.argmax
            )));
        }
        summary_labels.push(name.clone());
        summary_rows.push(vec![ratio.value.value, ratio.value.stderr, rho_lb, psi2.value]);
    }
    rep.curve(
        "ratio_summary",
        vec!["ratio_lb".into(), "ratio_lb_stderr".into(), "rho_lb".into(), "psi2_x1".into()],
        summary_labels,
        summary_rows,
    );
    Ok(rep)
}
