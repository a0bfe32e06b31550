//! e3: dimension scaling of log-Sobolev ratio lower bounds. Exploration
//! only: this scenario emits curves for eyeballing how the certified ratio
//! lower bound and cheap one-dimensional proxies move with dimension, and
//! deliberately asserts nothing -- ratios here feed hypotheses, not gates.

use crate::config::ScenarioConfig;
use crate::registry::ConstantsStore;
use crate::report::ScenarioReport;
use crate::scenarios::{measure_by_name, unit_axis};
use anyhow::{Context, Result};
use loglab_core::psi::{
    lsi_ratio_lb, norm_fluctuation_psi1, psi2_norm, FunctionDictionary,
};
use loglab_core::sampling::sample;
use loglab_core::{Measure, TiltParams};

pub fn run(cfg: &ScenarioConfig, _store: &mut ConstantsStore) -> Result<ScenarioReport> {
    let mut rep = ScenarioReport::new("e3", cfg.seed);
    rep.note("exploration only: curves carry no assertions by design".to_string());
    let n_samples = cfg.sample_sizes[0];
    for name in &cfg.measures {
        let mut rows = Vec::new();
        for (di, &dim) in cfg.dims.iter().enumerate() {
            let spec = measure_by_name(name, dim)?;
            let m = Measure::compile(&spec).with_context(|| format!("compiling {name}({dim})"))?;
            let seed = cfg.subseed((di as u64) << 16 | fxhash(name));
            let cloud = sample(&m, &TiltParams::none(dim), n_samples, seed)
                .with_context(|| format!("sampling {name}({dim})"))?;
            let dict = FunctionDictionary::for_cloud(&cloud);
            let ratio = lsi_ratio_lb(&cloud, &dict)?;
            let w = cloud.weights.as_slice().expect("contiguous weights");
            let axis = unit_axis(dim, 0);
            let first_coord = cloud.project(&axis);
            let psi2_x1 = psi2_norm(&first_coord, w, seed)?;
            let norm_psi1 = norm_fluctuation_psi1(&cloud)?;
            rows.push(vec![
                dim as f64,
                ratio.value.value,
                ratio.value.stderr,
                psi2_x1.value,
                norm_psi1.value,
                ratio.value.value / (dim as f64).sqrt(),
            ]);
        }
        rep.curve(
            format!("scaling_{name}"),
            vec![
                "dim".into(),
                "ratio_lb".into(),
                "ratio_lb_stderr".into(),
                "psi2_first_coord".into(),
                "psi1_norm_fluctuation".into(),
                "ratio_lb_over_sqrt_dim".into(),
            ],
            Vec::new(),
            rows,
        );
    }
    Ok(rep)
}

/// Tiny deterministic string hash for seed salting.
fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exploration_emits_curves_without_assertions() {
        let mut cfg = ScenarioConfig::default_for("e3").unwrap();
        cfg.dims = vec![3, 6];
        cfg.sample_sizes = vec![4_000];
        cfg.measures = vec!["gaussian".into(), "ball".into()];
        let mut store = ConstantsStore::fit_mode();
        let rep = run(&cfg, &mut store).unwrap();
        assert!(rep.assertions.is_empty(), "exploration must not gate anything");
        assert!(rep.all_pass(), "vacuously true");
        assert_eq!(rep.curves.len(), 2);
        for curve in &rep.curves {
            assert_eq!(curve.rows.len(), 2);
            for row in &curve.rows {
                assert!(row[1] > 0.0, "ratio lower bound is positive: {row:?}");
                assert!(row[3] > 0.0, "psi2 of a coordinate is positive: {row:?}");
            }
        }
        // The gaussian certified ratio lower bound cannot exceed the true
        // squared constant 1 by much more than estimation noise.
        let g = rep.curves.iter().find(|c| c.name == "scaling_gaussian").unwrap();
        for row in &g.rows {
            assert!(row[1] < 1.3, "gaussian ratio lb {} should stay near <= 1", row[1]);
        }
    }
}
