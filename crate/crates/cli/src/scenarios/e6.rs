//! e6: strong tilt stability transferred into log-Sobolev bounds.
//!
//! A scan over quadratic tilts and shift directions measures the supremum
//! m_hat of the directional standard deviation across the whole tilt family.
//! That single number then has to pay off twice: statically, every
//! dictionary function must satisfy Ent(g^2) <= 8 m_hat^2 E|grad g|^2 on the
//! base measure, and pathwise, the localization flow run to the horizon
//! 1/(4 m_hat^2) must keep its entropy-production ledger under the
//! sigma-weighted budget that the same m_hat implies.

use crate::config::ScenarioConfig;
use crate::registry::ConstantsStore;
use crate::report::{Assertion, ScenarioReport};
use crate::scenarios::{measure_by_name, unit_axis};
use anyhow::{Context, Result};
use loglab_core::localization::lsi_from_strong_tilt_check;
use loglab_core::psi::{dirichlet_energy, entropy_functional, FunctionDictionary, TestFn};
use loglab_core::sampling::sample;
use loglab_core::tilting::{strong_tilt_scan, HStrategy};
use loglab_core::{Measure, TiltParams};

/// Random shift directions per magnitude in the scan.
const SCAN_DIRECTIONS: usize = 6;
/// Static slack in stderr units.
const STATIC_SE_UNITS: f64 = 4.0;
/// Exponential slope of the pathwise dictionary's middle entry.
const PATHWISE_SLOPE: f64 = 0.4;

pub fn run(cfg: &ScenarioConfig, _store: &mut ConstantsStore) -> Result<ScenarioReport> {
    let mut rep = ScenarioReport::new("e6", cfg.seed);
    let dim = cfg.dims[0];
    let spec = measure_by_name("cube", dim)?;
    let m = Measure::compile(&spec)?;

    // Scan the tilt family for the directional-deviation supremum.
    let strategy =
        HStrategy::RandomDirections { count: SCAN_DIRECTIONS, magnitudes: cfg.h_grid.clone() };
    let scan = strong_tilt_scan(&m, &cfg.t_grid, &strategy, cfg.sample_sizes[0], cfg.subseed(1))
        .context("strong tilt scan on the cube")?;
    let id = "e6.scan_clean";
    rep.record(
        Assertion::le(id, scan.failures as f64, 0.0, cfg.tolerance(id, 0.0))
            .with_detail(format!("scan failures across {} points", scan.points.len())),
    );
    let id = "e6.scan_supremum_sane";
    rep.record(
        Assertion::within(id, scan.m_hat, 1.0, cfg.tolerance(id, 0.15)).with_detail(match &scan
            .m_arg
        {
            Some(arg) => format!(
                "tilt-family sd supremum at t={:.3}, |h|={:.3} (untilted slice sup {:.4})",
                arg.t,
                arg.h.iter().map(|v| v * v).sum::<f64>().sqrt(),
                scan.beta_hat
            ),
            None => "tilt-family sd supremum (no usable scan point)".to_string(),
        }),
    );
    rep.note(format!(
        "m_hat = {:.4} +- {:.4}, beta_hat = {:.4}, {} low-n_eff scan points",
        scan.m_hat, scan.m_stderr, scan.beta_hat, scan.low_n_eff_points
    ));
    rep.curve(
        "scan_points",
        vec!["t".into(), "h_norm".into(), "sigma".into(), "sigma_stderr".into(), "n_eff".into()],
        Vec::new(),
        scan.points
            .iter()
            .filter(|p| p.error.is_none())
            .map(|p| {
                vec![
                    p.tilt.t,
                    p.tilt.h.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    p.sigma,
                    p.sigma_stderr,
                    p.n_eff,
                ]
            })
            .collect(),
    );

    // Static log-Sobolev bound with the scanned constant, over the full
    // cloud-adapted dictionary.
    let bound_factor = 8.0 * scan.m_hat * scan.m_hat;
    let cloud = sample(&m, &TiltParams::none(dim), cfg.sample_sizes[1], cfg.subseed(2))?;
    let dict = FunctionDictionary::for_cloud(&cloud);
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for g in &dict.entries {
        let ent = entropy_functional(&cloud, g)?;
        let energy = dirichlet_energy(&cloud, g)?;
        let id = format!("e6.static_lsi/{}", g.name());
        let tol =
            cfg.tolerance(&id, STATIC_SE_UNITS * (ent.stderr + bound_factor * energy.stderr));
        rep.record(
            Assertion::le(id, ent.value, bound_factor * energy.value, tol)
                .with_detail(format!("Ent(g^2) vs 8 m_hat^2 energy, m_hat = {:.4}", scan.m_hat)),
        );
        labels.push(g.name());
        rows.push(vec![ent.value, ent.stderr, energy.value, energy.stderr]);
    }
    rep.curve(
        "static_entries",
        vec!["entropy".into(), "entropy_stderr".into(), "energy".into(), "energy_stderr".into()],
        labels,
        rows,
    );

    // Pathwise transfer: run the localization to the implied horizon and
    // audit the entropy-production ledger against the m_hat budget.
    if cfg.sample_sizes.len() >= 3 {
        let flow_cloud = sample(&m, &TiltParams::none(dim), cfg.sample_sizes[2], cfg.subseed(3))?;
        let e1 = unit_axis(dim, 0);
        let small_dict = FunctionDictionary::new(vec![
            TestFn::Linear { theta: e1.clone() },
            TestFn::ExpLinear { theta: e1, s: PATHWISE_SLOPE },
            TestFn::Norm,
        ]);
        let lsi = lsi_from_strong_tilt_check(
            &flow_cloud,
            scan.m_hat,
            &small_dict,
            cfg.dt,
            cfg.paths,
            cfg.stride,
            cfg.net_resolution,
            cfg.subseed(4),
        )
        .context("pathwise transfer on the cube")?;
        let id = "e6.pathwise_horizon";
        rep.record(
            Assertion::ge(
                id,
                if lsi.horizon_reached { 1.0 } else { 0.0 },
                1.0,
                cfg.tolerance(id, 0.0),
            )
            .with_detail(format!(
                "{} of {} paths reached T = {:.4} untruncated",
                lsi.paths_used - lsi.truncated_paths,
                lsi.paths_used,
                lsi.t_final
            )),
        );
        for e in &lsi.entries {
            let id = format!("e6.pathwise_static/{}", e.name);
            rep.record(
                Assertion::le(
                    &id,
                    e.entropy.value,
                    e.bound,
                    cfg.tolerance(
                        &id,
                        STATIC_SE_UNITS * (e.entropy.stderr + bound_factor * e.energy.stderr),
                    ),
                )
                .with_detail("flow-cloud Ent(g^2) vs 8 m_hat^2 energy"),
            );
            let id = format!("e6.pathwise_qv_budget/{}", e.name);
            rep.record(
                Assertion::le(
                    &id,
                    e.qv_integral,
                    e.qv_budget,
                    cfg.tolerance(
                        &id,
                        STATIC_SE_UNITS * (e.qv_integral_stderr + e.qv_budget_stderr),
                    ),
                )
                .with_detail("realized entropy production vs sigma-weighted budget"),
            );
        }
        rep.curve(
            "pathwise_sigma_sq",
            vec!["t".into(), "mean_sigma_sq".into()],
            Vec::new(),
            lsi.sigma_eval_ts
                .iter()
                .zip(&lsi.mean_sigma_sq)
                .map(|(&t, &s)| vec![t, s])
                .collect(),
        );
        rep.curve(
            "pathwise_entries",
            vec![
                "entropy".into(),
                "energy".into(),
                "bound".into(),
                "qv_integral".into(),
                "qv_budget".into(),
            ],
            lsi.entries.iter().map(|e| e.name.clone()).collect(),
            lsi.entries
                .iter()
                .map(|e| {
                    vec![e.entropy.value, e.energy.value, e.bound, e.qv_integral, e.qv_budget]
                })
                .collect(),
        );
    } else {
        rep.note("pathwise leg skipped: no sample_sizes[2] configured".to_string());
    }
    Ok(rep)
}
