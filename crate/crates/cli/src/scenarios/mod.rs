//! Scenario bodies: each takes a validated config and a constants store and
//! produces an append-only report.
//!
//! Scenario ids are stable: e1 sweeps the one-dimensional family by
//! quadrature, e2 measures marginal-variance tightness on the tapered cube,
//! e3 explores dimension scaling of log-Sobolev ratio lower bounds, e4
//! checks concentration on rotationally invariant measures, e5 runs the
//! stochastic-localization diagnostics, and e6 transfers a strong-tilt
//! stability scan into log-Sobolev bounds.

use crate::config::ScenarioConfig;
use crate::registry::ConstantsStore;
use crate::report::ScenarioReport;
use anyhow::{bail, Result};
use loglab_core::MeasureSpec;

pub mod e1;
pub mod e2;
pub mod e3;
pub mod e4;
pub mod e5;
pub mod e6;

/// Runs one scenario end to end. Unknown ids are an error, not a no-op.
pub fn run_scenario(cfg: &ScenarioConfig, store: &mut ConstantsStore) -> Result<ScenarioReport> {
    cfg.validate()?;
    match cfg.scenario.as_str() {
        "e1" => e1::run(cfg, store),
        "e2" => e2::run(cfg, store),
        "e3" => e3::run(cfg, store),
        "e4" => e4::run(cfg, store),
        "e5" => e5::run(cfg, store),
        "e6" => e6::run(cfg, store),
        other => bail!("unknown scenario id '{other}' (known: e1, e2, e3, e4, e5, e6)"),
    }
}

/// All scenario ids in run order.
pub const ALL_SCENARIOS: [&str; 6] = ["e1", "e2", "e3", "e4", "e5", "e6"];

/// Named measure families the scenarios share. Each is normalized to unit
/// per-coordinate variance (so E|x|^2 = dim).
pub fn measure_by_name(name: &str, dim: usize) -> Result<MeasureSpec> {
    if dim == 0 {
        bail!("measure '{name}' needs a positive dimension");
    }
    let spec = match name {
        "gaussian" => MeasureSpec::standard_gaussian(dim),
        "cube" => MeasureSpec::unit_variance_cube(dim),
        "ball" => MeasureSpec::UniformBall { radius: ((dim + 2) as f64).sqrt(), dim },
        // Radial density ~ r^(dim-1) exp(-a r) makes |x| Gamma(dim, 1/a);
        // a = sqrt(dim + 1) normalizes E|x|^2 = dim(dim+1)/a^2 to dim.
        "radial_exp" => {
            let a = ((dim + 1) as f64).sqrt();
            let d = dim as f64;
            let r_max = (d + 12.0 * d.sqrt()) / a;
            MeasureSpec::radial_from_fn(move |r| -a * r, r_max, 4_001, dim)?
        }
        // Flat radial profile out to sqrt(dim + 2): the uniform ball again,
        // but through the tabulated radial-profile machinery.
        "radial_ball" => {
            let r_max = ((dim + 2) as f64).sqrt();
            MeasureSpec::radial_from_fn(|_| 0.0, r_max, 4_001, dim)?
        }
        other => bail!(
            "unknown measure family '{other}' \
             (known: gaussian, cube, ball, radial_exp, radial_ball)"
        ),
    };
    Ok(spec)
}

/// Unit vector along coordinate `axis`.
pub(crate) fn unit_axis(dim: usize, axis: usize) -> Vec<f64> {
    let mut theta = vec![0.0; dim];
    theta[axis] = 1.0;
    theta
}
