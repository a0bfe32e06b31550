//! End-to-end invariants of the localization process: a stability scan
//! feeding its constant into the log-Sobolev transfer, the martingale and
//! entropy checks on a product-cube base, graceful truncation semantics, and
//! the variance decomposition away from the Gaussian case.

use loglab_core::localization::{
    ensemble_paths, entropy_decomposition_check, lsi_from_strong_tilt_check, martingale_check,
    sigma_tilde_path, simulate_path, variance_decomposition_check,
};
use loglab_core::psi::functionals::{FunctionDictionary, TestFn};
use loglab_core::psi::net::DirectionNet;
use loglab_core::sampling;
use loglab_core::tilting::{log_spaced_magnitudes, strong_tilt_scan, HStrategy};
use loglab_core::{Measure, MeasureSpec, TiltParams, WeightedCloud};

const SEED: u64 = 777_001;

fn cloud_from(spec: &MeasureSpec, n: usize, seed: u64) -> WeightedCloud {
    let m = Measure::compile(spec).expect("spec compiles");
    let dim = m.dim();
    sampling::sample(&m, &TiltParams::none(dim), n, seed).expect("sampling")
}

fn e1(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    v
}

// The full pipeline: scan the (t, h) grid for the strong stability constant,
// then use that constant as the uniform subgaussian bound of the transfer.
// On the standard Gaussian the scan must land near 1 and every dictionary
// entry must pass both the static log-Sobolev bound and the pathwise
// quadratic-variation budget.
#[test]
fn stability_scan_constant_feeds_the_log_sobolev_transfer() {
    let spec = MeasureSpec::standard_gaussian(3);
    let measure = Measure::compile(&spec).unwrap();
    let strategy = HStrategy::RandomDirections {
        count: 4,
        magnitudes: log_spaced_magnitudes(0.5, 2.0, 3),
    };
    let scan = strong_tilt_scan(&measure, &[0.0, 0.5, 1.0], &strategy, 4_000, SEED).unwrap();
    assert_eq!(scan.failures, 0, "Gaussian tilts sample in closed form");
    assert!(
        (scan.m_hat - 1.0).abs() <= 0.05,
        "quadratic tilts only contract the Gaussian, so the supremum {} sits at t = 0 near 1",
        scan.m_hat
    );
    assert!(
        scan.m_hat >= scan.beta_hat,
        "the full-grid supremum {} cannot undercut its t = 0 slice {}",
        scan.m_hat,
        scan.beta_hat
    );

    let cloud = cloud_from(&spec, 18_000, SEED ^ 1);
    let dict = FunctionDictionary::new(vec![
        TestFn::Linear { theta: e1(3) },
        TestFn::ExpLinear { theta: e1(3), s: 0.5 },
        TestFn::Norm,
    ]);
    let rep = lsi_from_strong_tilt_check(
        &cloud,
        scan.m_hat,
        &dict,
        1.0 / 32.0,
        48,
        4,
        0.7,
        SEED ^ 2,
    )
    .unwrap();
    assert!(
        (rep.t_final - 1.0 / (4.0 * scan.m_hat * scan.m_hat)).abs() < 1e-15,
        "horizon {} must be 1/(4 m_hat^2)",
        rep.t_final
    );
    assert!(rep.horizon_reached, "no truncation expected at t = {}", rep.t_final);
    for e in &rep.entries {
        assert!(
            e.static_ok,
            "{}: entropy {} broke the bound {} from the scanned constant",
            e.name, e.entropy.value, e.bound
        );
        assert!(
            e.qv_ok,
            "{}: realized quadratic variation {} exceeded its budget {}",
            e.name, e.qv_integral, e.qv_budget
        );
        assert!(
            e.qv_budget <= 2.0 * rep.m_hat * rep.m_hat * rep.t_final * e.entropy.value * 2.5,
            "{}: budget {} is out of scale for entropy {} over horizon {}",
            e.name,
            e.qv_budget,
            e.entropy.value,
            rep.t_final
        );
    }
    assert!(rep.all_static_ok && rep.all_qv_ok);
}

// Product-cube base: reweighted means of a coordinate and of the squared
// norm stay driftless, the entropy of an exponential splits into localized
// plus martingale parts, and the subgaussian constant along a path obeys the
// curvature cap 1/sqrt(2t) of the quadratic tilt.
#[test]
fn cube_base_passes_the_martingale_entropy_and_curvature_checks() {
    let spec = MeasureSpec::unit_variance_cube(4);
    let cloud = cloud_from(&spec, 10_000, SEED ^ 3);
    let paths = ensemble_paths(&cloud, 1.0, 1.0 / 32.0, 96, SEED ^ 4).unwrap();

    let coord: Vec<f64> = cloud.points.column(0).to_vec();
    let rep = martingale_check(&paths, &coord).unwrap();
    assert!(rep.ok, "coordinate mean drifted: max |z| = {}", rep.max_abs_z);
    let rep = martingale_check(&paths, &cloud.squared_norms()).unwrap();
    assert!(rep.ok, "squared norm drifted: max |z| = {}", rep.max_abs_z);

    let g = TestFn::ExpLinear { theta: e1(4), s: 0.3 };
    let ent = entropy_decomposition_check(&cloud, &paths, &g).unwrap();
    assert!(
        ent.ok,
        "entropy split residual {} vs stderr {}",
        ent.residual, ent.residual_stderr
    );
    assert!(
        ent.martingale_entropy.value > 0.0 && ent.mean_tilted_entropy.value > 0.0,
        "both parts of the split must be positive, got {} and {}",
        ent.martingale_entropy.value,
        ent.mean_tilted_entropy.value
    );

    let sigma_cloud = cloud_from(&spec, 16_000, SEED ^ 5);
    let path = simulate_path(&sigma_cloud, 0.5, 1.0 / 16.0, SEED ^ 6).unwrap();
    assert!(!path.truncated, "16000 points carry the tilt to t = 0.5 in dim 4");
    let net = DirectionNet::build(4, 0.7, SEED ^ 7).unwrap();
    let sigmas = sigma_tilde_path(&sigma_cloud, &path, &net).unwrap();
    for (t, s) in path.ts.iter().zip(&sigmas) {
        assert!(
            s.value > 0.3 && s.value < 1.3,
            "subgaussian constant {} at t = {t} is out of the plausible cube range",
            s.value
        );
        if *t >= 0.1 {
            let cap = 1.0 / (2.0 * t).sqrt();
            assert!(
                s.value <= cap + 4.0 * s.stderr,
                "subgaussian constant {} at t = {t} broke the curvature cap {cap}",
                s.value
            );
        }
    }
}

// Heavy tilt overhead in dim 8 forces weight collapse: the ensemble keeps
// the sound prefix of every path, the checks run over the shared window, and
// identical seeds reproduce the reports byte for byte.
#[test]
fn truncated_ensembles_are_checked_over_their_common_window() {
    let spec = MeasureSpec::standard_gaussian(8);
    let cloud = cloud_from(&spec, 2_000, SEED ^ 8);
    let paths = ensemble_paths(&cloud, 3.0, 1.0 / 16.0, 24, SEED ^ 9).unwrap();
    let truncated = paths.iter().filter(|p| p.truncated).count();
    assert!(
        truncated >= 1,
        "2000 points in dim 8 cannot carry every path to t = 3 (none truncated)"
    );

    let coord: Vec<f64> = cloud.points.column(0).to_vec();
    let rep = martingale_check(&paths, &coord).unwrap();
    assert!(rep.ok, "drift over the common window: max |z| = {}", rep.max_abs_z);
    assert_eq!(rep.truncated_paths, truncated);
    let window_end = *rep.ts.last().unwrap();
    let shortest = paths.iter().map(|p| *p.ts.last().unwrap()).fold(f64::INFINITY, f64::min);
    assert_eq!(window_end, shortest, "the common window ends at the shortest path");
    assert!(window_end < 3.0, "the shared window must stop before the full horizon");

    let g = TestFn::ExpLinear { theta: e1(8), s: 0.2 };
    let ent = entropy_decomposition_check(&cloud, &paths, &g).unwrap();
    assert!(ent.ok, "residual {} vs stderr {}", ent.residual, ent.residual_stderr);
    assert_eq!(ent.t_final, window_end, "the split is evaluated at the shared window end");

    // Same seeds, same bytes: reports are fully deterministic.
    let again = ensemble_paths(&cloud, 3.0, 1.0 / 16.0, 24, SEED ^ 9).unwrap();
    let rep2 = martingale_check(&again, &coord).unwrap();
    assert_eq!(
        serde_json::to_string(&rep).unwrap(),
        serde_json::to_string(&rep2).unwrap(),
        "identical seeds must reproduce the martingale report byte for byte"
    );
    // Ensembles extend: the first paths of a larger ensemble are unchanged.
    let larger = ensemble_paths(&cloud, 3.0, 1.0 / 16.0, 30, SEED ^ 9).unwrap();
    for (a, b) in paths.iter().zip(larger.iter()) {
        assert_eq!(a.hs, b.hs, "path seeds depend on index only");
    }
}

// Variance decomposition on a non-Gaussian, non-product base: the uniform
// ball with unit-variance radius scaling.
#[test]
fn variance_decomposition_holds_on_the_uniform_ball() {
    let dim = 3;
    let radius = ((dim + 2) as f64).sqrt();
    let spec = MeasureSpec::UniformBall { radius, dim };
    let cloud = cloud_from(&spec, 6_000, SEED ^ 10);
    let paths = ensemble_paths(&cloud, 0.5, 1.0 / 32.0, 96, SEED ^ 11).unwrap();
    for phi in [TestFn::Linear { theta: e1(dim) }, TestFn::Norm] {
        let rep = variance_decomposition_check(&cloud, &paths, &phi).unwrap();
        assert!(
            rep.decomposition_ok,
            "{}: variance {} exceeds energy/T + qv = {}",
            phi.name(),
            rep.base_variance.value,
            rep.bound
        );
        assert!(
            rep.all_steps_ok,
            "{}: a step rate broke the 2 ||A|| Var budget: {:?}",
            phi.name(),
            rep.steps.iter().find(|s| !s.ok)
        );
        assert!(
            rep.qv < rep.base_variance.value,
            "{}: over a short horizon the martingale share {} stays below the variance {}",
            phi.name(),
            rep.qv,
            rep.base_variance.value
        );
    }
}
