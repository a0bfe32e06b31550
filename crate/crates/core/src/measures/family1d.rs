//! A family of unit-variance one-dimensional log-concave measures used as a
//! common test bed: Gaussian, uniform, shifted exponentials, Laplace,
//! asymmetric two-slope potentials, a quartic potential, and a semicircle
//! profile.
//!
//! Every table-based member is standardized numerically (mean 0, variance 1)
//! before its density is frozen into a `OneDimGrid`, so downstream constants
//! are comparable across members.

use super::MeasureSpec;
use crate::error::Result;
use crate::quad::Quadrature1d;

/// Grid step of the standardized tables, in standard-deviation units.
const STD_STEP: f64 = 2e-3;

/// Build a standardized (mean 0, variance 1) OneDimGrid for the density
/// proportional to exp(-potential(x)) on [lo, hi].
pub fn standardized_grid_from_potential(
    potential: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<MeasureSpec> {
    let raw = Quadrature1d::on_interval(lo, hi, 200_001, |x| -potential(x))?;
    let m = raw.mean();
    let sd = raw.variance().sqrt();
    let span = (hi - lo) / sd;
    let n = ((span / STD_STEP).round() as usize).clamp(64, 2_000_000) + 1;
    let x0 = (lo - m) / sd;
    let dx = span / (n - 1) as f64;
    let values: Vec<f64> = (0..n)
        .map(|j| {
            let raw_x = (m + sd * (x0 + dx * j as f64)).clamp(lo, hi);
            (-potential(raw_x)).exp()
        })
        .collect();
    MeasureSpec::one_dim_grid(x0, dx, values)
}

/// Two-slope potential a*(-x)_+ + b*(x)_+, standardized to unit variance.
pub fn two_slope(a: f64, b: f64) -> Result<MeasureSpec> {
    assert!(a > 0.0 && b > 0.0, "two-slope rates must be positive");
    let drop = 46.0;
    standardized_grid_from_potential(
        move |x| if x < 0.0 { -a * x } else { b * x },
        -drop / a,
        drop / b,
    )
}

/// The standard test family: at least eight unit-variance 1D log-concave
/// members, analytic where possible, standardized tables otherwise.
pub fn one_dim_family() -> Vec<(String, MeasureSpec)> {
    let mut out: Vec<(String, MeasureSpec)> = Vec::new();
    out.push(("gaussian".into(), MeasureSpec::standard_gaussian(1)));
    out.push(("uniform".into(), MeasureSpec::unit_variance_cube(1)));
    // Exp(1) shifted to mean 0: density e^{-(x+1)} on [-1, inf).
    out.push((
        "exp_right".into(),
        standardized_grid_from_potential(|x| x + 1.0, -1.0, 45.0)
            .expect("exp_right member must build"),
    ));
    out.push((
        "exp_left".into(),
        standardized_grid_from_potential(|x| 1.0 - x, -45.0, 1.0)
            .expect("exp_left member must build"),
    ));
    let r2 = 2f64.sqrt();
    out.push((
        "laplace".into(),
        standardized_grid_from_potential(move |x| r2 * x.abs(), -33.0, 33.0)
            .expect("laplace member must build"),
    ));
    out.push(("two_slope_13".into(), two_slope(1.0, 3.0).expect("two_slope_13 must build")));
    out.push(("two_slope_31".into(), two_slope(3.0, 1.0).expect("two_slope_31 must build")));
    out.push((
        "quartic".into(),
        standardized_grid_from_potential(|x| x.powi(4), -2.7, 2.7)
            .expect("quartic member must build"),
    ));
    out.push((
        "semicircle".into(),
        standardized_grid_from_potential(
            |x| -0.5 * (1.0 - x * x).ln(),
            -1.0 + 1e-6,
            1.0 - 1e-6,
        )
        .expect("semicircle member must build"),
    ));
    out
}

/// Family members with sub-gaussian tails (finite psi2 norm); the
/// exponential-tailed members are excluded.
pub fn one_dim_family_subgaussian() -> Vec<(String, MeasureSpec)> {
    one_dim_family()
        .into_iter()
        .filter(|(name, _)| {
            !matches!(
                name.as_str(),
                "exp_right" | "exp_left" | "laplace" | "two_slope_13" | "two_slope_31"
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Measure;

    #[test]
    fn family_has_at_least_eight_members() {
        assert!(one_dim_family().len() >= 8);
    }

    #[test]
    fn all_members_are_standardized_and_log_concave() {
        for (name, spec) in one_dim_family() {
            spec.validate().unwrap_or_else(|e| panic!("{name} failed validation: {e}"));
            let m = Measure::compile(&spec).unwrap();
            let (lo, hi) = m.sampling_box();
            let q = Quadrature1d::on_interval(lo[0], hi[0], 200_001, |x| m.log_density(&[x]))
                .unwrap();
            assert!(
                q.mean().abs() < 2e-4,
                "{name}: mean {} should be 0 after standardization",
                q.mean()
            );
            assert!(
                (q.variance() - 1.0).abs() < 2e-3,
                "{name}: variance {} should be 1 after standardization",
                q.variance()
            );
        }
    }

    #[test]
    fn exponential_member_matches_closed_form_density() {
        // exp_right is Exp(1) - 1, already standardized; its log density has
        // slope -1 on the support.
        let family = one_dim_family();
        let (_, spec) = family.iter().find(|(n, _)| n == "exp_right").unwrap();
        let m = Measure::compile(spec).unwrap();
        let base = m.log_density(&[0.0]);
        let probe = m.log_density(&[2.0]);
        assert!(
            ((base - probe) - 2.0).abs() < 1e-6,
            "log-density slope should be -1: drop over 2 units was {}",
            base - probe
        );
    }

    #[test]
    fn two_slope_is_asymmetric_but_unit_variance() {
        let spec = two_slope(1.0, 3.0).unwrap();
        let m = Measure::compile(&spec).unwrap();
        let (lo, hi) = m.sampling_box();
        let q =
            Quadrature1d::on_interval(lo[0], hi[0], 200_001, |x| m.log_density(&[x])).unwrap();
        assert!((q.variance() - 1.0).abs() < 2e-3);
        assert!(
            q.central_moment(3) < -0.1,
            "slope 1 left / 3 right must skew left, third moment {}",
            q.central_moment(3)
        );
    }
}
