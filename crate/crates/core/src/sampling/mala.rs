//! Metropolis-adjusted Langevin sampling for smooth unbounded targets.
//!
//! Proposal y = x - step * grad U(x) + sqrt(2 step) * xi with the exact
//! Metropolis correction, so the tilted density is stationary for any step.
//! The step adapts by doubling/halving on a coarse acceptance window during
//! the first half of burn-in only, then stays frozen, which keeps the kernel
//! time-homogeneous over every retained sample.

use crate::cloud::WeightedCloud;
use crate::error::{Error, Result};
use crate::measures::{Measure, MeasureSpec, TiltParams};
use crate::rng;
use ndarray::Array2;
use rand::Rng;

/// Sampler output: the cloud, the acceptance rate over retained samples, and
/// the (possibly adapted) step size that produced them.
#[derive(Debug)]
pub struct MalaResult {
    pub cloud: WeightedCloud,
    pub acceptance: f64,
    pub step: f64,
}

const ADAPT_WINDOW: usize = 100;
const MIN_SAMPLING_ACCEPTANCE: f64 = 0.1;

/// MALA for measures with a differentiable potential (smooth-potential and
/// Gaussian families). Acceptance below 0.1 during the sampling phase is an
/// error asking for a smaller step.
pub fn mala_sample(
    measure: &Measure,
    tilt: &TiltParams,
    n: usize,
    step: f64,
    burn_in: usize,
    seed: u64,
) -> Result<MalaResult> {
    tilt.validate()?;
    let d = measure.dim();
    if tilt.h.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: tilt.h.len() });
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("step size {step} must be positive")));
    }
    let mut x = start_point(measure);
    measure.grad_potential_tilted(tilt, &x)?; // fail fast on unsupported families
    let mut rng = rng::root_rng(seed);
    let mut state = State::new(measure, tilt, x.clone())?;
    let mut cur_step = step;

    // Burn-in with adaptation frozen after the halfway point.
    let mut window_accepts = 0usize;
    for k in 1..=burn_in {
        if state.advance(measure, tilt, cur_step, &mut rng) {
            window_accepts += 1;
        }
        if k <= burn_in / 2 && k % ADAPT_WINDOW == 0 {
            let rate = window_accepts as f64 / ADAPT_WINDOW as f64;
            if rate < 0.4 {
                cur_step *= 0.5;
            } else if rate > 0.75 {
                cur_step *= 2.0;
            }
            window_accepts = 0;
        } else if k % ADAPT_WINDOW == 0 {
            window_accepts = 0;
        }
    }

    let mut pts = Array2::zeros((n, d));
    let mut accepts = 0usize;
    for i in 0..n {
        if state.advance(measure, tilt, cur_step, &mut rng) {
            accepts += 1;
        }
        pts.row_mut(i).iter_mut().zip(&state.x).for_each(|(o, v)| *o = *v);
    }
    let acceptance = if n == 0 { 1.0 } else { accepts as f64 / n as f64 };
    if n > 0 && acceptance < MIN_SAMPLING_ACCEPTANCE {
        return Err(Error::MalaStepSize { rate: acceptance, steps: n, step: cur_step });
    }
    x.clear();
    Ok(MalaResult {
        cloud: WeightedCloud::new_uniform(
            pts,
            seed,
            format!("mala(t={}, step={cur_step:.3e}, burn={burn_in})", tilt.t),
        ),
        acceptance,
        step: cur_step,
    })
}

fn start_point(measure: &Measure) -> Vec<f64> {
    match &measure.spec {
        MeasureSpec::Gaussian { mean, .. } => mean.clone(),
        _ => vec![0.0; measure.dim()],
    }
}

struct State {
    x: Vec<f64>,
    log_pi: f64,
    grad_u: Vec<f64>,
}

impl State {
    fn new(measure: &Measure, tilt: &TiltParams, x: Vec<f64>) -> Result<Self> {
        let log_pi = measure.log_density_tilted(tilt, &x);
        let grad_u = measure.grad_potential_tilted(tilt, &x)?;
        Ok(State { x, log_pi, grad_u })
    }

    /// One MALA step; returns whether the proposal was accepted.
    fn advance(
        &mut self,
        measure: &Measure,
        tilt: &TiltParams,
        step: f64,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> bool {
        let d = self.x.len();
        let noise_scale = (2.0 * step).sqrt();
        let mut y = vec![0.0; d];
        for j in 0..d {
            y[j] = self.x[j] - step * self.grad_u[j] + noise_scale * rng::standard_normal(rng);
        }
        let log_pi_y = measure.log_density_tilted(tilt, &y);
        if log_pi_y == f64::NEG_INFINITY {
            return false;
        }
        let grad_u_y = match measure.grad_potential_tilted(tilt, &y) {
            Ok(g) => g,
            Err(_) => return false,
        };
        // log q(a -> b) = -|b - a + step grad U(a)|^2 / (4 step), up to a
        // constant shared by both directions.
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for j in 0..d {
            let f = y[j] - self.x[j] + step * self.grad_u[j];
            let b = self.x[j] - y[j] + step * grad_u_y[j];
            fwd += f * f;
            bwd += b * b;
        }
        let log_alpha = (log_pi_y - self.log_pi) + (fwd - bwd) / (4.0 * step);
        let accept = log_alpha >= 0.0 || rng.gen::<f64>().ln() < log_alpha;
        if accept {
            self.x = y;
            self.log_pi = log_pi_y;
            self.grad_u = grad_u_y;
        }
        accept
    }
}
