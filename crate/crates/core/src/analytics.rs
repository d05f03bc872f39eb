//! Closed-form geometric Brownian motion comparisons: exact envelope paths,
//! hitting-time expectations, closure-expectation bounds, and the
//! second-moment growth bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{NoiseSpec, Policy, RateBounds};
use crate::sde::{PathStats, StochTrajectory};

/// Mean first-passage time of a GBM to the harvest threshold. `Unbounded`
/// marks a non-positive net drift `gamma - sigma^2/2`: no finite guarantee,
/// which is a result, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HittingExpectation {
    Finite(f64),
    Unbounded,
}

impl HittingExpectation {
    pub fn finite(&self) -> Option<f64> {
        match self {
            HittingExpectation::Finite(v) => Some(*v),
            HittingExpectation::Unbounded => None,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, HittingExpectation::Unbounded)
    }
}

impl std::fmt::Display for HittingExpectation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HittingExpectation::Finite(v) => write!(f, "{v}"),
            HittingExpectation::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// Exact GBM solution on the grid:
/// `N(t_n) = n0 exp((gamma - sigma^2/2) t_n + sigma B(t_n))`, with `B` the
/// running sum of the supplied increments.
pub fn gbm_path(
    gamma: f64,
    noise: &NoiseSpec,
    n0: f64,
    increments: &[f64],
    dt: f64,
) -> Result<StochTrajectory> {
    if !(n0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial abundance must be positive, got {n0}"
        )));
    }
    let drift = gamma - noise.half_variance();
    let mut samples = Vec::with_capacity(increments.len() + 1);
    samples.push((0.0, n0));
    let mut brownian = 0.0;
    for (i, db) in increments.iter().enumerate() {
        brownian += db;
        let t = (i + 1) as f64 * dt;
        samples.push((t, n0 * (drift * t + noise.sigma() * brownian).exp()));
    }
    Ok(StochTrajectory {
        samples,
        events: Vec::new(),
        increments_consumed: increments.len() as u64,
        path_id: 0,
        stats: PathStats::default(),
    })
}

/// `ln(K+/K-) / (gamma - sigma^2/2)` when the net drift is positive,
/// `Unbounded` otherwise.
pub fn expected_hitting_time(gamma: f64, noise: &NoiseSpec, policy: &Policy) -> HittingExpectation {
    let drift = gamma - noise.half_variance();
    if drift > 0.0 {
        HittingExpectation::Finite((policy.k_plus() / policy.k_minus()).ln() / drift)
    } else {
        HittingExpectation::Unbounded
    }
}

/// Bounds on the expected closure length: the GBM hitting expectations at
/// rates `beta` (lower) and `alpha` (upper, possibly unbounded).
pub fn closure_expectation_bounds(
    bounds: &RateBounds,
    noise: &NoiseSpec,
    policy: &Policy,
) -> Result<(f64, HittingExpectation)> {
    match expected_hitting_time(bounds.beta, noise, policy) {
        HittingExpectation::Finite(lo) => {
            Ok((lo, expected_hitting_time(bounds.alpha, noise, policy)))
        }
        HittingExpectation::Unbounded => Err(Error::Infeasible(format!(
            "beta = {} does not exceed sigma^2/2 = {}: no finite lower bound",
            bounds.beta,
            noise.half_variance()
        ))),
    }
}

/// Gronwall-type second-moment bound
/// `C_t = (k_minus^2 + b_script k^2 t) exp(sigma^2 t)`.
pub fn second_moment_bound(
    policy: &Policy,
    bounds: &RateBounds,
    k: f64,
    noise: &NoiseSpec,
    t: f64,
) -> f64 {
    let km = policy.k_minus();
    (km * km + bounds.b_script * k * k * t) * (noise.sigma() * noise.sigma() * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline_policy() -> Policy {
        Policy::new(6000.0, 5000.0).unwrap()
    }

    fn baseline_noise() -> NoiseSpec {
        NoiseSpec::new(1.0 / 3.0).unwrap()
    }

    #[test]
    fn gbm_deterministic_exponential() {
        let noise = NoiseSpec::new(0.0).unwrap();
        let incs = vec![0.0; 10];
        let traj = gbm_path(0.1, &noise, 1000.0, &incs, 0.5).unwrap();
        for &(t, n) in &traj.samples {
            assert!((n - 1000.0 * (0.1 * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn gbm_zero_net_drift_is_flat() {
        let noise = baseline_noise();
        let traj = gbm_path(noise.half_variance(), &noise, 1000.0, &[0.0; 5], 1.0).unwrap();
        for &(_, n) in &traj.samples {
            assert!((n - 1000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gbm_single_step_arithmetic() {
        let traj = gbm_path(1.0 / 9.0, &baseline_noise(), 1000.0, &[0.3], 1.0).unwrap();
        let expected = 1000.0 * (1.0 / 9.0 - 1.0 / 18.0 + 0.1_f64).exp();
        assert!((traj.samples[1].1 - expected).abs() < 1e-9);
        assert!((traj.samples[1].1 - 1168.3).abs() < 0.1);
    }

    #[test]
    fn hitting_time_baseline_values() {
        let e = expected_hitting_time(1.0 / 9.0, &baseline_noise(), &baseline_policy());
        assert!((e.finite().unwrap() - 18.0 * 6.0_f64.ln()).abs() < 1e-10);

        let e = expected_hitting_time(1.0 / 27.0, &baseline_noise(), &baseline_policy());
        assert!(e.is_unbounded());

        let e = expected_hitting_time(1.0 / 9.0, &NoiseSpec::new(0.0).unwrap(), &baseline_policy());
        assert!((e.finite().unwrap() - 9.0 * 6.0_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn expectation_bounds_baseline() {
        let bounds = RateBounds {
            alpha: 1.0 / 27.0,
            beta: 1.0 / 9.0,
            b_script: 1.0 / 9.0,
        };
        let (lo, hi) =
            closure_expectation_bounds(&bounds, &baseline_noise(), &baseline_policy()).unwrap();
        assert!((lo - 18.0 * 6.0_f64.ln()).abs() < 1e-10);
        assert!(hi.is_unbounded());
    }

    #[test]
    fn expectation_bounds_collapse_in_malthusian_case() {
        let r = 1.0 / 9.0;
        let bounds = RateBounds {
            alpha: r,
            beta: r,
            b_script: r,
        };
        let (lo, hi) =
            closure_expectation_bounds(&bounds, &baseline_noise(), &baseline_policy()).unwrap();
        assert_eq!(lo, hi.finite().unwrap());
        assert!((lo - 18.0 * 6.0_f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn expectation_bounds_reduce_to_deterministic() {
        let bounds = RateBounds {
            alpha: 1.0 / 27.0,
            beta: 1.0 / 9.0,
            b_script: 1.0 / 9.0,
        };
        let noise = NoiseSpec::new(0.0).unwrap();
        let (lo, hi) = closure_expectation_bounds(&bounds, &noise, &baseline_policy()).unwrap();
        let ln6 = 6.0_f64.ln();
        assert!((lo - 9.0 * ln6).abs() < 1e-10);
        assert!((hi.finite().unwrap() - 27.0 * ln6).abs() < 1e-10);
    }

    #[test]
    fn expectation_bounds_error_when_beta_too_small() {
        let bounds = RateBounds {
            alpha: 0.01,
            beta: 0.02,
            b_script: 0.02,
        };
        assert!(closure_expectation_bounds(&bounds, &baseline_noise(), &baseline_policy()).is_err());
    }

    #[test]
    fn second_moment_bound_values() {
        let policy = baseline_policy();
        let bounds = RateBounds {
            alpha: 1.0 / 27.0,
            beta: 1.0 / 9.0,
            b_script: 1.0 / 9.0,
        };
        let c0 = second_moment_bound(&policy, &bounds, 9000.0, &baseline_noise(), 0.0);
        assert_eq!(c0, 1e6);

        let c10 = second_moment_bound(&policy, &bounds, 9000.0, &baseline_noise(), 10.0);
        let expected = (1e6 + (1.0 / 9.0) * 9000.0_f64 * 9000.0 * 10.0) * (10.0_f64 / 9.0).exp();
        assert!((c10 - expected).abs() / expected < 1e-12);
        assert!((c10 - 2.764e8).abs() < 5e5);

        let no_noise = NoiseSpec::new(0.0).unwrap();
        let degenerate = RateBounds {
            alpha: 0.0,
            beta: 0.0,
            b_script: 0.0,
        };
        assert_eq!(
            second_moment_bound(&policy, &degenerate, 9000.0, &no_noise, 123.0),
            1e6
        );
    }
}
