//! Noise-free baseline: closure lengths of the pulse model, their exponential
//! bounds, and eventually periodic trajectories.

use crate::error::{Error, Result};
use crate::rates::{GrowthLaw, Policy, RateBounds};

/// Relative tolerance for the closure-length quadrature.
const QUAD_REL_TOL: f64 = 1e-10;

/// A sampled noise-free path: strictly increasing between pulse events, with
/// a drop from `k_plus` to `k_minus` at each event time.
#[derive(Debug, Clone, PartialEq)]
pub struct DetTrajectory {
    pub samples: Vec<(f64, f64)>,
    pub events: Vec<f64>,
}

/// Closure length T = integral of dN / (N r(N)) over [K-, K+].
///
/// Closed form for the plain logistic and the Malthusian law, adaptive
/// quadrature otherwise.
pub fn det_closure_length(law: &GrowthLaw, policy: &Policy) -> Result<f64> {
    match law {
        GrowthLaw::GeneralizedLogistic { r0, k, mu, nu } if *mu == 1.0 && *nu == 1.0 => {
            let (kp, km) = (policy.k_plus(), policy.k_minus());
            if kp >= *k {
                return Err(Error::NonPositiveRate(kp));
            }
            Ok((kp * (k - km) / (km * (k - kp))).ln() / r0)
        }
        GrowthLaw::Constant { r } => {
            if *r <= 0.0 {
                return Err(Error::NonPositiveRate(policy.k_minus()));
            }
            Ok((policy.k_plus() / policy.k_minus()).ln() / r)
        }
        _ => det_closure_length_quadrature(law, policy),
    }
}

/// Same integral evaluated by adaptive Simpson quadrature regardless of law,
/// kept as an independent route against the closed forms.
pub fn det_closure_length_quadrature(law: &GrowthLaw, policy: &Policy) -> Result<f64> {
    let f = |n: f64| -> Result<f64> {
        let r = law.eval(n)?;
        if r <= 0.0 {
            return Err(Error::NonPositiveRate(n));
        }
        Ok(1.0 / (n * r))
    };
    // Seed intervals split toward K+ where the integrand steepens when
    // r(K+) is small.
    let (a, b) = (policy.k_minus(), policy.k_plus());
    let mut total = 0.0;
    let pieces = 16;
    for i in 0..pieces {
        let x0 = a + (b - a) * i as f64 / pieces as f64;
        let x1 = a + (b - a) * (i + 1) as f64 / pieces as f64;
        total += adaptive_simpson(&f, x0, x1, QUAD_REL_TOL * (b - a) / pieces as f64, 40)?;
    }
    Ok(total)
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    adaptive_simpson_inner(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_inner(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol * (left + right).abs().max(1e-300) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(
        adaptive_simpson_inner(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + adaptive_simpson_inner(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

/// Exponential bounds on the deterministic closure length:
/// `(ln(K+/K-)/beta, ln(K+/K-)/alpha)`. The upper bound is `None`
/// (unbounded) when `alpha <= 0`.
pub fn det_length_bounds(policy: &Policy, bounds: &RateBounds) -> Result<(f64, Option<f64>)> {
    if bounds.beta <= 0.0 {
        return Err(Error::NonPositiveRate(policy.k_plus()));
    }
    let log_ratio = (policy.k_plus() / policy.k_minus()).ln();
    let lo = log_ratio / bounds.beta;
    let hi = (bounds.alpha > 0.0).then(|| log_ratio / bounds.alpha);
    Ok((lo, hi))
}

/// Integrates N' = r(N) N with classical fixed-step RK4, locating each
/// threshold crossing by bisection on the offending step and resetting the
/// state to `k_minus`.
pub fn det_trajectory(
    law: &GrowthLaw,
    policy: &Policy,
    n0: f64,
    dt: f64,
    t_max: f64,
) -> Result<DetTrajectory> {
    if !(n0 > 0.0) || n0 > policy.k_plus() {
        return Err(Error::InvalidInput(format!(
            "initial abundance {n0} outside (0, K+]"
        )));
    }
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dt and t_max must be positive (dt={dt}, t_max={t_max})"
        )));
    }
    let kp = policy.k_plus();
    let time_tol = dt * 1e-6;
    let mut samples = vec![(0.0, n0)];
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut n = n0;
    while t < t_max {
        if n >= kp {
            events.push(t);
            n = policy.k_minus();
            samples.push((t, n));
            continue;
        }
        let h = dt.min(t_max - t);
        let n_next = rk4_step(law, n, h)?;
        if n_next >= kp {
            // Smallest step fraction reaching the threshold.
            let mut lo = 0.0;
            let mut hi = h;
            while hi - lo > time_tol {
                let mid = 0.5 * (lo + hi);
                if rk4_step(law, n, mid)? >= kp {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            t += hi;
            events.push(t);
            samples.push((t, kp));
            n = policy.k_minus();
            samples.push((t, n));
        } else {
            t += h;
            n = n_next;
            samples.push((t, n));
        }
    }
    Ok(DetTrajectory { samples, events })
}

fn rk4_step(law: &GrowthLaw, n: f64, h: f64) -> Result<f64> {
    let f = |x: f64| -> Result<f64> { Ok(law.eval(x)? * x) };
    let k1 = f(n)?;
    let k2 = f(n + 0.5 * h * k1)?;
    let k3 = f(n + 0.5 * h * k2)?;
    let k4 = f(n + h * k3)?;
    Ok(n + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{rate_bounds, DEFAULT_RESOLUTION};

    fn baseline_logistic() -> GrowthLaw {
        GrowthLaw::logistic(1.0 / 9.0, 9000.0).unwrap()
    }

    fn baseline_policy() -> Policy {
        Policy::new(6000.0, 5000.0).unwrap()
    }

    #[test]
    fn logistic_closure_closed_form() {
        let t = det_closure_length(&baseline_logistic(), &baseline_policy()).unwrap();
        let expected = 36.0 * std::f64::consts::LN_2;
        assert!((t - expected).abs() / expected < 1e-14, "got {t}");
    }

    #[test]
    fn malthusian_closure_closed_form() {
        let law = GrowthLaw::constant(1.0 / 9.0).unwrap();
        let t = det_closure_length(&law, &baseline_policy()).unwrap();
        assert!((t - 9.0 * 6.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn closure_length_vanishes_with_quota() {
        let policy = Policy::new(6000.0, 1e-6).unwrap();
        let t = det_closure_length(&baseline_logistic(), &policy).unwrap();
        assert!(t > 0.0 && t < 1e-8);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let t_closed = det_closure_length(&baseline_logistic(), &baseline_policy()).unwrap();
        let t_quad = det_closure_length_quadrature(&baseline_logistic(), &baseline_policy()).unwrap();
        assert!((t_quad - t_closed).abs() / t_closed < 1e-8);
    }

    #[test]
    fn quadrature_rejects_non_positive_rate() {
        let law = GrowthLaw::logistic(1.0 / 9.0, 5000.0).unwrap();
        // K+ above carrying capacity: r <= 0 inside the integration range.
        let policy = Policy::new(5500.0, 4500.0).unwrap();
        assert!(matches!(
            det_closure_length(&law, &policy),
            Err(Error::NonPositiveRate(_))
        ));
    }

    #[test]
    fn length_bounds_baseline_values() {
        let bounds = rate_bounds(&baseline_logistic(), 6000.0, DEFAULT_RESOLUTION).unwrap();
        let (lo, hi) = det_length_bounds(&baseline_policy(), &bounds).unwrap();
        let ln6 = 6.0_f64.ln();
        assert!((lo - 9.0 * ln6).abs() < 1e-10);
        assert!((hi.unwrap() - 27.0 * ln6).abs() < 1e-10);
    }

    #[test]
    fn length_bounds_collapse_for_constant_rate() {
        let law = GrowthLaw::constant(1.0 / 9.0).unwrap();
        let bounds = rate_bounds(&law, 6000.0, 2).unwrap();
        let (lo, hi) = det_length_bounds(&baseline_policy(), &bounds).unwrap();
        let t = det_closure_length(&law, &baseline_policy()).unwrap();
        assert!((lo - t).abs() < 1e-12);
        assert!((hi.unwrap() - t).abs() < 1e-12);
    }

    #[test]
    fn length_bounds_unbounded_when_alpha_non_positive() {
        let bounds = RateBounds {
            alpha: 0.0,
            beta: 0.1,
            b_script: 0.1,
        };
        let (_, hi) = det_length_bounds(&baseline_policy(), &bounds).unwrap();
        assert!(hi.is_none());
    }

    #[test]
    fn trajectory_is_eventually_periodic() {
        let traj =
            det_trajectory(&baseline_logistic(), &baseline_policy(), 1000.0, 0.005, 100.0).unwrap();
        let period = 36.0 * std::f64::consts::LN_2;
        let expected = [period, 2.0 * period, 3.0 * period];
        assert_eq!(traj.events.len(), 4);
        for (ev, exp) in traj.events.iter().zip(expected.iter()) {
            assert!((ev - exp).abs() / exp < 1e-6, "event {ev} vs {exp}");
        }
        let gaps: Vec<f64> = traj.events.windows(2).map(|w| w[1] - w[0]).collect();
        for g in &gaps {
            assert!((g - period).abs() / period < 1e-6);
        }
    }

    #[test]
    fn trajectory_immediate_event_at_threshold() {
        let traj = det_trajectory(&baseline_logistic(), &baseline_policy(), 6000.0, 0.01, 1.0).unwrap();
        assert_eq!(traj.events[0], 0.0);
        assert_eq!(traj.samples[1], (0.0, 1000.0));
    }

    #[test]
    fn constant_law_is_exact_exponential() {
        let law = GrowthLaw::constant(0.1).unwrap();
        let policy = baseline_policy();
        let traj = det_trajectory(&law, &policy, 1000.0, 0.01, 10.0).unwrap();
        for &(t, n) in &traj.samples {
            let expected = 1000.0 * (0.1 * t).exp();
            assert!((n - expected).abs() / expected < 1e-9, "t={t}");
        }
    }

    #[test]
    fn trajectory_respects_exponential_envelope() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let bounds = rate_bounds(&law, policy.k_plus(), DEFAULT_RESOLUTION).unwrap();
        let traj = det_trajectory(&law, &policy, 1000.0, 0.01, 80.0).unwrap();
        let mut anchor_t = 0.0;
        let mut anchor_n = 1000.0;
        for &(t, n) in &traj.samples {
            if n == policy.k_minus() && t > 0.0 {
                anchor_t = t;
                anchor_n = policy.k_minus();
            }
            let dt = t - anchor_t;
            let lo = anchor_n * (bounds.alpha * dt).exp();
            let hi = anchor_n * (bounds.beta * dt).exp();
            assert!(
                n >= lo * (1.0 - 1e-9) && n <= hi * (1.0 + 1e-9),
                "t={t} n={n}"
            );
        }
    }

    #[test]
    fn trajectory_rejects_bad_inputs() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        assert!(det_trajectory(&law, &policy, 0.0, 0.01, 1.0).is_err());
        assert!(det_trajectory(&law, &policy, 7000.0, 0.01, 1.0).is_err());
        assert!(det_trajectory(&law, &policy, 1000.0, 0.0, 1.0).is_err());
    }
}
