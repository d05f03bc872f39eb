//! Euler-Maruyama integration of the impulsive harvesting SDE
//! dN = r(N) N dt + sigma N dB, with threshold-crossing detection, pulse
//! reset to `k_minus`, and chaining of the post-reset segments.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::{rate_bounds, GrowthLaw, NoiseSpec, Policy, DEFAULT_RESOLUTION};
use crate::rng::path_rng;

/// How a threshold passage inside a step is detected and time-stamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingMode {
    /// Trigger on `n_next >= k_plus`, crossing stamped at the step end.
    Grid,
    /// Same trigger, crossing time by linear interpolation to the threshold.
    Interpolate,
    /// Interpolation, plus a Brownian-bridge coin flip for excursions that
    /// cross and come back inside one step.
    Bridge,
}

/// Knobs of one stochastic run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub crossing_mode: CrossingMode,
    /// Floor applied when a discrete step goes non-positive. `None` means
    /// `1e-9 * k_minus`. The continuous model keeps N > 0; activations are
    /// counted to expose a too-coarse dt.
    pub clamp_floor: Option<f64>,
    /// Keep every `record_stride`-th sample.
    pub record_stride: u64,
    /// Stop the path after this many completed closures. Pooling only the
    /// first few closures per path avoids the length bias that horizon
    /// truncation puts on completed-interval means.
    pub max_closures: Option<u64>,
    /// Track the shared-increment GBM envelope along the path (one extra
    /// exp per step).
    pub track_envelope: bool,
}

impl SimConfig {
    pub fn new(dt: f64, t_max: f64, seed: u64) -> Self {
        SimConfig {
            dt,
            t_max,
            seed,
            crossing_mode: CrossingMode::Interpolate,
            clamp_floor: None,
            record_stride: 1,
            max_closures: None,
            track_envelope: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_max > self.dt) {
            return Err(Error::InvalidConfig(format!(
                "t_max must exceed dt (dt={}, t_max={})",
                self.dt, self.t_max
            )));
        }
        if self.record_stride < 1 {
            return Err(Error::InvalidConfig(
                "record_stride must be >= 1".to_string(),
            ));
        }
        if self.max_closures == Some(0) {
            return Err(Error::InvalidConfig(
                "max_closures must be >= 1".to_string(),
            ));
        }
        if let Some(floor) = self.clamp_floor {
            if !(floor >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "clamp_floor must be >= 0, got {floor}"
                )));
            }
        }
        Ok(())
    }

    pub fn effective_clamp_floor(&self, policy: &Policy) -> f64 {
        self.clamp_floor.unwrap_or(1e-9 * policy.k_minus())
    }

    /// Number of whole steps covering the horizon.
    pub fn steps(&self) -> u64 {
        (self.t_max / self.dt).round().max(1.0) as u64
    }
}

/// Per-path discretization diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStats {
    pub clamp_activations: u64,
    pub envelope_steps: u64,
    pub envelope_violations: u64,
}

/// A sampled stochastic path. Pulse times live in `events`; recorded samples
/// never exceed `k_plus` (post-reset values are recorded as `k_minus`).
#[derive(Debug, Clone, PartialEq)]
pub struct StochTrajectory {
    pub samples: Vec<(f64, f64)>,
    pub events: Vec<f64>,
    pub increments_consumed: u64,
    pub path_id: u64,
    pub stats: PathStats,
}

/// One closure interval ending at harvest time `open_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureRecord {
    /// Event index along the path.
    pub k: u64,
    /// Harvest (season-opening) time tau_k; for a censored record, the
    /// horizon end.
    pub open_time: f64,
    /// tau_k - tau_{k-1}, with tau_{-1} := 0. A censored record carries
    /// `t_end - tau_{k-1}`, a lower bound on the unfinished closure.
    pub length: f64,
    pub censored: bool,
}

/// Supplies Brownian increments and uniforms to the integrator. Abstracted
/// so tests can drive the scheme with externally constructed increments
/// (e.g. coarsened refinements of one fine Brownian path).
pub trait IncrementSource {
    /// One Brownian increment, Normal(0, dt).
    fn gaussian_increment(&mut self, dt: f64) -> f64;
    /// One uniform draw in [0, 1), consumed only by bridge-mode detection.
    fn uniform(&mut self) -> f64;
}

/// The standard source: a seeded RNG.
pub struct RngSource<R: Rng> {
    pub rng: R,
}

impl<R: Rng> IncrementSource for RngSource<R> {
    #[inline]
    fn gaussian_increment(&mut self, dt: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * dt.sqrt()
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

/// One Euler-Maruyama update: `n + r(n) n dt + sigma n db`, floored at
/// `clamp_floor`.
pub fn em_step(
    law: &GrowthLaw,
    noise: &NoiseSpec,
    n: f64,
    dt: f64,
    db: f64,
    clamp_floor: f64,
) -> Result<f64> {
    Ok(em_step_raw(law, noise, n, dt, db, clamp_floor)?.0)
}

#[inline]
fn em_step_raw(
    law: &GrowthLaw,
    noise: &NoiseSpec,
    n: f64,
    dt: f64,
    db: f64,
    clamp_floor: f64,
) -> Result<(f64, bool)> {
    let r = law.eval(n)?;
    let next = n + r * n * dt + noise.sigma() * n * db;
    if next < clamp_floor {
        Ok((clamp_floor, true))
    } else {
        Ok((next, false))
    }
}

/// Verdict of threshold detection for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingDecision {
    pub crossed: bool,
    pub t_cross: f64,
}

/// Decides whether the path reached `k_plus` during `(t_prev, t_prev + dt]`.
///
/// In bridge mode a sub-threshold endpoint still crosses with probability
/// `exp(-2 (k_plus - n_prev)(k_plus - n_next) / (sigma^2 n_prev^2 dt))`
/// (left-endpoint diffusion frozen), stamped at the interval midpoint.
/// With sigma = 0 the bridge formula is undefined and detection falls back
/// to interpolation.
#[allow(clippy::too_many_arguments)]
pub fn detect_crossing(
    n_prev: f64,
    n_next: f64,
    t_prev: f64,
    dt: f64,
    k_plus: f64,
    noise: &NoiseSpec,
    mode: CrossingMode,
    u: f64,
) -> CrossingDecision {
    debug_assert!(n_prev < k_plus);
    let not_crossed = CrossingDecision {
        crossed: false,
        t_cross: 0.0,
    };
    if n_next >= k_plus {
        let t_cross = match mode {
            CrossingMode::Grid => t_prev + dt,
            CrossingMode::Interpolate | CrossingMode::Bridge => {
                t_prev + dt * (k_plus - n_prev) / (n_next - n_prev)
            }
        };
        return CrossingDecision {
            crossed: true,
            t_cross,
        };
    }
    if mode != CrossingMode::Bridge || noise.sigma() == 0.0 {
        return not_crossed;
    }
    let var = noise.sigma() * noise.sigma() * n_prev * n_prev * dt;
    let p = (-2.0 * (k_plus - n_prev) * (k_plus - n_next) / var).exp();
    if u < p {
        CrossingDecision {
            crossed: true,
            t_cross: t_prev + 0.5 * dt,
        }
    } else {
        not_crossed
    }
}

/// Simulates one path with the stream derived from `(config.seed, path_id)`.
pub fn simulate_path(
    law: &GrowthLaw,
    policy: &Policy,
    noise: &NoiseSpec,
    config: &SimConfig,
    n0: f64,
    path_id: u64,
) -> Result<(StochTrajectory, Vec<ClosureRecord>)> {
    simulate_path_in_domain(law, policy, noise, config, n0, path_id, 0)
}

/// Like [`simulate_path`], with an explicit stream domain (used by parameter
/// sweeps to keep per-value ensembles independent under one master seed).
#[allow(clippy::too_many_arguments)]
pub fn simulate_path_in_domain(
    law: &GrowthLaw,
    policy: &Policy,
    noise: &NoiseSpec,
    config: &SimConfig,
    n0: f64,
    path_id: u64,
    domain: u64,
) -> Result<(StochTrajectory, Vec<ClosureRecord>)> {
    let mut source = RngSource {
        rng: path_rng(config.seed, domain, path_id),
    };
    simulate_path_from_source(law, policy, noise, config, n0, path_id, &mut source)
}

/// The integrator proper, driven by an arbitrary increment source.
///
/// On each detected crossing a [`ClosureRecord`] is written and the state
/// resets to `k_minus`; stepping then resumes on the grid. An initial
/// abundance equal to `k_plus` fires an event at t = 0 without a record
/// (no closure preceded it). A segment still open at the horizon yields a
/// censored record.
#[allow(clippy::too_many_arguments)]
pub fn simulate_path_from_source<S: IncrementSource>(
    law: &GrowthLaw,
    policy: &Policy,
    noise: &NoiseSpec,
    config: &SimConfig,
    n0: f64,
    path_id: u64,
    source: &mut S,
) -> Result<(StochTrajectory, Vec<ClosureRecord>)> {
    config.validate()?;
    let kp = policy.k_plus();
    let km = policy.k_minus();
    if !(n0 > 0.0) || n0 > kp {
        return Err(Error::InvalidInput(format!(
            "initial abundance {n0} outside (0, K+]"
        )));
    }
    let dt = config.dt;
    let floor = config.effective_clamp_floor(policy);
    let steps = config.steps();
    let t_end = steps as f64 * dt;

    // Shared-increment GBM envelope factors, exp((gamma - sigma^2/2) dt).
    let (env_lo_factor, env_hi_factor) = if config.track_envelope {
        let b = rate_bounds(law, kp, DEFAULT_RESOLUTION)?;
        let half = noise.half_variance();
        (((b.alpha - half) * dt).exp(), ((b.beta - half) * dt).exp())
    } else {
        (1.0, 1.0)
    };

    let mut stats = PathStats::default();
    let mut samples = Vec::with_capacity((steps / config.record_stride + 2) as usize);
    let mut events = Vec::new();
    let mut records = Vec::new();
    let mut increments = 0u64;
    let mut n = n0;
    let mut prev_open = 0.0;
    let mut k_index = 0u64;
    let (mut env_lo, mut env_hi) = (n, n);
    let mut finished_early = false;

    if n >= kp {
        events.push(0.0);
        n = km;
        env_lo = km;
        env_hi = km;
    }
    samples.push((0.0, n));

    for i in 0..steps {
        let t_prev = i as f64 * dt;
        let db = source.gaussian_increment(dt);
        increments += 1;
        let (n_next, clamped) = em_step_raw(law, noise, n, dt, db, floor)?;
        if clamped {
            stats.clamp_activations += 1;
        }
        let u = if config.crossing_mode == CrossingMode::Bridge && n_next < kp {
            source.uniform()
        } else {
            0.0
        };
        let decision = detect_crossing(n, n_next, t_prev, dt, kp, noise, config.crossing_mode, u);
        if decision.crossed {
            records.push(ClosureRecord {
                k: k_index,
                open_time: decision.t_cross,
                length: decision.t_cross - prev_open,
                censored: false,
            });
            events.push(decision.t_cross);
            prev_open = decision.t_cross;
            k_index += 1;
            n = km;
            env_lo = km;
            env_hi = km;
            if config.max_closures == Some(k_index) {
                finished_early = true;
                if (i + 1) % config.record_stride != 0 {
                    samples.push(((i + 1) as f64 * dt, n));
                }
                break;
            }
        } else {
            if config.track_envelope {
                let shock = (noise.sigma() * db).exp();
                env_lo *= env_lo_factor * shock;
                env_hi *= env_hi_factor * shock;
                stats.envelope_steps += 1;
                if n_next < env_lo || n_next > env_hi {
                    stats.envelope_violations += 1;
                }
            }
            n = n_next;
        }
        if (i + 1) % config.record_stride == 0 {
            samples.push(((i + 1) as f64 * dt, n));
        }
    }

    if !finished_early && prev_open < t_end {
        records.push(ClosureRecord {
            k: k_index,
            open_time: t_end,
            length: t_end - prev_open,
            censored: true,
        });
    }

    Ok((
        StochTrajectory {
            samples,
            events,
            increments_consumed: increments,
            path_id,
            stats,
        },
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::det_trajectory;

    fn baseline_logistic() -> GrowthLaw {
        GrowthLaw::logistic(1.0 / 9.0, 9000.0).unwrap()
    }

    fn baseline_policy() -> Policy {
        Policy::new(6000.0, 5000.0).unwrap()
    }

    fn no_noise() -> NoiseSpec {
        NoiseSpec::new(0.0).unwrap()
    }

    #[test]
    fn em_step_deterministic_euler() {
        let law = GrowthLaw::constant(0.1).unwrap();
        let n = em_step(&law, &no_noise(), 100.0, 0.01, 0.0, 0.0).unwrap();
        assert!((n - 100.0 * (1.0 + 0.1 * 0.01)).abs() < 1e-12);
    }

    #[test]
    fn em_step_fixed_point_at_capacity() {
        let law = baseline_logistic();
        let n = em_step(&law, &no_noise(), 9000.0, 0.01, 0.0, 0.0).unwrap();
        assert_eq!(n, 9000.0);
    }

    #[test]
    fn em_step_update_arithmetic() {
        let law = baseline_logistic();
        let noise = NoiseSpec::new(1.0 / 3.0).unwrap();
        let n = em_step(&law, &noise, 1000.0, 0.01, 0.05, 0.0).unwrap();
        let expected = 1000.0 + (8.0 / 81.0) * 1000.0 * 0.01 + (1.0 / 3.0) * 1000.0 * 0.05;
        assert!((n - expected).abs() < 1e-9);
        assert!((n - 1017.654).abs() < 1e-3);
    }

    #[test]
    fn em_step_clamps_at_floor() {
        let law = GrowthLaw::constant(0.1).unwrap();
        let noise = NoiseSpec::new(1.0).unwrap();
        let n = em_step(&law, &noise, 100.0, 0.01, -5.0, 1e-6).unwrap();
        assert_eq!(n, 1e-6);
    }

    #[test]
    fn crossing_interpolates_to_midpoint() {
        let d = detect_crossing(
            5999.0,
            6001.0,
            3.0,
            0.01,
            6000.0,
            &no_noise(),
            CrossingMode::Interpolate,
            0.0,
        );
        assert!(d.crossed);
        assert!((d.t_cross - 3.005).abs() < 1e-12);
    }

    #[test]
    fn bridge_probability_negligible_far_from_threshold() {
        let noise = NoiseSpec::new(1.0 / 3.0).unwrap();
        let d = detect_crossing(
            1000.0,
            1001.0,
            0.0,
            0.01,
            6000.0,
            &noise,
            CrossingMode::Bridge,
            0.0,
        );
        // p = exp(-2*5000*4999 / ((1/9)*1e6*0.01)) ~ exp(-44991): even u = 0
        // cannot win because exp underflows to zero.
        assert!(!d.crossed);
    }

    #[test]
    fn boundary_equality_crosses_in_every_mode() {
        for mode in [
            CrossingMode::Grid,
            CrossingMode::Interpolate,
            CrossingMode::Bridge,
        ] {
            let d = detect_crossing(5990.0, 6000.0, 1.0, 0.01, 6000.0, &no_noise(), mode, 0.5);
            assert!(d.crossed);
            assert!((d.t_cross - 1.01).abs() < 1e-12);
        }
    }

    #[test]
    fn bridge_falls_back_to_interpolate_without_noise() {
        let d = detect_crossing(
            5999.0,
            5999.5,
            0.0,
            0.01,
            6000.0,
            &no_noise(),
            CrossingMode::Bridge,
            0.0,
        );
        assert!(!d.crossed);
    }

    #[test]
    fn noiseless_closures_match_deterministic_period() {
        let config = SimConfig::new(1e-3, 80.0, 1);
        let (_, records) = simulate_path(
            &baseline_logistic(),
            &baseline_policy(),
            &no_noise(),
            &config,
            1000.0,
            0,
        )
        .unwrap();
        let period = 36.0 * std::f64::consts::LN_2;
        let finished: Vec<_> = records.iter().filter(|r| !r.censored).collect();
        assert_eq!(finished.len(), 3);
        for r in finished {
            assert!(
                (r.length - period).abs() / period < 5.0 * 1e-3,
                "length {} vs {period}",
                r.length
            );
        }
    }

    #[test]
    fn noiseless_path_tracks_rk4_baseline() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let dt = 1e-3;
        let config = SimConfig::new(dt, 20.0, 1);
        let (traj, _) = simulate_path(&law, &policy, &no_noise(), &config, 1000.0, 0).unwrap();
        let det = det_trajectory(&law, &policy, 1000.0, dt, 20.0).unwrap();
        // No event inside 20 time units, so samples align on the grid.
        let mut max_rel = 0.0_f64;
        for (s, d) in traj.samples.iter().zip(det.samples.iter()) {
            assert!((s.0 - d.0).abs() < 1e-9);
            max_rel = max_rel.max((s.1 - d.1).abs() / d.1);
        }
        assert!(max_rel < 5.0 * dt, "max relative error {max_rel}");
    }

    #[test]
    fn paths_are_reproducible() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let noise = NoiseSpec::new(1.0 / 3.0).unwrap();
        let mut config = SimConfig::new(1e-3, 50.0, 42);
        config.track_envelope = true;
        let a = simulate_path(&law, &policy, &noise, &config, 1000.0, 3).unwrap();
        let b = simulate_path(&law, &policy, &noise, &config, 1000.0, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&law, &policy, &noise, &config, 1000.0, 4).unwrap();
        assert_ne!(a.0.samples, c.0.samples);
    }

    #[test]
    fn samples_never_exceed_threshold() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let noise = NoiseSpec::new(1.0 / 3.0).unwrap();
        let config = SimConfig::new(1e-3, 200.0, 7);
        let (traj, records) = simulate_path(&law, &policy, &noise, &config, 1000.0, 0).unwrap();
        for &(_, n) in &traj.samples {
            assert!(n > 0.0 && n <= policy.k_plus());
        }
        assert!(!records.is_empty());
        let mut prev = 0.0;
        for r in &records {
            assert!(r.length > 0.0);
            assert!((r.open_time - (prev + r.length)).abs() < 1e-9);
            prev = r.open_time;
        }
        assert_eq!(traj.stats.clamp_activations, 0);
    }

    #[test]
    fn record_stride_thins_samples() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let noise = NoiseSpec::new(1.0 / 3.0).unwrap();
        let mut config = SimConfig::new(1e-3, 10.0, 7);
        let (full, _) = simulate_path(&law, &policy, &noise, &config, 1000.0, 0).unwrap();
        config.record_stride = 10;
        let (thin, _) = simulate_path(&law, &policy, &noise, &config, 1000.0, 0).unwrap();
        assert_eq!(thin.samples.len() - 1, (full.samples.len() - 1) / 10);
        assert_eq!(full.events, thin.events);
    }

    #[test]
    fn horizon_only_censored_record() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let config = SimConfig::new(1e-2, 5.0, 1);
        let (_, records) = simulate_path(&law, &policy, &no_noise(), &config, 1000.0, 0).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].censored);
        assert!((records[0].length - 5.0).abs() < 1e-12);
    }

    #[test]
    fn initial_threshold_fires_event_without_record() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let config = SimConfig::new(1e-2, 5.0, 1);
        let (traj, records) =
            simulate_path(&law, &policy, &no_noise(), &config, 6000.0, 0).unwrap();
        assert_eq!(traj.events[0], 0.0);
        assert_eq!(traj.samples[0], (0.0, 1000.0));
        assert!(records.iter().all(|r| r.censored));
    }

    #[test]
    fn max_closures_stops_after_first_hit() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let noise = NoiseSpec::new(1.0 / 3.0).unwrap();
        let mut config = SimConfig::new(1e-3, 500.0, 11);
        config.max_closures = Some(1);
        let (traj, records) = simulate_path(&law, &policy, &noise, &config, 1000.0, 0).unwrap();
        assert_eq!(records.len(), 1);
        assert!(!records[0].censored);
        assert!(traj.increments_consumed < config.steps());
        // The stopped path agrees with the full path up to the first hit.
        config.max_closures = None;
        let (_, full) = simulate_path(&law, &policy, &noise, &config, 1000.0, 0).unwrap();
        assert_eq!(records[0], full[0]);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let law = baseline_logistic();
        let policy = baseline_policy();
        let noise = no_noise();
        let config = SimConfig::new(1e-2, 5.0, 1);
        assert!(simulate_path(&law, &policy, &noise, &config, 0.0, 0).is_err());
        assert!(simulate_path(&law, &policy, &noise, &config, 6500.0, 0).is_err());
        let bad = SimConfig::new(0.0, 5.0, 1);
        assert!(simulate_path(&law, &policy, &noise, &bad, 1000.0, 0).is_err());
    }
}
