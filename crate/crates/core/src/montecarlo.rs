//! Seeded ensembles of the impulsive SDE: pooled closure-length statistics,
//! comparison against the closed-form expectation bounds, the no-harvest
//! long-run average, and parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{closure_expectation_bounds, HittingExpectation};
use crate::error::{Error, Result};
use crate::rates::{
    check_h1, check_h2, rate_bounds, GrowthLaw, NoiseSpec, Policy, DEFAULT_RESOLUTION,
};
use crate::rng::path_rng;
use crate::sde::{simulate_path_in_domain, IncrementSource, RngSource, SimConfig};

/// Envelope tracking costs one exp per step, so only this many leading paths
/// carry it; the violation rate is reported over the tracked subset.
pub const ENVELOPE_TRACK_PATHS: u64 = 100;

/// Pooled ensemble statistics for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub paths: u64,
    pub closures_observed: u64,
    pub censored: u64,
    pub mean_length: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    /// Lower expectation bound; `None` when no finite bound exists
    /// (beta <= sigma^2/2).
    pub bound_lo: Option<f64>,
    /// Upper expectation bound; `None` when unavailable, `Unbounded` when
    /// alpha <= sigma^2/2.
    pub bound_hi: Option<HittingExpectation>,
    pub lo_satisfied: Option<bool>,
    /// `None` when the upper bound is unbounded or unavailable.
    pub hi_satisfied: Option<bool>,
    pub h2_holds: bool,
    pub envelope_violation_rate: f64,
    pub clamp_activations: u64,
    /// Q / mean closure length.
    pub yield_rate: Option<f64>,
    /// No non-censored closure was observed.
    pub inconclusive: bool,
}

impl EnsembleSummary {
    /// Re-evaluates the bound verdicts against externally supplied bounds
    /// (mean within two standard errors).
    pub fn apply_bounds(&mut self, lo: Option<f64>, hi: Option<HittingExpectation>) {
        self.bound_lo = lo;
        self.bound_hi = hi;
        if self.inconclusive {
            self.lo_satisfied = None;
            self.hi_satisfied = None;
            return;
        }
        self.lo_satisfied = self
            .bound_lo
            .map(|lo| lo <= self.mean_length + 2.0 * self.std_error);
        self.hi_satisfied = match self.bound_hi {
            Some(HittingExpectation::Finite(hi)) => {
                Some(self.mean_length - 2.0 * self.std_error <= hi)
            }
            _ => None,
        };
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Runs `paths` seeded paths and pools their closure lengths.
///
/// Censored closures never enter the mean; when `n0` differs from `k_minus`
/// the first closure of each path is excluded too, so every pooled length is
/// a reopening-to-reopening cycle. Aggregation walks paths in fixed id order
/// with compensated summation, so the summary is identical at any
/// concurrency level.
pub fn run_ensemble(
    law: &GrowthLaw,
    policy: &Policy,
    noise: &NoiseSpec,
    config: &SimConfig,
    n0: f64,
    paths: u64,
) -> Result<EnsembleSummary> {
    run_ensemble_in_domain(law, policy, noise, config, n0, paths, 0)
}

/// [`run_ensemble`] with an explicit stream domain (sweep points fold their
/// value index here, so point 0 reproduces the base run).
pub fn run_ensemble_in_domain(
    law: &GrowthLaw,
    policy: &Policy,
    noise: &NoiseSpec,
    config: &SimConfig,
    n0: f64,
    paths: u64,
    domain: u64,
) -> Result<EnsembleSummary> {
    if paths < 1 {
        return Err(Error::InvalidInput("paths must be >= 1".to_string()));
    }
    config.validate()?;
    let h1 = check_h1(law, DEFAULT_RESOLUTION)?;
    if !h1.holds && !matches!(law, GrowthLaw::Constant { .. }) {
        return Err(Error::Infeasible(
            "growth law has no carrying-capacity sign change".to_string(),
        ));
    }
    policy.validate_against(law)?;
    let h2 = check_h2(law, noise, policy, DEFAULT_RESOLUTION)?;

    let per_path: Vec<_> = (0..paths)
        .into_par_iter()
        .map(|path_id| {
            let mut cfg = *config;
            cfg.track_envelope = path_id < ENVELOPE_TRACK_PATHS;
            simulate_path_in_domain(law, policy, noise, &cfg, n0, path_id, domain)
                .map(|(traj, records)| (records, traj.stats))
        })
        .collect::<Result<_>>()?;

    let include_first = n0 == policy.k_minus();
    let mut lengths = Vec::new();
    let mut censored = 0u64;
    let mut clamp_activations = 0u64;
    let mut env_steps = 0u64;
    let mut env_violations = 0u64;
    for (records, stats) in &per_path {
        clamp_activations += stats.clamp_activations;
        env_steps += stats.envelope_steps;
        env_violations += stats.envelope_violations;
        for r in records {
            if r.censored {
                censored += 1;
            } else if include_first || r.k > 0 {
                lengths.push(r.length);
            }
        }
    }

    let n = lengths.len() as u64;
    let inconclusive = n == 0;
    let (mean, se) = if inconclusive {
        (0.0, 0.0)
    } else {
        let mean = neumaier_sum(lengths.iter().copied()) / n as f64;
        let var = if n > 1 {
            neumaier_sum(lengths.iter().map(|l| (l - mean) * (l - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        (mean, (var / n as f64).sqrt())
    };

    let bounds = rate_bounds(law, policy.k_plus(), DEFAULT_RESOLUTION)?;
    let (bound_lo, bound_hi) = match closure_expectation_bounds(&bounds, noise, policy) {
        Ok((lo, hi)) => (Some(lo), Some(hi)),
        Err(_) => (None, None),
    };

    let mut summary = EnsembleSummary {
        paths,
        closures_observed: n,
        censored,
        mean_length: mean,
        std_error: se,
        ci95: (mean - 1.96 * se, mean + 1.96 * se),
        bound_lo: None,
        bound_hi: None,
        lo_satisfied: None,
        hi_satisfied: None,
        h2_holds: h2.holds,
        envelope_violation_rate: if env_steps == 0 {
            0.0
        } else {
            env_violations as f64 / env_steps as f64
        },
        clamp_activations,
        yield_rate: (!inconclusive).then(|| policy.q() / mean),
        inconclusive,
    };
    summary.apply_bounds(bound_lo, bound_hi);
    Ok(summary)
}

/// Simulates one long unharvested logistic path and returns
/// `(time average over [burn_in, t_max], K (1 - sigma^2 / (2 r0)))`.
pub fn long_run_average_no_harvest(
    law: &GrowthLaw,
    noise: &NoiseSpec,
    config: &SimConfig,
    n0: f64,
    burn_in_fraction: f64,
) -> Result<(f64, f64)> {
    let GrowthLaw::GeneralizedLogistic { r0, k, mu, nu } = law else {
        return Err(Error::InvalidInput(
            "long-run average requires the plain logistic law".to_string(),
        ));
    };
    if *mu != 1.0 || *nu != 1.0 {
        return Err(Error::InvalidInput(
            "long-run average requires mu = nu = 1".to_string(),
        ));
    }
    if !(*r0 > noise.half_variance()) {
        return Err(Error::Infeasible(format!(
            "r0 = {r0} must exceed sigma^2/2 = {}: the population goes extinct",
            noise.half_variance()
        )));
    }
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidInput(format!(
            "burn-in fraction {burn_in_fraction} outside [0, 1)"
        )));
    }
    config.validate()?;
    if !(n0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "n0 must be positive, got {n0}"
        )));
    }

    let dt = config.dt;
    let steps = config.steps();
    let burn_in_steps = (burn_in_fraction * steps as f64).round() as u64;
    let floor = 1e-12 * k;
    let mut source = RngSource {
        rng: path_rng(config.seed, 0, 0),
    };
    let mut n = n0;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut count = 0u64;
    for i in 0..steps {
        let db = source.gaussian_increment(dt);
        let r = law.eval(n)?;
        n = (n + r * n * dt + noise.sigma() * n * db).max(floor);
        if i >= burn_in_steps {
            let t = sum + n;
            if sum.abs() >= n.abs() {
                comp += (sum - t) + n;
            } else {
                comp += (n - t) + sum;
            }
            sum = t;
            count += 1;
        }
    }
    let average = (sum + comp) / count as f64;
    let target = k * (1.0 - noise.half_variance() / r0);
    Ok((average, target))
}

/// The parameter an ensemble sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Sigma,
    Q,
    KPlus,
    Dt,
    Paths,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(SweepAxis::Sigma),
            "q" => Ok(SweepAxis::Q),
            "k_plus" => Ok(SweepAxis::KPlus),
            "dt" => Ok(SweepAxis::Dt),
            "paths" => Ok(SweepAxis::Paths),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep axis '{other}' (expected sigma | q | k_plus | dt | paths)"
            ))),
        }
    }
}

/// One ensemble per value along `axis`, all under the same master seed with
/// the value index folded into stream derivation.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    law: &GrowthLaw,
    policy: &Policy,
    noise: &NoiseSpec,
    config: &SimConfig,
    n0: f64,
    paths: u64,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<EnsembleSummary>> {
    if values.is_empty() {
        return Err(Error::InvalidInput(
            "sweep needs at least one value".to_string(),
        ));
    }
    let mut summaries = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let mut policy = *policy;
        let mut noise = *noise;
        let mut config = *config;
        let mut paths = paths;
        match axis {
            SweepAxis::Sigma => noise = NoiseSpec::new(v)?,
            SweepAxis::Q => policy = Policy::new(policy.k_plus(), v)?,
            SweepAxis::KPlus => policy = Policy::new(v, policy.q())?,
            SweepAxis::Dt => config.dt = v,
            SweepAxis::Paths => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "paths value must be a positive integer, got {v}"
                    )));
                }
                paths = v as u64;
            }
        }
        summaries.push(run_ensemble_in_domain(
            law, &policy, &noise, &config, n0, paths, i as u64,
        )?);
    }
    Ok(summaries)
}
