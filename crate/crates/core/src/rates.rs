//! Per-capita growth laws, their extrema over the regulated range, and the
//! two feasibility hypotheses: a sign change at carrying capacity (H1) and
//! growth not swallowed by noise near the reopening level (H2).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default grid count for scans over tabulated laws. Sub-0.1% extrema error
/// for smooth tables at negligible cost.
pub const DEFAULT_RESOLUTION: usize = 4096;

/// Per-capita growth rate r(N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GrowthLaw {
    /// r(N) = r0 (1 - (N/K)^mu)^nu with r0 > 0, K > 0, mu, nu >= 1.
    /// Above K the value is extended with odd symmetry, `-r0 ((N/K)^mu - 1)^nu`,
    /// so the sign structure holds for non-integer nu as well.
    GeneralizedLogistic { r0: f64, k: f64, mu: f64, nu: f64 },
    /// Malthusian: r(N) = r for all N.
    Constant { r: f64 },
    /// Sorted (abundance, rate) pairs, linearly interpolated. Evaluation
    /// outside the tabulated range is an error.
    PiecewiseTable { points: Vec<(f64, f64)> },
}

impl GrowthLaw {
    pub fn generalized_logistic(r0: f64, k: f64, mu: f64, nu: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::InvalidLaw(format!("r0 must be positive, got {r0}")));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidLaw(format!("K must be positive, got {k}")));
        }
        if !(mu >= 1.0) || !(nu >= 1.0) {
            return Err(Error::InvalidLaw(format!(
                "exponents must satisfy mu >= 1 and nu >= 1, got mu={mu}, nu={nu}"
            )));
        }
        Ok(GrowthLaw::GeneralizedLogistic { r0, k, mu, nu })
    }

    /// Plain logistic, mu = nu = 1.
    pub fn logistic(r0: f64, k: f64) -> Result<Self> {
        Self::generalized_logistic(r0, k, 1.0, 1.0)
    }

    pub fn constant(r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::InvalidLaw(format!("rate must be finite, got {r}")));
        }
        Ok(GrowthLaw::Constant { r })
    }

    pub fn piecewise_table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidLaw(
                "table needs at least two points".to_string(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidLaw(format!(
                    "table abscissae must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if points[0].0 < 0.0 {
            return Err(Error::InvalidLaw(
                "table abscissae must be >= 0".to_string(),
            ));
        }
        Ok(GrowthLaw::PiecewiseTable { points })
    }

    /// Evaluates r(n).
    pub fn eval(&self, n: f64) -> Result<f64> {
        if n < 0.0 {
            return Err(Error::NegativeAbundance(n));
        }
        match self {
            GrowthLaw::GeneralizedLogistic { r0, k, mu, nu } => {
                let u = if *mu == 1.0 { n / k } else { (n / k).powf(*mu) };
                let s = 1.0 - u;
                if *nu == 1.0 {
                    Ok(r0 * s)
                } else if s >= 0.0 {
                    Ok(r0 * s.powf(*nu))
                } else {
                    Ok(-r0 * (-s).powf(*nu))
                }
            }
            GrowthLaw::Constant { r } => Ok(*r),
            GrowthLaw::PiecewiseTable { points } => {
                let lo = points[0].0;
                let hi = points[points.len() - 1].0;
                if n < lo || n > hi {
                    return Err(Error::OutOfTableRange { n, lo, hi });
                }
                let idx = points.partition_point(|p| p.0 <= n);
                if idx == 0 {
                    return Ok(points[0].1);
                }
                if idx == points.len() {
                    return Ok(points[points.len() - 1].1);
                }
                let (x0, y0) = points[idx - 1];
                let (x1, y1) = points[idx];
                Ok(y0 + (y1 - y0) * (n - x0) / (x1 - x0))
            }
        }
    }
}

/// Noise amplitude sigma; sigma = 0 recovers the deterministic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    sigma: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidNoise(sigma));
        }
        Ok(NoiseSpec { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// sigma^2 / 2, the drift correction and the H2 threshold.
    pub fn half_variance(&self) -> f64 {
        0.5 * self.sigma * self.sigma
    }
}

/// The regulation triple: harvest threshold, quota, reopening level.
/// `k_minus = k_plus - q` holds bit-exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    k_plus: f64,
    q: f64,
    k_minus: f64,
}

impl Policy {
    pub fn new(k_plus: f64, q: f64) -> Result<Self> {
        if !(k_plus > 0.0) || !k_plus.is_finite() {
            return Err(Error::InvalidPolicy(format!(
                "threshold must be positive, got {k_plus}"
            )));
        }
        if !(q > 0.0) || !(q < k_plus) {
            return Err(Error::InvalidPolicy(format!(
                "quota must satisfy 0 < Q < K+ (got Q={q}, K+={k_plus})"
            )));
        }
        Ok(Policy {
            k_plus,
            q,
            k_minus: k_plus - q,
        })
    }

    pub fn k_plus(&self) -> f64 {
        self.k_plus
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn k_minus(&self) -> f64 {
        self.k_minus
    }

    /// Checks the threshold sits below the law's carrying capacity.
    pub fn validate_against(&self, law: &GrowthLaw) -> Result<()> {
        if let Some(k) = check_h1(law, DEFAULT_RESOLUTION)?.k {
            if self.k_plus >= k {
                return Err(Error::InvalidPolicy(format!(
                    "threshold K+ = {} must be below carrying capacity K = {k}",
                    self.k_plus
                )));
            }
        }
        Ok(())
    }
}

/// Extrema of r over the regulated range: `alpha`/`beta` are the infimum and
/// supremum over [0, K+], `b_script` the supremum over (0, K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub alpha: f64,
    pub beta: f64,
    pub b_script: f64,
}

/// Computes `RateBounds` for a law. Closed form where the law is monotone
/// (the generalized logistic with mu, nu >= 1 is decreasing, so the extrema
/// sit at the endpoints); knot enumeration for tables.
pub fn rate_bounds(law: &GrowthLaw, k_plus: f64, resolution: usize) -> Result<RateBounds> {
    if resolution < 2 {
        return Err(Error::BadResolution(resolution));
    }
    if !(k_plus > 0.0) {
        return Err(Error::InvalidInput(format!(
            "k_plus must be positive, got {k_plus}"
        )));
    }
    match law {
        GrowthLaw::GeneralizedLogistic { r0, .. } => Ok(RateBounds {
            alpha: law.eval(k_plus)?,
            beta: *r0,
            b_script: *r0,
        }),
        GrowthLaw::Constant { r } => Ok(RateBounds {
            alpha: *r,
            beta: *r,
            b_script: *r,
        }),
        GrowthLaw::PiecewiseTable { points } => {
            // Piecewise-linear: extrema live at knots or at the clipped endpoints.
            let mut alpha = law.eval(0.0)?.min(law.eval(k_plus)?);
            let mut beta = law.eval(0.0)?.max(law.eval(k_plus)?);
            for &(x, y) in points {
                if x > 0.0 && x < k_plus {
                    alpha = alpha.min(y);
                    beta = beta.max(y);
                }
            }
            let h1 = check_h1(law, resolution)?;
            let b_script = match h1.k {
                Some(k) => {
                    let mut sup = law.eval(0.0)?;
                    for &(x, y) in points {
                        if x > 0.0 && x < k {
                            sup = sup.max(y);
                        }
                    }
                    sup
                }
                // No carrying capacity on the table's support: fall back to
                // the table-wide supremum.
                None => points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
            };
            Ok(RateBounds {
                alpha,
                beta,
                b_script,
            })
        }
    }
}

/// Verdict of the sign-change hypothesis: r positive below K, zero at K,
/// negative above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H1Report {
    pub holds: bool,
    pub k: Option<f64>,
}

pub fn check_h1(law: &GrowthLaw, resolution: usize) -> Result<H1Report> {
    if resolution < 2 {
        return Err(Error::BadResolution(resolution));
    }
    match law {
        GrowthLaw::GeneralizedLogistic { k, .. } => Ok(H1Report {
            holds: true,
            k: Some(*k),
        }),
        GrowthLaw::Constant { .. } => Ok(H1Report {
            holds: false,
            k: None,
        }),
        GrowthLaw::PiecewiseTable { points } => {
            // Checked on the table's support only: no extrapolation model exists.
            let first_nonpos = points.iter().position(|p| p.1 <= 0.0);
            let Some(i) = first_nonpos else {
                return Ok(H1Report {
                    holds: false,
                    k: None,
                });
            };
            let positive_before = points[..i].iter().all(|p| p.1 > 0.0);
            let (k, rest_start) = if points[i].1 == 0.0 {
                (points[i].0, i + 1)
            } else if i == 0 {
                return Ok(H1Report {
                    holds: false,
                    k: None,
                });
            } else {
                // Linear root between the bracketing knots.
                let (x0, y0) = points[i - 1];
                let (x1, y1) = points[i];
                (x0 + (x1 - x0) * y0 / (y0 - y1), i)
            };
            let negative_after = points[rest_start..].iter().all(|p| p.1 < 0.0);
            if positive_before && negative_after && k > 0.0 {
                Ok(H1Report {
                    holds: true,
                    k: Some(k),
                })
            } else {
                Ok(H1Report {
                    holds: false,
                    k: None,
                })
            }
        }
    }
}

/// Verdict of the growth-versus-noise condition: some K0 in (K-, K+) with
/// `inf r over [0, K0]` strictly above sigma^2/2. `k0_max` is the largest
/// admissible K0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub holds: bool,
    pub k0_max: Option<f64>,
}

pub fn check_h2(
    law: &GrowthLaw,
    noise: &NoiseSpec,
    policy: &Policy,
    resolution: usize,
) -> Result<H2Report> {
    if resolution < 2 {
        return Err(Error::BadResolution(resolution));
    }
    let threshold = noise.half_variance();
    let none = H2Report {
        holds: false,
        k0_max: None,
    };
    match law {
        GrowthLaw::GeneralizedLogistic { r0, k, mu, nu } => {
            // Decreasing law: inf over [0, K0] is r(K0).
            if !(law.eval(policy.k_minus())? > threshold) {
                return Ok(none);
            }
            let k0_max = if law.eval(policy.k_plus())? > threshold {
                policy.k_plus()
            } else {
                // Solve r(N) = sigma^2/2.
                let root = k * (1.0 - (threshold / r0).powf(1.0 / nu)).powf(1.0 / mu);
                root.min(policy.k_plus())
            };
            Ok(H2Report {
                holds: true,
                k0_max: Some(k0_max),
            })
        }
        GrowthLaw::Constant { r } => {
            if *r > threshold {
                Ok(H2Report {
                    holds: true,
                    k0_max: Some(policy.k_plus()),
                })
            } else {
                Ok(none)
            }
        }
        GrowthLaw::PiecewiseTable { .. } => {
            // Ascending grid scan with a running minimum; the largest admissible
            // K0 is the last grid point strictly inside (K-, K+) whose prefix
            // minimum clears the threshold.
            let step = policy.k_plus() / (resolution - 1) as f64;
            let mut running_min = f64::INFINITY;
            let mut k0_max = None;
            for j in 0..resolution {
                let x = (j as f64 * step).min(policy.k_plus());
                running_min = running_min.min(law.eval(x)?);
                if x > policy.k_minus() && x < policy.k_plus() && running_min > threshold {
                    k0_max = Some(x);
                }
            }
            Ok(H2Report {
                holds: k0_max.is_some(),
                k0_max,
            })
        }
    }
}
