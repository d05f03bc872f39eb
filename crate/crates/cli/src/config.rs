//! Run configuration: a sectioned TOML file with exact key names. Unknown
//! keys are rejected; every module-level invariant is re-validated at load.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pulsequota::{CrossingMode, GrowthLaw, NoiseSpec, Policy, SimConfig};

use crate::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub growth: GrowthBlock,
    pub policy: PolicyBlock,
    pub noise: NoiseBlock,
    pub sim: SimBlock,
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub io: IoBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthBlock {
    /// "generalized-logistic" | "constant" | "table"
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// CSV file of `n,r` rows for kind = "table".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyBlock {
    pub k_plus: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_stride: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_closures: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    pub paths: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in_fraction: Option<f64>,
    /// Hand-entered replacements for the closure-expectation bounds; the
    /// summary verdicts (and the exit code) are evaluated against them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_lo_override: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_hi_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_csv: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::config(format!("config error: {e}")))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Builds the growth law, resolving a table path relative to `base_dir`.
    pub fn build_law(&self, base_dir: &Path) -> Result<GrowthLaw, AppError> {
        let g = &self.growth;
        match g.kind.as_str() {
            "generalized-logistic" => {
                let r0 = require(g.r0, "growth.r0")?;
                let k = require(g.k, "growth.k")?;
                GrowthLaw::generalized_logistic(r0, k, g.mu.unwrap_or(1.0), g.nu.unwrap_or(1.0))
                    .map_err(AppError::from_config)
            }
            "constant" => {
                let r = require(g.r, "growth.r")?;
                GrowthLaw::constant(r).map_err(AppError::from_config)
            }
            "table" => {
                let rel = g
                    .table
                    .as_ref()
                    .ok_or_else(|| AppError::config("missing key growth.table"))?;
                let path = base_dir.join(rel);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    AppError::config(format!("cannot read table {}: {e}", path.display()))
                })?;
                let mut points = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') || line.starts_with("n,") {
                        continue;
                    }
                    let mut parts = line.split(',');
                    let parse = |s: Option<&str>| -> Result<f64, AppError> {
                        s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                            AppError::config(format!(
                                "bad table row at {}:{}",
                                path.display(),
                                lineno + 1
                            ))
                        })
                    };
                    points.push((parse(parts.next())?, parse(parts.next())?));
                }
                GrowthLaw::piecewise_table(points).map_err(AppError::from_config)
            }
            other => Err(AppError::config(format!(
                "unknown growth.kind '{other}' (expected generalized-logistic | constant | table)"
            ))),
        }
    }

    pub fn build_policy(&self) -> Result<Policy, AppError> {
        Policy::new(self.policy.k_plus, self.policy.q).map_err(AppError::from_config)
    }

    pub fn build_noise(&self) -> Result<NoiseSpec, AppError> {
        NoiseSpec::new(self.noise.sigma).map_err(AppError::from_config)
    }

    pub fn build_sim(&self) -> Result<SimConfig, AppError> {
        let mode = match self.sim.crossing_mode.as_deref() {
            None | Some("interpolate") => CrossingMode::Interpolate,
            Some("grid") => CrossingMode::Grid,
            Some("bridge") => CrossingMode::Bridge,
            Some(other) => {
                return Err(AppError::config(format!(
                    "unknown sim.crossing_mode '{other}' (expected grid | interpolate | bridge)"
                )))
            }
        };
        let config = SimConfig {
            dt: self.sim.dt,
            t_max: self.sim.t_max,
            seed: self.sim.seed,
            crossing_mode: mode,
            clamp_floor: self.sim.clamp_floor,
            record_stride: self.sim.record_stride.unwrap_or(1),
            max_closures: self.sim.max_closures,
            track_envelope: false,
        };
        config.validate().map_err(AppError::from_config)?;
        Ok(config)
    }

    /// Initial abundance; defaults to the reopening level.
    pub fn n0(&self) -> f64 {
        self.sim.n0.unwrap_or(self.policy.k_plus - self.policy.q)
    }

    pub fn burn_in_fraction(&self) -> f64 {
        self.ensemble.burn_in_fraction.unwrap_or(0.1)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.io
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn write_csv(&self) -> bool {
        self.io.write_csv.unwrap_or(true)
    }
}

fn require(v: Option<f64>, key: &str) -> Result<f64, AppError> {
    v.ok_or_else(|| AppError::config(format!("missing key {key}")))
}
