//! Emission formats: trajectory CSVs, key=value summary blocks, JSON
//! summaries, and the replay manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use pulsequota::deterministic::DetTrajectory;
use pulsequota::rng::stream_seed;
use pulsequota::{ClosureRecord, EnsembleSummary, HittingExpectation, Policy, StochTrajectory};

use crate::config::RunConfig;
use crate::AppError;

/// At most this many per-path trajectory CSVs are written; the closure table
/// still covers every path.
pub const MAX_PATH_CSVS: u64 = 100;

pub fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    fs::write(path, contents)
        .map_err(|e| AppError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir)
        .map_err(|e| AppError::runtime(format!("cannot create {}: {e}", dir.display())))
}

/// `t,n,event` rows. Pulse instants appear as a pair of rows at the crossing
/// time: the threshold value flagged `event=1`, then the reset value.
pub fn trajectory_csv(traj: &StochTrajectory, policy: &Policy) -> String {
    let mut out = String::from("t,n,event\n");
    let kp = policy.k_plus();
    let km = policy.k_minus();
    let mut events = traj.events.iter().peekable();
    let mut emit_events_up_to = |out: &mut String, t: f64| {
        while let Some(&&te) = events.peek() {
            if te <= t {
                let _ = writeln!(out, "{te},{kp},1");
                let _ = writeln!(out, "{te},{km},0");
                events.next();
            } else {
                break;
            }
        }
    };
    for &(t, n) in &traj.samples {
        emit_events_up_to(&mut out, t);
        let _ = writeln!(out, "{t},{n},0");
    }
    emit_events_up_to(&mut out, f64::INFINITY);
    out
}

/// Same layout for the noise-free trajectory, whose samples already contain
/// the drop pair at each event time.
pub fn det_trajectory_csv(traj: &DetTrajectory, policy: &Policy) -> String {
    let mut out = String::from("t,n,event\n");
    let kp = policy.k_plus();
    let mut events = traj.events.iter().peekable();
    for &(t, n) in &traj.samples {
        let is_event = events.peek().is_some_and(|&&te| te == t && n == kp);
        if is_event {
            events.next();
        }
        let _ = writeln!(out, "{t},{n},{}", u8::from(is_event));
    }
    out
}

pub fn closures_csv(rows: &[(u64, ClosureRecord)]) -> String {
    let mut out = String::from("path,k,open_time,length,censored\n");
    for (path, r) in rows {
        let _ = writeln!(
            out,
            "{path},{},{},{},{}",
            r.k,
            r.open_time,
            r.length,
            u8::from(r.censored)
        );
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "unavailable".to_string(), |x| x.to_string())
}

fn fmt_hitting(v: Option<HittingExpectation>) -> String {
    match v {
        Some(HittingExpectation::Finite(x)) => x.to_string(),
        Some(HittingExpectation::Unbounded) => "unbounded".to_string(),
        None => "unavailable".to_string(),
    }
}

fn fmt_verdict(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "not_applicable",
    }
}

/// The key=value block for an ensemble summary.
pub fn summary_block(s: &EnsembleSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "paths={}", s.paths);
    let _ = writeln!(out, "closures_observed={}", s.closures_observed);
    let _ = writeln!(out, "censored={}", s.censored);
    let _ = writeln!(out, "mean_length={}", s.mean_length);
    let _ = writeln!(out, "std_error={}", s.std_error);
    let _ = writeln!(out, "ci95_lo={}", s.ci95.0);
    let _ = writeln!(out, "ci95_hi={}", s.ci95.1);
    let _ = writeln!(out, "bound_lo={}", fmt_opt(s.bound_lo));
    let _ = writeln!(out, "bound_hi={}", fmt_hitting(s.bound_hi));
    let _ = writeln!(out, "lo_satisfied={}", fmt_verdict(s.lo_satisfied));
    let _ = writeln!(out, "hi_satisfied={}", fmt_verdict(s.hi_satisfied));
    let _ = writeln!(out, "h2_holds={}", s.h2_holds);
    let _ = writeln!(out, "envelope_violation_rate={}", s.envelope_violation_rate);
    let _ = writeln!(out, "clamp_activations={}", s.clamp_activations);
    let _ = writeln!(out, "yield_rate={}", fmt_opt(s.yield_rate));
    let _ = writeln!(out, "inconclusive={}", s.inconclusive);
    out
}

/// Everything needed to replay a run byte-for-byte: the fully resolved
/// configuration (command-line overrides already applied) plus the derived
/// per-path stream seeds for the trajectories that were written out.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub paths: u64,
    pub master_seed: u64,
    pub stream_domain: u64,
    pub stream_seeds: Vec<u64>,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig, paths: u64) -> Self {
        let master_seed = config.sim.seed;
        let stream_seeds = (0..paths.min(MAX_PATH_CSVS))
            .map(|id| stream_seed(master_seed, 0, id))
            .collect();
        Manifest {
            command,
            config,
            paths,
            master_seed,
            stream_domain: 0,
            stream_seeds,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), AppError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| AppError::runtime(format!("cannot serialize manifest: {e}")))?;
        write_file(&out_dir.join("manifest.json"), &(json + "\n"))
    }
}
