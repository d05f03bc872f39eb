//! Command-line front end for the pulse-quota harvesting simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 hypothesis failure,
//! 3 expectation-bound violation, 4 runtime error.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pulsequota::analytics::closure_expectation_bounds;
use pulsequota::deterministic::{
    det_closure_length, det_closure_length_quadrature, det_length_bounds, det_trajectory,
};
use pulsequota::montecarlo::{long_run_average_no_harvest, run_ensemble, sweep};
use pulsequota::rates::{check_h1, check_h2, rate_bounds, DEFAULT_RESOLUTION};
use pulsequota::sde::simulate_path;
use pulsequota::{
    EnsembleSummary, GrowthLaw, HittingExpectation, NoiseSpec, Policy, SimConfig, SweepAxis,
};

use config::RunConfig;
use output::{
    closures_csv, det_trajectory_csv, ensure_out_dir, summary_block, trajectory_csv, write_file,
    Manifest, MAX_PATH_CSVS,
};

pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_HYPOTHESIS: u8 = 2;
pub const EXIT_BOUND: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

/// An error carrying its process exit code.
#[derive(Debug)]
pub struct AppError {
    pub code: u8,
    pub message: String,
}

impl AppError {
    pub fn config(message: impl Into<String>) -> Self {
        AppError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        AppError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }

    /// Maps a library error raised while interpreting the configuration.
    pub fn from_config(e: pulsequota::Error) -> Self {
        AppError::config(e.to_string())
    }
}

impl From<pulsequota::Error> for AppError {
    fn from(e: pulsequota::Error) -> Self {
        let code = match &e {
            pulsequota::Error::Infeasible(_) => EXIT_HYPOTHESIS,
            pulsequota::Error::OutOfTableRange { .. } | pulsequota::Error::NegativeAbundance(_) => {
                EXIT_RUNTIME
            }
            _ => EXIT_CONFIG,
        };
        AppError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pulsequota",
    version,
    about = "Pulse-quota harvesting under environmental noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override [ensemble].paths.
    #[arg(long)]
    paths: Option<u64>,
    /// Override [sim].seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override [io].out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and report hypotheses, rate bounds, and
    /// closed-form expectations without simulating.
    Validate(Common),
    /// Simulate seeded paths and write trajectory and closure CSVs.
    Simulate(Common),
    /// Pool closure lengths over an ensemble and test the expectation bounds.
    Closures(Common),
    /// Integrate the noise-free baseline and report its closure length.
    Deterministic(Common),
    /// Long-run time average of the unharvested stock.
    Average(Common),
    /// Re-run the closure ensemble along one parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary: sigma | q | k_plus | dt | paths.
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long)]
        values: String,
    },
}

/// A loaded configuration with command-line overrides applied and all
/// domain objects built.
struct Ctx {
    cfg: RunConfig,
    law: GrowthLaw,
    policy: Policy,
    noise: NoiseSpec,
    sim: SimConfig,
    n0: f64,
    paths: u64,
    out_dir: PathBuf,
}

impl Ctx {
    fn load(common: &Common) -> Result<Self, AppError> {
        let mut cfg = RunConfig::load(&common.config)?;
        if let Some(seed) = common.seed {
            cfg.sim.seed = seed;
        }
        if let Some(paths) = common.paths {
            cfg.ensemble.paths = paths;
        }
        if let Some(out) = &common.out {
            cfg.io.out_dir = Some(out.clone());
        }
        let base_dir = common.config.parent().unwrap_or(Path::new("."));
        let law = cfg.build_law(base_dir)?;
        let policy = cfg.build_policy()?;
        let noise = cfg.build_noise()?;
        let sim = cfg.build_sim()?;
        policy
            .validate_against(&law)
            .map_err(AppError::from_config)?;
        let n0 = cfg.n0();
        // `!(n0 > 0.0)` also rejects NaN, unlike `n0 <= 0.0`.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(n0 > 0.0) || n0 > policy.k_plus() {
            return Err(AppError::config(format!(
                "sim.n0 = {n0} outside (0, k_plus]"
            )));
        }
        let paths = cfg.ensemble.paths;
        if paths < 1 {
            return Err(AppError::config("ensemble.paths must be >= 1"));
        }
        let out_dir = cfg.out_dir();
        Ok(Ctx {
            cfg,
            law,
            policy,
            noise,
            sim,
            n0,
            paths,
            out_dir,
        })
    }

    fn prepare_out(&self) -> Result<(), AppError> {
        ensure_out_dir(&self.out_dir)
    }

    fn write_manifest(&self, command: &str) -> Result<(), AppError> {
        Manifest::new(command, &self.cfg, self.paths).write(&self.out_dir)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let failed = e.use_stderr();
            let _ = e.print();
            return if failed {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: &Command) -> Result<u8, AppError> {
    match command {
        Command::Validate(common) => cmd_validate(common),
        Command::Simulate(common) => cmd_simulate(common),
        Command::Closures(common) => cmd_closures(common),
        Command::Deterministic(common) => cmd_deterministic(common),
        Command::Average(common) => cmd_average(common),
        Command::Sweep {
            common,
            axis,
            values,
        } => cmd_sweep(common, axis, values),
    }
}

fn cmd_validate(common: &Common) -> Result<u8, AppError> {
    let ctx = Ctx::load(common)?;
    let h1 = check_h1(&ctx.law, DEFAULT_RESOLUTION)?;
    let h2 = check_h2(&ctx.law, &ctx.noise, &ctx.policy, DEFAULT_RESOLUTION)?;
    let bounds = rate_bounds(&ctx.law, ctx.policy.k_plus(), DEFAULT_RESOLUTION)?;

    println!("config=ok");
    println!("k_plus={}", ctx.policy.k_plus());
    println!("q={}", ctx.policy.q());
    println!("k_minus={}", ctx.policy.k_minus());
    println!("sigma={}", ctx.noise.sigma());
    println!("sigma_half_variance={}", ctx.noise.half_variance());
    println!("h1_holds={}", h1.holds);
    println!(
        "h1_k={}",
        h1.k.map_or_else(|| "unavailable".into(), |k| k.to_string())
    );
    println!("h2_holds={}", h2.holds);
    println!(
        "h2_k0_max={}",
        h2.k0_max
            .map_or_else(|| "unavailable".into(), |k| k.to_string())
    );
    println!("alpha={}", bounds.alpha);
    println!("beta={}", bounds.beta);
    println!("b_script={}", bounds.b_script);

    match det_closure_length(&ctx.law, &ctx.policy) {
        Ok(t) => println!("det_closure_length={t}"),
        Err(_) => println!("det_closure_length=unavailable"),
    }
    match det_length_bounds(&ctx.policy, &bounds) {
        Ok((lo, hi)) => {
            println!("det_bound_lo={lo}");
            println!(
                "det_bound_hi={}",
                hi.map_or_else(|| "unbounded".into(), |h| h.to_string())
            );
        }
        Err(_) => {
            println!("det_bound_lo=unavailable");
            println!("det_bound_hi=unavailable");
        }
    }
    match closure_expectation_bounds(&bounds, &ctx.noise, &ctx.policy) {
        Ok((lo, hi)) => {
            println!("expected_bound_lo={lo}");
            println!("expected_bound_hi={hi}");
        }
        Err(_) => {
            println!("expected_bound_lo=unavailable");
            println!("expected_bound_hi=unavailable");
        }
    }

    let constant_law = matches!(ctx.law, GrowthLaw::Constant { .. });
    if (h1.holds || constant_law) && h2.holds {
        Ok(0)
    } else {
        Ok(EXIT_HYPOTHESIS)
    }
}

fn cmd_simulate(common: &Common) -> Result<u8, AppError> {
    let ctx = Ctx::load(common)?;
    ctx.prepare_out()?;
    let write_csv = ctx.cfg.write_csv();

    let mut all_records = Vec::new();
    let mut total_events = 0u64;
    let mut clamp_activations = 0u64;
    let mut csv_files = 0u64;
    for path_id in 0..ctx.paths {
        let (traj, records) =
            simulate_path(&ctx.law, &ctx.policy, &ctx.noise, &ctx.sim, ctx.n0, path_id)?;
        total_events += traj.events.len() as u64;
        clamp_activations += traj.stats.clamp_activations;
        if write_csv && path_id < MAX_PATH_CSVS {
            let name = format!("path_{path_id:04}.csv");
            write_file(&ctx.out_dir.join(name), &trajectory_csv(&traj, &ctx.policy))?;
            csv_files += 1;
        }
        all_records.extend(records.into_iter().map(|r| (path_id, r)));
    }
    write_file(
        &ctx.out_dir.join("closures.csv"),
        &closures_csv(&all_records),
    )?;
    ctx.write_manifest("simulate")?;

    let censored = all_records.iter().filter(|(_, r)| r.censored).count();
    println!("paths={}", ctx.paths);
    println!("events={total_events}");
    println!("closures={}", all_records.len() - censored);
    println!("censored={censored}");
    println!("clamp_activations={clamp_activations}");
    println!("trajectory_files={csv_files}");
    println!("out_dir={}", ctx.out_dir.display());
    Ok(0)
}

/// Applies any configured bound overrides, then turns the verdicts into an
/// exit code.
fn finish_summary(ctx: &Ctx, summary: &mut EnsembleSummary) -> u8 {
    let over_lo = ctx.cfg.ensemble.bound_lo_override;
    let over_hi = ctx.cfg.ensemble.bound_hi_override;
    if over_lo.is_some() || over_hi.is_some() {
        summary.apply_bounds(
            over_lo.or(summary.bound_lo),
            over_hi.map(HittingExpectation::Finite).or(summary.bound_hi),
        );
    }
    if summary.lo_satisfied == Some(false) || summary.hi_satisfied == Some(false) {
        EXIT_BOUND
    } else {
        0
    }
}

fn cmd_closures(common: &Common) -> Result<u8, AppError> {
    let ctx = Ctx::load(common)?;
    ctx.prepare_out()?;
    let mut summary = run_ensemble(
        &ctx.law,
        &ctx.policy,
        &ctx.noise,
        &ctx.sim,
        ctx.n0,
        ctx.paths,
    )?;
    let code = finish_summary(&ctx, &mut summary);

    let block = summary_block(&summary);
    print!("{block}");
    write_file(&ctx.out_dir.join("summary.txt"), &block)?;
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| AppError::runtime(format!("cannot serialize summary: {e}")))?;
    write_file(&ctx.out_dir.join("summary.json"), &(json + "\n"))?;
    ctx.write_manifest("closures")?;
    Ok(code)
}

fn cmd_deterministic(common: &Common) -> Result<u8, AppError> {
    let ctx = Ctx::load(common)?;
    ctx.prepare_out()?;
    let traj = det_trajectory(&ctx.law, &ctx.policy, ctx.n0, ctx.sim.dt, ctx.sim.t_max)?;
    write_file(
        &ctx.out_dir.join("deterministic.csv"),
        &det_trajectory_csv(&traj, &ctx.policy),
    )?;
    ctx.write_manifest("deterministic")?;

    let bounds = rate_bounds(&ctx.law, ctx.policy.k_plus(), DEFAULT_RESOLUTION)?;
    println!("events={}", traj.events.len());
    match det_closure_length(&ctx.law, &ctx.policy) {
        Ok(t) => println!("closure_length={t}"),
        Err(_) => println!("closure_length=unavailable"),
    }
    match det_closure_length_quadrature(&ctx.law, &ctx.policy) {
        Ok(t) => println!("closure_length_quadrature={t}"),
        Err(_) => println!("closure_length_quadrature=unavailable"),
    }
    match det_length_bounds(&ctx.policy, &bounds) {
        Ok((lo, hi)) => {
            println!("bound_lo={lo}");
            println!(
                "bound_hi={}",
                hi.map_or_else(|| "unbounded".into(), |h| h.to_string())
            );
        }
        Err(_) => {
            println!("bound_lo=unavailable");
            println!("bound_hi=unavailable");
        }
    }
    println!("out_dir={}", ctx.out_dir.display());
    Ok(0)
}

fn cmd_average(common: &Common) -> Result<u8, AppError> {
    let ctx = Ctx::load(common)?;
    ctx.prepare_out()?;
    let (average, target) = long_run_average_no_harvest(
        &ctx.law,
        &ctx.noise,
        &ctx.sim,
        ctx.n0,
        ctx.cfg.burn_in_fraction(),
    )?;
    let rel_error = (average - target).abs() / target;
    let block = format!(
        "average={average}\ntarget={target}\nrel_error={rel_error}\nburn_in_fraction={}\n",
        ctx.cfg.burn_in_fraction()
    );
    print!("{block}");
    write_file(&ctx.out_dir.join("average.txt"), &block)?;
    ctx.write_manifest("average")?;
    Ok(0)
}

fn cmd_sweep(common: &Common, axis: &str, values: &str) -> Result<u8, AppError> {
    let ctx = Ctx::load(common)?;
    ctx.prepare_out()?;
    let axis: SweepAxis = axis.parse().map_err(AppError::from_config)?;
    let values: Vec<f64> = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| AppError::config(format!("bad sweep value '{v}'")))
        })
        .collect::<Result<_, _>>()?;

    let summaries = sweep(
        &ctx.law,
        &ctx.policy,
        &ctx.noise,
        &ctx.sim,
        ctx.n0,
        ctx.paths,
        axis,
        &values,
    )?;

    let mut code = 0;
    let mut rows = Vec::new();
    for (v, mut summary) in values.iter().zip(summaries) {
        let point_code = finish_summary(&ctx, &mut summary);
        code = code.max(point_code);
        println!("[value={v}]");
        print!("{}", summary_block(&summary));
        rows.push(serde_json::json!({ "value": v, "summary": summary }));
    }
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "axis": axis,
        "points": rows,
    }))
    .map_err(|e| AppError::runtime(format!("cannot serialize sweep: {e}")))?;
    write_file(&ctx.out_dir.join("sweep.json"), &(json + "\n"))?;
    ctx.write_manifest("sweep")?;
    Ok(code)
}
