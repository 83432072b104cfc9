//! Command-line front end for morphkit: LDDMM registration of MVOL1
//! volumes and the longitudinal statistics report over a subject table.

pub mod analysis;
pub mod error;
pub mod json;
pub mod register;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use morphkit::longitudinal::load_table_path;
use morphkit::{LddmmParams, MorphTable, Volume3D};
use serde_json::json;

use analysis::{Analysis, AnalysisRequest, MeasureSet};
use error::{CliError, Result};
use register::Job;

/// Version of the JSON report layout.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "morphkit", version, about = "Diffeomorphic metric distances and longitudinal shape statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register a template onto a target and write the full report.
    Register(RegisterArgs),
    /// Like `register`, but keep only the metric distance.
    Distance(RegisterArgs),
    /// Run statistical analyses over a subject table.
    Stats(StatsArgs),
    /// Check subject tables and volume files without analysing them.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct LddmmArgs {
    /// Weight of the Laplacian in the smoothing operator.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Power of the smoothing operator.
    #[arg(long, default_value_t = 2.0)]
    pub exponent: f64,
    /// Image-matching noise level.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10)]
    pub timesteps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub step_size: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Stop when the relative energy change falls below this.
    #[arg(long, default_value_t = 1e-5)]
    pub energy_tol: f64,
}

impl From<&LddmmArgs> for LddmmParams {
    fn from(a: &LddmmArgs) -> Self {
        Self {
            alpha: a.alpha,
            gamma: a.gamma,
            exponent: a.exponent,
            sigma: a.sigma,
            timesteps: a.timesteps,
            step_size: a.step_size,
            max_iters: a.max_iters,
            energy_tol: a.energy_tol,
        }
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long, conflicts_with = "manifest")]
    pub template: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    pub target: Option<PathBuf>,
    /// Report path.
    #[arg(long, conflicts_with = "manifest")]
    pub out: Option<PathBuf>,
    /// Where to save the deformed template (MVOL1).
    #[arg(long, conflicts_with = "manifest")]
    pub warped: Option<PathBuf>,
    /// CSV with columns template,target,out[,warped], one registration per row.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Registrations run at once.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub lddmm: LddmmArgs,
}

impl RegisterArgs {
    fn jobs(&self) -> Result<Vec<Job>> {
        if let Some(m) = &self.manifest {
            return register::read_manifest(m);
        }
        match (&self.template, &self.target, &self.out) {
            (Some(template), Some(target), Some(out)) => {
                Ok(vec![Job { template: template.clone(), target: target.clone(), out: out.clone(), warped: self.warped.clone() }])
            }
            _ => Err(CliError::Usage("give --template, --target and --out, or --manifest".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Subject table (CSV).
    #[arg(long)]
    pub table: PathBuf,
    /// Analysis to run; repeat for several.
    #[arg(long = "analysis", required = true)]
    pub analyses: Vec<Analysis>,
    #[arg(long, default_value = "both")]
    pub measure: MeasureSet,
    /// Seed for bootstrap, permutation and Monte Carlo steps.
    #[arg(long, env = "MORPHKIT_SEED")]
    pub seed: Option<u64>,
    /// Cramér bootstrap replicates.
    #[arg(long, default_value_t = 10_000)]
    pub bootstrap: usize,
    /// Cramér-von Mises permutations.
    #[arg(long, default_value_t = 10_000)]
    pub permutations: usize,
    /// Monte Carlo replicates for Lilliefors p-values.
    #[arg(long, default_value_t = 10_000)]
    pub lilliefors_reps: usize,
    /// Highest power offered to stepwise logistic selection.
    #[arg(long, default_value_t = 9)]
    pub max_power: u32,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Report path.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for plot-data CSVs.
    #[arg(long)]
    pub plots: Option<PathBuf>,
}

impl StatsArgs {
    pub fn request(&self) -> AnalysisRequest {
        AnalysisRequest {
            analyses: self.analyses.clone(),
            measure: self.measure,
            seed: self.seed,
            bootstrap: self.bootstrap,
            permutations: self.permutations,
            lilliefors_replicates: self.lilliefors_reps,
            max_power: self.max_power,
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub table: Vec<PathBuf>,
    #[arg(long)]
    pub volume: Vec<PathBuf>,
}

pub fn load_table(path: &Path) -> Result<MorphTable> {
    load_table_path(path).map_err(CliError::at(path))
}

fn registrations(args: &RegisterArgs, trace: bool) -> Result<()> {
    let params = LddmmParams::from(&args.lddmm);
    params.validate()?;
    let jobs = args.jobs()?;
    for r in register::run_batch(&jobs, &params, args.jobs, trace)? {
        println!("{}\t{}\t{:.16e}", r.template, r.target, r.metric_distance);
    }
    Ok(())
}

/// Runs every requested analysis, then writes the report and plot data.
/// Nothing is written if any analysis fails.
pub fn stats(args: &StatsArgs) -> Result<()> {
    let req = args.request();
    req.validate()?;
    let table = load_table(&args.table)?;
    let outcome = analysis::run(&table, &req)?;
    let (n0, n05) = table.group_counts();
    let report = json!({
        "report_version": REPORT_VERSION,
        "command": "stats",
        "config": {
            "table": args.table.display().to_string(),
            "request": req,
            "analyses": req.expanded(),
        },
        "subjects": {"CDR0": n0, "CDR0.5": n05, "rejected": table.rejected},
        "results": outcome.blocks,
    });
    let text = json::to_string(&report)?;
    json::write_atomic(&args.out, text.as_bytes()).map_err(CliError::io(&args.out))?;
    if let Some(dir) = &args.plots {
        for p in &outcome.plots {
            let path = dir.join(&p.file_name);
            json::write_atomic(&path, &p.to_csv()?).map_err(CliError::io(&path))?;
        }
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<()> {
    if args.table.is_empty() && args.volume.is_empty() {
        return Err(CliError::Usage("give at least one --table or --volume".into()));
    }
    for path in &args.table {
        let t = load_table(path)?;
        let (n0, n05) = t.group_counts();
        println!("{}: {} subjects ({n0} CDR0, {n05} CDR0.5), {} rejected", path.display(), t.len(), t.rejected.len());
    }
    for path in &args.volume {
        let v = Volume3D::load(path).map_err(CliError::at(path))?;
        let [nx, ny, nz] = v.dims();
        println!("{}: {nx}x{ny}x{nz}", path.display());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Register(a) => registrations(a, true),
        Command::Distance(a) => registrations(a, false),
        Command::Stats(a) => stats(a),
        Command::Validate(a) => validate(a),
    }
}
