//! `register` and `distance`: LDDMM between MVOL1 volumes, singly or as a
//! manifest batch.

use std::path::{Path, PathBuf};

use morphkit::lddmm::EnergyRecord;
use morphkit::{register, LddmmParams, Volume3D};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::{json, REPORT_VERSION};

#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub matching: f64,
    pub regularization: f64,
    pub total: f64,
}

impl From<&EnergyRecord> for TraceRow {
    fn from(r: &EnergyRecord) -> Self {
        Self { iteration: r.iteration, matching: r.matching, regularization: r.regularization, total: r.total() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegistrationReport {
    pub report_version: u32,
    pub command: &'static str,
    pub template: String,
    pub target: String,
    pub params: LddmmParams,
    pub metric_distance: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_trace: Option<Vec<TraceRow>>,
    pub warped_template: Option<String>,
}

/// One registration job.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct Job {
    pub template: PathBuf,
    pub target: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub warped: Option<PathBuf>,
}

fn load(path: &Path) -> Result<Volume3D> {
    Volume3D::load(path).map_err(CliError::at(path))
}

/// Registers `job.template` onto `job.target` and writes the report; with
/// `trace == false` only the distance summary is kept.
pub fn run_job(job: &Job, params: &LddmmParams, trace: bool) -> Result<RegistrationReport> {
    params.validate()?;
    let template = load(&job.template)?;
    let target = load(&job.target)?;
    if !template.same_grid(&target) {
        return Err(CliError::Core {
            path: job.target.clone(),
            source: morphkit::Error::DimensionMismatch(format!("template grid {:?} vs target grid {:?}", template.dims(), target.dims())),
        });
    }
    let result = register(&template, &target, params)?;
    if let Some(w) = &job.warped {
        result.warped_template.save(w).map_err(CliError::at(w))?;
    }
    let report = RegistrationReport {
        report_version: REPORT_VERSION,
        command: if trace { "register" } else { "distance" },
        template: job.template.display().to_string(),
        target: job.target.display().to_string(),
        params: params.clone(),
        metric_distance: result.metric_distance,
        converged: result.converged,
        iterations: result.energy_trace.last().map_or(0, |r| r.iteration),
        energy_trace: trace.then(|| result.energy_trace.iter().map(TraceRow::from).collect()),
        warped_template: job.warped.as_ref().map(|p| p.display().to_string()),
    };
    let text = json::to_string(&report)?;
    json::write_atomic(&job.out, text.as_bytes()).map_err(CliError::io(&job.out))?;
    Ok(report)
}

/// Reads a manifest CSV with columns `template,target,out[,warped]`;
/// relative paths are taken relative to the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<Job>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut jobs = Vec::new();
    for row in reader.deserialize() {
        let mut job: Job = row?;
        for p in [&mut job.template, &mut job.target, &mut job.out] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(w) = job.warped.as_mut().filter(|w| w.is_relative()) {
            *w = base.join(&*w);
        }
        jobs.push(job);
    }
    if jobs.is_empty() {
        return Err(CliError::Usage(format!("{}: manifest lists no registrations", path.display())));
    }
    Ok(jobs)
}

/// Runs `jobs` on at most `workers` threads. Failures are reported per job
/// on stderr and summarised in the returned error.
pub fn run_batch(jobs: &[Job], params: &LddmmParams, workers: usize, trace: bool) -> Result<Vec<RegistrationReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    let results: Vec<Result<RegistrationReport>> = pool.install(|| jobs.par_iter().map(|j| run_job(j, params, trace)).collect());
    let mut reports = Vec::with_capacity(jobs.len());
    let mut code = None;
    let mut failed = 0;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                eprintln!("error: {} -> {}: {e}", job.template.display(), job.target.display());
                code.get_or_insert(e.exit_code());
                failed += 1;
            }
        }
    }
    match code {
        None => Ok(reports),
        Some(code) => Err(CliError::Batch { failed, total: jobs.len(), code }),
    }
}
