//! Ingestion, agent fitting, configuration and reproducible experiment runs.
//!
//! Every run is a pure function of its resolved configuration: outputs are
//! computed in memory, then written by a single writer. If any write fails,
//! the files already written by the run are removed.

pub mod config;
pub mod fit;
pub mod io;
pub mod real;
pub mod synthetic;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{default_config_text, Experiment, ExperimentConfig, ARTIFACT_VERSION};
pub use fit::{agent_features, fit_agents_to_graph, AgentHyper};
pub use io::{load_edge_list, read_edge_list, LoadOptions, LoadedGraph};

use crate::error::{Error, Result};

/// In-memory result of an experiment: named files and the seeds used.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub replicate_seeds: Vec<u64>,
}

pub(crate) fn csv_bytes<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(AsRef::as_ref))?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub(crate) fn json_bytes<T: Serialize + ?Sized>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub experiment: String,
    pub config_sha256: String,
    /// Resolved configuration; loading the manifest as a config repeats the run.
    pub config: String,
    pub seed: u64,
    pub replicate_seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub compute_seconds: f64,
    pub write_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Computes the configured experiment without touching the filesystem
/// (except for reading inputs).
pub fn compute(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate().map_err(|e| e.at_stage("config"))?;
    let (r, seed) = (cfg.replicates, cfg.seed);
    match &cfg.experiment {
        Experiment::S1(c) => synthetic::run_s1(c, r, seed).map_err(|e| e.at_stage("synthesis")),
        Experiment::S2(c) => synthetic::run_s2(c, r, seed).map_err(|e| e.at_stage("synthesis")),
        Experiment::S3(c) => synthetic::run_s3(c, r, seed).map_err(|e| e.at_stage("sample")),
        Experiment::S4(c) => synthetic::run_s4(c, r, seed).map_err(|e| e.at_stage("sample")),
        Experiment::Real(c) => real::run_real(c, &cfg.agents, r, seed).map_err(|e| e.at_stage("evaluate")),
        Experiment::Report(c) => real::run_report(c),
        Experiment::Audit(c) => real::run_audit(c, r, seed).map(|(o, _)| o),
    }
}

fn write_all(dir: &Path, files: &[(String, Vec<u8>)], written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files {
        let p = dir.join(name);
        std::fs::write(&p, bytes)?;
        written.push(p);
    }
    Ok(())
}

/// Runs the experiment and writes its outputs plus `manifest.json` into
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let t0 = Instant::now();
    let out = compute(cfg)?;
    let compute_seconds = t0.elapsed().as_secs_f64();
    let mut manifest = RunManifest {
        artifact_version: ARTIFACT_VERSION.to_string(),
        experiment: cfg.experiment.verb().to_string(),
        config_sha256: cfg.sha256().map_err(|e| e.at_stage("config"))?,
        config: cfg.to_toml().map_err(|e| e.at_stage("config"))?,
        seed: cfg.seed,
        replicate_seeds: out.replicate_seeds.clone(),
        outputs: out.files.iter().map(|(n, _)| n.clone()).collect(),
        compute_seconds,
        write_seconds: 0.0,
    };
    let t1 = Instant::now();
    let mut written = Vec::new();
    let res = write_all(&cfg.output_dir, &out.files, &mut written).and_then(|_| {
        manifest.write_seconds = t1.elapsed().as_secs_f64();
        write_all(
            &cfg.output_dir,
            &[(MANIFEST_FILE.to_string(), json_bytes(&manifest)?)],
            &mut written,
        )
    });
    if let Err(e) = res {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
        return Err(e.at_stage("write"));
    }
    Ok(manifest)
}
