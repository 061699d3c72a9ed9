use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use graphon_bps::experiments::config::{Dataset, Experiment};
use graphon_bps::experiments::{default_config_text, run_experiment, ExperimentConfig, MANIFEST_FILE};
use graphon_bps::Error;

#[derive(Parser)]
#[command(name = "gbps", version, about = "Graphon-level predictive synthesis experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Span vs simplex on the synthetic mixture generator.
    S1(Common),
    /// Learning curve over a grid of graph sizes.
    S2(Common),
    /// Giant-component fraction across a sparsity sweep.
    S3(Common),
    /// Hill tail exponents of two-component power-law mixtures.
    S4(Common),
    /// Link-prediction protocol on edge lists (positional args add datasets).
    Real(Common),
    /// Paired gaps from a metrics CSV (positional arg replaces the input).
    Report(Common),
    /// Split-hygiene audit on edge lists (positional args add datasets).
    Audit(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a `manifest.json` from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Input files, see the verb description.
    inputs: Vec<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn dataset(p: &PathBuf) -> Dataset {
    let name = p
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string());
    Dataset { name, path: p.clone() }
}

fn resolve(verb: &str, c: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        // validated below, once positional inputs are merged in
        None => ExperimentConfig::parse(&default_config_text(verb)?)?,
    };
    if cfg.experiment.verb() != verb {
        bail!("config describes experiment '{}', not '{verb}'", cfg.experiment.verb());
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    match &mut cfg.experiment {
        Experiment::Real(r) => r.datasets.extend(c.inputs.iter().map(dataset)),
        Experiment::Audit(a) => a.datasets.extend(c.inputs.iter().map(dataset)),
        Experiment::Report(r) => match c.inputs.as_slice() {
            [] => {}
            [p] => r.metrics = p.clone(),
            _ => bail!("report takes a single metrics file"),
        },
        _ if !c.inputs.is_empty() => bail!("{verb} takes no input files"),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(verb: &str, c: &Common) -> Result<(), (String, anyhow::Error)> {
    let tagged = |stage: &str| {
        let stage = stage.to_string();
        move |e: anyhow::Error| (stage, e)
    };
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ("config".to_string(), e.into()))?;
    }
    let cfg = resolve(verb, c).map_err(tagged("config"))?;
    if c.print_config {
        print!("{}", cfg.to_toml().map_err(|e| ("config".to_string(), e.into()))?);
        return Ok(());
    }
    let m = run_experiment(&cfg).map_err(|e| match e {
        Error::Stage { stage, source } => (stage, anyhow::Error::new(*source)),
        e => ("run".to_string(), e.into()),
    })?;
    println!("{} done: config sha256 {}", m.experiment, m.config_sha256);
    for f in &m.outputs {
        println!("  {}", cfg.output_dir.join(f).display());
    }
    println!("  {}", cfg.output_dir.join(MANIFEST_FILE).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, common) = match &cli.verb {
        Verb::S1(c) => ("s1", c),
        Verb::S2(c) => ("s2", c),
        Verb::S3(c) => ("s3", c),
        Verb::S4(c) => ("s4", c),
        Verb::Real(c) => ("real", c),
        Verb::Report(c) => ("report", c),
        Verb::Audit(c) => ("audit", c),
    };
    match run(verb, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => {
            eprintln!("error [{stage}]: {e:#}");
            ExitCode::FAILURE
        }
    }
}
