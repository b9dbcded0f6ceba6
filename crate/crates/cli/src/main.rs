use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use twinbench_core::harness::{
    self, collect_manifests, desiderata_gate, load_resolved_config, load_results, objects_csv,
    summary_json, HarnessConfig, SceneMode, SceneResult, DESIDERATA,
};

/// Exit code when the run completed but a desideratum failed.
const GATE_FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "twinbench",
    version,
    about = "Evaluate reconstructed meshes against ground truth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate every scene manifest and write metrics and reports.
    Evaluate {
        /// Scene manifest, or a directory searched for `*.json` manifests.
        #[arg(long, required = true, num_args = 1..)]
        manifest: Vec<PathBuf>,
        /// JSON config; keys left out take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_enum)]
        scene_mode: Option<SceneModeArg>,
    },
    /// Re-check the desiderata of an earlier run against its resolved thresholds.
    Gate {
        /// Output directory of `evaluate`.
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Print the per-object table or the run summary of an earlier run.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SceneModeArg {
    Whole,
    PerObject,
}

impl From<SceneModeArg> for SceneMode {
    fn from(m: SceneModeArg) -> Self {
        match m {
            SceneModeArg::Whole => SceneMode::Whole,
            SceneModeArg::PerObject => SceneMode::PerObject,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Evaluate {
            manifest,
            config,
            out,
            seed,
            workers,
            scene_mode,
        } => evaluate(
            &manifest,
            config.as_deref(),
            &out,
            seed,
            workers,
            scene_mode,
        ),
        Command::Gate { metrics } => gate(&metrics),
        Command::Report { metrics, format } => report(&metrics, format),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}

fn evaluate(
    manifests: &[PathBuf],
    config_path: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    scene_mode: Option<SceneModeArg>,
) -> CliResult {
    let mut config = match config_path {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if workers.is_some() {
        config.workers = workers;
    }
    if let Some(m) = scene_mode {
        config.scene_mode = m.into();
    }
    let paths = collect_manifests(manifests)?;
    if paths.is_empty() {
        return Err("no scene manifests found".into());
    }
    log::info!("evaluating {} scene(s) into {}", paths.len(), out.display());
    let outcome = harness::run(&paths, &config, out)?;
    print_gates(&outcome.results);
    Ok(exit_for(&outcome.results))
}

fn gate(metrics: &Path) -> CliResult {
    let config = load_resolved_config(metrics)?;
    let results: Vec<SceneResult> = load_results(metrics)?
        .into_iter()
        .map(|r| SceneResult {
            desiderata: desiderata_gate(&r.scene, &config.thresholds),
            scene: r.scene,
        })
        .collect();
    print_gates(&results);
    Ok(exit_for(&results))
}

fn report(metrics: &Path, format: Format) -> CliResult {
    let results = load_results(metrics)?;
    match format {
        Format::Csv => print!("{}", objects_csv(&results)?),
        Format::Json => print!("{}", summary_json(&results)),
    }
    Ok(ExitCode::SUCCESS)
}

fn print_gates(results: &[SceneResult]) {
    println!("scene_id,{}", DESIDERATA.join(","));
    for r in results {
        let statuses: Vec<&str> = r.desiderata.statuses().iter().map(|s| s.as_str()).collect();
        println!("{},{}", r.scene.scene_id, statuses.join(","));
    }
}

fn exit_for(results: &[SceneResult]) -> ExitCode {
    let failed = results.iter().any(|r| r.desiderata.any_fail());
    if failed {
        ExitCode::from(GATE_FAILED)
    } else {
        ExitCode::SUCCESS
    }
}
