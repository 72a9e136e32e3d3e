use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpvtf::error::Error;
use gpvtf::trainer::TrainConfig;

use gpvtf_cli::commands::{
    cmd_eval, cmd_synth, cmd_synth_replay, cmd_train, run_sweep, write_sweep_outputs, Condition,
    SweepSpec, SynthSpec,
};
use gpvtf_cli::config::{resolve, ConfigOverrides};
use gpvtf_cli::manifest::{DatasetSource, RunManifest, SynthManifest, RUN_FORMAT};

/// Partial visual-tactile fused clustering experiments.
#[derive(Parser)]
#[command(name = "gpvtf", version, about)]
struct Cli {
    /// Master seed for the command (mask generation and training).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML config file with TrainConfig keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "gpvtf-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired visual/tactile dataset.
    Synth(SynthArgs),
    /// Train on a dataset at one missing rate and write reports.
    Train(TrainArgs),
    /// Run a missing-rate x seed (x ablation/baseline) sweep.
    Sweep(SweepArgs),
    /// Score a predictions file against ground-truth labels.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of clusters.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Samples per cluster.
    #[arg(long, default_value_t = 100)]
    per_cluster: usize,
    /// Visual feature dimension.
    #[arg(long, default_value_t = 32)]
    d1: usize,
    /// Tactile feature dimension.
    #[arg(long, default_value_t = 24)]
    d2: usize,
    /// Cluster separation in the shared latent space.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    /// Per-modality observation noise.
    #[arg(long, default_value_t = 1.0)]
    modality_noise: f64,
    /// Regenerate from an existing synth manifest instead.
    #[arg(long, conflicts_with_all = ["k", "per_cluster", "d1", "d2", "separation", "modality_noise"])]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Synth manifest describing the dataset files.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Visual features CSV (requires --tactile and --labels).
    #[arg(long, requires_all = ["tactile", "labels"], conflicts_with = "data")]
    visual: Option<PathBuf>,
    /// Tactile features CSV.
    #[arg(long)]
    tactile: Option<PathBuf>,
    /// Ground-truth labels file, one integer per line.
    #[arg(long)]
    labels: Option<PathBuf>,
}

impl DataArgs {
    fn resolve(&self) -> Result<DatasetSource, Error> {
        if let Some(manifest_path) = &self.data {
            let m = SynthManifest::load(manifest_path)?;
            let (v, t, l) = m.resolve_files(manifest_path);
            return Ok(DatasetSource {
                visual: v,
                tactile: t,
                labels: l,
            });
        }
        match (&self.visual, &self.tactile, &self.labels) {
            (Some(v), Some(t), Some(l)) => Ok(DatasetSource {
                visual: v.clone(),
                tactile: t.clone(),
                labels: l.clone(),
            }),
            _ => Err(Error::param(
                "provide --data <synth_manifest.json> or all of --visual/--tactile/--labels",
            )),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Missing rate in [0, 0.5].
    #[arg(long, default_value_t = 0.1)]
    mr: f64,
    /// Replay a previously written run manifest verbatim.
    #[arg(long, conflicts_with = "data")]
    replay: Option<PathBuf>,
    /// Save a checkpoint every N epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Resume from a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated missing rates, e.g. 0.1,0.2,0.3.
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5")]
    rates: String,
    /// Comma-separated seeds or an inclusive range like 1..10.
    #[arg(long, default_value = "1..10")]
    seeds: String,
    /// Extra ablation conditions: any of `gan`, `fusion-kl`.
    #[arg(long)]
    ablate: Option<String>,
    /// Also run the masked k-means reference baselines.
    #[arg(long)]
    baselines: bool,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions file, one integer per line.
    #[arg(long)]
    predictions: PathBuf,
    /// Ground-truth labels file, one integer per line.
    #[arg(long)]
    labels: PathBuf,
}

fn parse_rates(text: &str) -> Result<Vec<f64>, Error> {
    let mut rates = Vec::new();
    for part in text.split(',') {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad missing rate {part:?}")))?;
        rates.push(v);
    }
    if rates.is_empty() {
        return Err(Error::param("need at least one missing rate"));
    }
    Ok(rates)
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| Error::param(format!("bad seed {a:?}")))?;
        let hi: u64 = b.trim().parse().map_err(|_| Error::param(format!("bad seed {b:?}")))?;
        if hi < lo {
            return Err(Error::param(format!("empty seed range {text:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    let mut seeds = Vec::new();
    for part in text.split(',') {
        seeds.push(
            part.trim()
                .parse()
                .map_err(|_| Error::param(format!("bad seed {part:?}")))?,
        );
    }
    if seeds.is_empty() {
        return Err(Error::param("need at least one seed"));
    }
    Ok(seeds)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth(args) => {
            let manifest = if let Some(m) = &args.from_manifest {
                cmd_synth_replay(m, &cli.out)?
            } else {
                cmd_synth(
                    &SynthSpec {
                        k: args.k,
                        per_cluster: args.per_cluster,
                        d1: args.d1,
                        d2: args.d2,
                        separation: args.separation,
                        modality_noise: args.modality_noise,
                        seed: cli.seed,
                    },
                    &cli.out,
                )?
            };
            println!("wrote {}", manifest.display());
            Ok(())
        }
        Command::Train(args) => {
            let spec = if let Some(replay) = &args.replay {
                RunManifest::load(replay)?
            } else {
                let mut config: TrainConfig = resolve(cli.config.as_deref(), &args.overrides)?;
                config.seed = cli.seed;
                RunManifest {
                    format: RUN_FORMAT.to_string(),
                    dataset: args.data.resolve()?,
                    missing_rate: args.mr,
                    seed: cli.seed,
                    config,
                }
            };
            let outputs = cmd_train(
                &spec,
                &cli.out,
                args.checkpoint_every,
                args.resume.as_deref(),
            )?;
            println!(
                "acc {:.4} nmi {:.4} after {} epochs -> {}",
                outputs.report.acc,
                outputs.report.nmi,
                outputs.report.epochs_run,
                outputs.metrics_path.display()
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let source = args.data.resolve()?;
            let dataset = source.load()?;
            let mut conditions = vec![Condition::Full];
            if let Some(ablate) = &args.ablate {
                for name in ablate.split(',') {
                    conditions.push(Condition::parse_ablation(name)?);
                }
            }
            if args.baselines {
                conditions.push(Condition::KmeansVisual);
                conditions.push(Condition::KmeansTactile);
                conditions.push(Condition::KmeansConcat);
            }
            let mut config = resolve(cli.config.as_deref(), &args.overrides)?;
            config.seed = cli.seed;
            let spec = SweepSpec {
                rates: parse_rates(&args.rates)?,
                seeds: parse_seeds(&args.seeds)?,
                conditions,
                config,
            };
            for rate in &spec.rates {
                if !(0.0..=0.5).contains(rate) {
                    return Err(Error::param(format!("missing rate {rate} outside [0, 0.5]")));
                }
            }
            let rows = run_sweep(&dataset, &spec);
            let written = write_sweep_outputs(&rows, &cli.out)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            for path in written {
                println!("wrote {}", path.display());
            }
            if failed > 0 {
                eprintln!("{failed} of {} runs failed; see results.csv", rows.len());
            }
            Ok(())
        }
        Command::Eval(args) => {
            let (acc, nmi) = cmd_eval(&args.predictions, &args.labels)?;
            std::fs::create_dir_all(&cli.out)?;
            let doc = serde_json::json!({"acc": acc, "nmi": nmi});
            let path = cli.out.join("eval.json");
            std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n")?;
            println!("{}", serde_json::to_string(&doc).unwrap());
            Ok(())
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Param(_)
        | Error::Alignment(_)
        | Error::Parse { .. }
        | Error::Label { .. }
        | Error::Dim { .. }
        | Error::DegenerateCluster(_) => 2,
        Error::Io(_) | Error::Checkpoint(_) => 3,
        Error::Divergence { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
