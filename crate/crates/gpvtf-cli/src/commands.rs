//! Implementations of the CLI subcommands, callable as library functions
//! so the test suites can drive them directly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gpvtf::data::{
    make_mask, save_labels, save_mask_csv, save_matrix_csv, synth_dataset, PairedDataset,
};
use gpvtf::error::{Error, Result};
use gpvtf::metrics::{accuracy, nmi};
use gpvtf::trainer::{EpochLosses, TrainConfig, TrainReport, Trainer};

use crate::baselines;
use crate::manifest::{DatasetSource, RunManifest, SynthManifest, METRICS_FORMAT, SYNTH_FORMAT};
use crate::svg::{line_chart, Series};

/// Parameters of `synth`.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub k: usize,
    pub per_cluster: usize,
    pub d1: usize,
    pub d2: usize,
    pub separation: f64,
    pub modality_noise: f64,
    pub seed: u64,
}

/// Generates a synthetic dataset, writes the three CSV files plus a
/// manifest that regenerates them bit-identically, and returns the
/// manifest path.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let ds = synth_dataset(
        spec.k,
        spec.per_cluster,
        spec.d1,
        spec.d2,
        spec.separation,
        spec.modality_noise,
        spec.seed,
    )?;
    save_matrix_csv(&ds.visual, &out_dir.join("visual.csv"))?;
    save_matrix_csv(&ds.tactile, &out_dir.join("tactile.csv"))?;
    save_labels(&ds.labels, &out_dir.join("labels.csv"))?;

    let manifest = SynthManifest {
        format: SYNTH_FORMAT.to_string(),
        k: spec.k,
        per_cluster: spec.per_cluster,
        d1: spec.d1,
        d2: spec.d2,
        separation: spec.separation,
        modality_noise: spec.modality_noise,
        seed: spec.seed,
        visual: "visual.csv".to_string(),
        tactile: "tactile.csv".to_string(),
        labels: "labels.csv".to_string(),
    };
    let path = out_dir.join("synth_manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Regenerates a dataset from an existing synth manifest into `out_dir`.
pub fn cmd_synth_replay(manifest_path: &Path, out_dir: &Path) -> Result<PathBuf> {
    let m = SynthManifest::load(manifest_path)?;
    cmd_synth(
        &SynthSpec {
            k: m.k,
            per_cluster: m.per_cluster,
            d1: m.d1,
            d2: m.d2,
            separation: m.separation,
            modality_noise: m.modality_noise,
            seed: m.seed,
        },
        out_dir,
    )
}

/// Deterministic metrics document; deliberately carries no timing so two
/// identical runs serialize byte-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub format: String,
    pub acc: f64,
    pub nmi: f64,
    pub epochs_run: usize,
    pub generator_steps: u64,
    pub discriminator_steps: u64,
    pub missing_rate: f64,
    pub seed: u64,
    pub dataset: DatasetSource,
    pub config: TrainConfig,
}

pub struct TrainOutputs {
    pub report: TrainReport,
    pub metrics_path: PathBuf,
    pub predictions_path: PathBuf,
    pub trace_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Runs one training job described by a run manifest and writes
/// predictions, the loss trace, the metrics document, and the manifest
/// echo into `out_dir`.
pub fn cmd_train(
    spec: &RunManifest,
    out_dir: &Path,
    checkpoint_every: Option<usize>,
    resume_from: Option<&Path>,
) -> Result<TrainOutputs> {
    std::fs::create_dir_all(out_dir)?;
    let dataset = spec.dataset.load()?;
    let mask = make_mask(dataset.n(), spec.missing_rate, spec.seed)?;

    let mut cfg = spec.config.clone();
    cfg.seed = spec.seed;

    let ckpt_dir = out_dir.to_path_buf();
    let mut on_epoch = |t: &Trainer| -> Result<()> {
        if let Some(every) = checkpoint_every {
            if every > 0 && t.epoch() % every == 0 {
                t.save_checkpoint(&ckpt_dir.join(format!("checkpoint_epoch{:04}.ckpt", t.epoch())))?;
            }
        }
        Ok(())
    };

    let report = match resume_from {
        Some(path) => {
            let mut trainer = Trainer::resume(&dataset, &mask, path)?;
            trainer.run_to_completion(&mut on_epoch)?
        }
        None => Trainer::run_with_callback(&dataset, &mask, cfg, on_epoch)?,
    };

    let manifest_path = out_dir.join("run_manifest.json");
    spec.save(&manifest_path)?;

    let predictions_path = out_dir.join("predictions.csv");
    save_labels(&report.predictions, &predictions_path)?;

    let trace_path = out_dir.join("loss_trace.csv");
    write_loss_trace(&report.losses, &trace_path)?;

    let metrics = MetricsDoc {
        format: METRICS_FORMAT.to_string(),
        acc: report.acc,
        nmi: report.nmi,
        epochs_run: report.epochs_run,
        generator_steps: report.generator_steps,
        discriminator_steps: report.discriminator_steps,
        missing_rate: spec.missing_rate,
        seed: spec.seed,
        dataset: spec.dataset.clone(),
        config: report.config.clone(),
    };
    let metrics_path = out_dir.join("metrics.json");
    write_metrics(&metrics, &metrics_path)?;

    Ok(TrainOutputs {
        report,
        metrics_path,
        predictions_path,
        trace_path,
        manifest_path,
    })
}

pub fn write_metrics(doc: &MetricsDoc, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::param(format!("metrics serialization: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn write_loss_trace(losses: &[EpochLosses], path: &Path) -> Result<()> {
    let mut out = String::from("epoch");
    for name in EpochLosses::NAMES {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (epoch, l) in losses.iter().enumerate() {
        let _ = write!(out, "{}", epoch + 1);
        for v in l.values() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a one-integer-per-line labels/predictions file.
pub fn read_label_file(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (r, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t.parse().map_err(|_| Error::Parse {
            row: r + 1,
            col: 1,
            msg: format!("not an integer: {t:?}"),
        })?;
        if v < 0 {
            return Err(Error::Label {
                row: r + 1,
                value: v,
                k: 0,
            });
        }
        labels.push(v as usize);
    }
    if labels.is_empty() {
        return Err(Error::param(format!("{} contains no labels", path.display())));
    }
    Ok(labels)
}

/// Scores a predictions file against a labels file.
pub fn cmd_eval(predictions_path: &Path, labels_path: &Path) -> Result<(f64, f64)> {
    let pred = read_label_file(predictions_path)?;
    let truth = read_label_file(labels_path)?;
    Ok((accuracy(&truth, &pred)?, nmi(&truth, &pred)?))
}

/// A sweep condition: the full model, an ablation, or a raw-feature
/// k-means baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Full,
    NoGan,
    NoFusionKl,
    KmeansVisual,
    KmeansTactile,
    KmeansConcat,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::Full => "full",
            Condition::NoGan => "no-gan",
            Condition::NoFusionKl => "no-fusion-kl",
            Condition::KmeansVisual => "kmeans-visual",
            Condition::KmeansTactile => "kmeans-tactile",
            Condition::KmeansConcat => "kmeans-concat",
        }
    }

    pub fn parse_ablation(name: &str) -> Result<Condition> {
        match name.trim() {
            "gan" => Ok(Condition::NoGan),
            "fusion-kl" => Ok(Condition::NoFusionKl),
            other => Err(Error::param(format!(
                "unknown ablation {other:?}; expected gan or fusion-kl"
            ))),
        }
    }
}

/// One row of the tidy sweep results table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub run_id: String,
    pub mr: f64,
    pub seed: u64,
    pub condition: &'static str,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub epochs_run: usize,
    pub wall_clock_s: f64,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub conditions: Vec<Condition>,
    pub config: TrainConfig,
}

/// Aggregate of one (missing rate, condition) cell.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub mr: f64,
    pub condition: &'static str,
    pub runs: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
}

/// Runs the full cross product (rate x seed x condition) in parallel.
/// Failures are recorded in the row's status and do not stop the sweep.
pub fn run_sweep(dataset: &PairedDataset, spec: &SweepSpec) -> Vec<SweepRow> {
    let mut jobs = Vec::new();
    for &mr in &spec.rates {
        for &seed in &spec.seeds {
            for &cond in &spec.conditions {
                jobs.push((mr, seed, cond));
            }
        }
    }
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(mr, seed, cond)| sweep_one(dataset, &spec.config, mr, seed, cond))
        .collect();
    rows.sort_by(|a, b| {
        a.mr.partial_cmp(&b.mr)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
            .then(a.condition.cmp(b.condition))
    });
    rows
}

fn sweep_one(
    dataset: &PairedDataset,
    base: &TrainConfig,
    mr: f64,
    seed: u64,
    cond: Condition,
) -> SweepRow {
    let started = Instant::now();
    let run_id = format!("mr{mr}_seed{seed}_{}", cond.label());
    let result = (|| -> Result<(f64, f64, usize)> {
        let mask = make_mask(dataset.n(), mr, seed)?;
        match cond {
            Condition::KmeansVisual | Condition::KmeansTactile | Condition::KmeansConcat => {
                let pred = match cond {
                    Condition::KmeansVisual => {
                        baselines::masked_single_modality_kmeans(dataset, &mask, 0, seed)?
                    }
                    Condition::KmeansTactile => {
                        baselines::masked_single_modality_kmeans(dataset, &mask, 1, seed)?
                    }
                    _ => baselines::masked_concat_kmeans(dataset, &mask, seed)?,
                };
                Ok((accuracy(&dataset.labels, &pred)?, nmi(&dataset.labels, &pred)?, 0))
            }
            _ => {
                let mut cfg = base.clone();
                cfg.seed = seed;
                cfg.disable_gan = cond == Condition::NoGan;
                cfg.disable_fusion_kl = cond == Condition::NoFusionKl;
                let report = Trainer::run(dataset, &mask, cfg)?;
                Ok((report.acc, report.nmi, report.epochs_run))
            }
        }
    })();

    let wall = started.elapsed().as_secs_f64();
    match result {
        Ok((acc, nmi, epochs)) => SweepRow {
            run_id,
            mr,
            seed,
            condition: cond.label(),
            acc: Some(acc),
            nmi: Some(nmi),
            epochs_run: epochs,
            wall_clock_s: wall,
            status: "ok".to_string(),
        },
        Err(e) => SweepRow {
            run_id,
            mr,
            seed,
            condition: cond.label(),
            acc: None,
            nmi: None,
            epochs_run: 0,
            wall_clock_s: wall,
            status: format!("error: {e}"),
        },
    }
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut cells: Vec<(f64, &'static str)> = rows
        .iter()
        .filter(|r| r.status == "ok")
        .map(|r| (r.mr, r.condition))
        .collect();
    cells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    cells.dedup();

    cells
        .into_iter()
        .map(|(mr, cond)| {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.mr == mr && r.condition == cond && r.status == "ok")
                .filter_map(|r| r.acc)
                .collect();
            let nmis: Vec<f64> = rows
                .iter()
                .filter(|r| r.mr == mr && r.condition == cond && r.status == "ok")
                .filter_map(|r| r.nmi)
                .collect();
            let (acc_mean, acc_std) = mean_std(&accs);
            let (nmi_mean, nmi_std) = mean_std(&nmis);
            SweepSummary {
                mr,
                condition: cond,
                runs: accs.len(),
                acc_mean,
                acc_std,
                nmi_mean,
                nmi_std,
            }
        })
        .collect()
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Writes results.csv, summary.csv, and the two mean-metric plots.
pub fn write_sweep_outputs(rows: &[SweepRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut csv = String::from("run_id,mr,seed,condition,acc,nmi,epochs_run,wall_clock_s,status\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{:.3},{}",
            r.run_id,
            r.mr,
            r.seed,
            r.condition,
            r.acc.map_or(String::new(), |v| v.to_string()),
            r.nmi.map_or(String::new(), |v| v.to_string()),
            r.epochs_run,
            r.wall_clock_s,
            r.status.replace(',', ";")
        );
    }
    let results_path = out_dir.join("results.csv");
    std::fs::write(&results_path, csv)?;
    written.push(results_path);

    let summaries = summarize(rows);
    let mut csv =
        String::from("mr,condition,runs,acc_mean,acc_std,nmi_mean,nmi_std\n");
    for s in &summaries {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            s.mr, s.condition, s.runs, s.acc_mean, s.acc_std, s.nmi_mean, s.nmi_std
        );
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, csv)?;
    written.push(summary_path);

    for (metric, file, title) in [
        ("acc", "acc_vs_mr.svg", "Mean ACC vs missing rate"),
        ("nmi", "nmi_vs_mr.svg", "Mean NMI vs missing rate"),
    ] {
        let mut conditions: Vec<&'static str> = Vec::new();
        for s in &summaries {
            if !conditions.contains(&s.condition) {
                conditions.push(s.condition);
            }
        }
        let series: Vec<Series> = conditions
            .iter()
            .map(|&cond| {
                let mut pts: Vec<(f64, f64, f64)> = summaries
                    .iter()
                    .filter(|s| s.condition == cond)
                    .map(|s| {
                        if metric == "acc" {
                            (s.mr, s.acc_mean, s.acc_std)
                        } else {
                            (s.mr, s.nmi_mean, s.nmi_std)
                        }
                    })
                    .collect();
                pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                Series {
                    name: cond.to_string(),
                    points: pts.iter().map(|&(x, y, _)| (x, y)).collect(),
                    err: Some(pts.iter().map(|&(_, _, e)| e).collect()),
                }
            })
            .collect();
        let path = out_dir.join(file);
        line_chart(title, "missing rate", metric, &series, &path)?;
        written.push(path);
    }

    Ok(written)
}
