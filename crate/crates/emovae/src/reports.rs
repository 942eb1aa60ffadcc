//! Report artifacts: a JSON document with the full config echo, CSV metric
//! tables, prediction dumps and a markdown summary laid out like the
//! published accuracy and F-measure tables.
//!
//! Nothing here reads a clock or a path outside the output directory, so
//! identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use emovae_core::models::ModelKind;
use serde::Serialize;

use crate::config::RunConfig;
use crate::experiment::{ExperimentReport, SweepRow, Task};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RunReport<'a> {
    pub build: &'static str,
    pub command: &'static str,
    pub task: Task,
    pub config: &'a RunConfig,
    pub experiments: &'a [ExperimentReport],
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport<'a> {
    pub build: &'static str,
    pub command: &'static str,
    pub task: Task,
    pub config: &'a RunConfig,
    pub rows: &'a [SweepRow],
    pub experiments: &'a [ExperimentReport],
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

/// `model,task,target,seed,wa,ua,macro_f1,chance_macro_f1`, one row per
/// seed followed by a `mean` row for each target.
pub fn metrics_csv(experiments: &[ExperimentReport]) -> String {
    let mut out = String::from("model,task,target,seed,wa,ua,macro_f1,chance_macro_f1\n");
    for e in experiments {
        for t in &e.targets {
            let prefix = format!("{},{},{}", e.model_kind.name(), e.task.name(), t.name);
            for s in &t.per_seed {
                let m = &s.metrics;
                let _ = writeln!(
                    out,
                    "{prefix},{},{:.6},{:.6},{:.6},{:.6}",
                    s.seed, m.wa, m.ua, m.macro_f1, s.chance_macro_f1
                );
            }
            let m = &t.mean;
            let _ = writeln!(
                out,
                "{prefix},mean,{:.6},{:.6},{:.6},{:.6}",
                m.wa, m.ua, m.macro_f1, m.chance_macro_f1
            );
        }
    }
    out
}

/// `utterance_id,true,predicted,p_0..p_{n-1}` for one target and seed.
pub fn predictions_csv(report: &ExperimentReport, target: usize, seed_index: usize) -> String {
    let n = report.targets[target].classes.len();
    let mut out = String::from("utterance_id,true,predicted");
    for c in 0..n {
        let _ = write!(out, ",p_{c}");
    }
    out.push('\n');
    for p in &report.predictions[target][seed_index].1 {
        let _ = write!(out, "{},{},{}", p.utterance_id, p.truth, p.predicted);
        for v in &p.probabilities {
            let _ = write!(out, ",{v:.6}");
        }
        out.push('\n');
    }
    out
}

/// Mean over seeds of one dialogue-kind breakdown, when every seed has it.
fn subset_mean(report: &ExperimentReport, subset: &str) -> Option<(f64, f64)> {
    let t = report.target("emotion")?;
    let mut wa = 0.0;
    let mut ua = 0.0;
    for s in &t.per_seed {
        let m = s.subsets.iter().find(|m| m.subset == subset)?;
        wa += m.wa;
        ua += m.ua;
    }
    let n = t.per_seed.len() as f64;
    Some((wa / n, ua / n))
}

fn model_label(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Ae => "AE-LSTM",
        ModelKind::Vae => "VAE-LSTM",
        ModelKind::Cvae => "CVAE-LSTM",
    }
}

fn categorical_table(experiments: &[ExperimentReport], out: &mut String) {
    out.push_str("## Accuracy (%)\n\n| Data |");
    for e in experiments {
        let _ = write!(
            out,
            " {} WA | {} UA |",
            model_label(e.model_kind),
            model_label(e.model_kind)
        );
    }
    out.push_str("\n|---|");
    for _ in experiments {
        out.push_str("---:|---:|");
    }
    out.push('\n');
    for (label, subset) in [
        ("Improvised", Some("improvised")),
        ("Scripted", Some("scripted")),
        ("Complete Data", None),
    ] {
        let _ = write!(out, "| {label} |");
        for e in experiments {
            let cell = match subset {
                Some(s) => subset_mean(e, s),
                None => e.target("emotion").map(|t| (t.mean.wa, t.mean.ua)),
            };
            match cell {
                Some((wa, ua)) => {
                    let _ = write!(out, " {} | {} |", pct(wa), pct(ua));
                }
                None => out.push_str(" – | – |"),
            }
        }
        out.push('\n');
    }
    out.push_str(
        "\nImprovised and Scripted rows split the pooled test predictions by dialogue kind; \
         models are trained on the complete data.\n",
    );
}

fn dimensional_table(experiments: &[ExperimentReport], out: &mut String) {
    out.push_str(
        "## F-measure (%)\n\n| Model | Arousal | Power | Valence | Mean |\n|---|---:|---:|---:|---:|\n",
    );
    let dims = ["arousal", "power", "valence"];
    let f1 = |e: &ExperimentReport, d: &str| e.target(d).map(|t| t.mean.macro_f1);
    for e in experiments {
        let _ = write!(out, "| {} |", model_label(e.model_kind));
        for d in dims {
            match f1(e, d) {
                Some(v) => {
                    let _ = write!(out, " {} |", pct(v));
                }
                None => out.push_str(" – |"),
            }
        }
        match e.mean_macro_f1 {
            Some(v) => {
                let _ = writeln!(out, " {} |", pct(v));
            }
            None => out.push_str(" – |\n"),
        }
    }
    if !experiments.is_empty() {
        out.push_str("| Chance (shuffled labels) |");
        let mut total = 0.0;
        for d in dims {
            let v = experiments
                .iter()
                .filter_map(|e| e.target(d).map(|t| t.mean.chance_macro_f1))
                .sum::<f64>()
                / experiments.len() as f64;
            total += v;
            let _ = write!(out, " {} |", pct(v));
        }
        let _ = writeln!(out, " {} |", pct(total / 3.0));
    }
    out.push_str("\nMean is the arithmetic mean of the three dimensions.\n");
}

fn header(out: &mut String, config: &RunConfig, experiments: &[ExperimentReport]) {
    let _ = writeln!(out, "Build: `{}`\n", crate::BUILD_ID);
    if let Some(e) = experiments.first() {
        let _ = writeln!(
            out,
            "Corpus: {} utterances ({} eligible, {} segments, {} skipped). Folds: {}. Seeds: {:?}.\n",
            e.corpus.n_utterances,
            e.corpus.n_eligible,
            e.corpus.n_segments,
            e.corpus.n_skipped,
            e.folds,
            e.seeds
        );
    }
    let _ = writeln!(
        out,
        "Latent size {}, features `{}`, autoencoder epochs {}, classifier max epochs {}.\n",
        config.model.latent_dim,
        config.model.feature_mode.name(),
        config.autoencoder.epochs,
        config.classifier.max_epochs
    );
}

pub fn run_markdown(task: Task, config: &RunConfig, experiments: &[ExperimentReport]) -> String {
    let mut out = format!("# {} emotion results\n\n", capitalize(task.name()));
    header(&mut out, config, experiments);
    match task {
        Task::Categorical => categorical_table(experiments, &mut out),
        Task::Dimensional => dimensional_table(experiments, &mut out),
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Writes `report.json`, `metrics.csv`, `report.md` and
/// `predictions/<model>_<target>_seed<s>.csv` under `dir`.
pub fn write_run_reports(
    dir: &Path,
    task: Task,
    config: &RunConfig,
    experiments: &[ExperimentReport],
) -> Result<()> {
    let report = RunReport {
        build: crate::BUILD_ID,
        command: "run",
        task,
        config,
        experiments,
    };
    write_file(&dir.join("report.json"), &to_json(&report))?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(experiments))?;
    write_file(&dir.join("report.md"), &run_markdown(task, config, experiments))?;
    write_predictions(&dir.join("predictions"), experiments)
}

fn write_predictions(dir: &Path, experiments: &[ExperimentReport]) -> Result<()> {
    for e in experiments {
        for (t, target) in e.targets.iter().enumerate() {
            for (s, (seed, _)) in e.predictions[t].iter().enumerate() {
                let name = format!("{}_{}_seed{seed}.csv", e.model_kind.name(), target.name);
                write_file(&dir.join(name), &predictions_csv(e, t, s))?;
            }
        }
    }
    Ok(())
}

/// `latent_dim,model,wa,ua` for the categorical task and
/// `latent_dim,model,mean_f1` for the dimensional one.
pub fn sweep_csv(task: Task, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    match task {
        Task::Categorical => {
            out.push_str("latent_dim,model,wa,ua\n");
            for r in rows {
                let _ = writeln!(out, "{},{},{:.6},{:.6}", r.latent_dim, r.model.name(), r.wa, r.ua);
            }
        }
        Task::Dimensional => {
            out.push_str("latent_dim,model,mean_f1\n");
            for r in rows {
                let _ = writeln!(out, "{},{},{:.6}", r.latent_dim, r.model.name(), r.mean_f1);
            }
        }
    }
    out
}

fn sweep_markdown(
    task: Task,
    config: &RunConfig,
    rows: &[SweepRow],
    experiments: &[ExperimentReport],
) -> String {
    let mut out = format!("# Latent size sweep ({})\n\n", task.name());
    header(&mut out, config, experiments);
    match task {
        Task::Categorical => {
            out.push_str("| Latent | Model | WA (%) | UA (%) |\n|---:|---|---:|---:|\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} |",
                    r.latent_dim,
                    model_label(r.model),
                    pct(r.wa),
                    pct(r.ua)
                );
            }
        }
        Task::Dimensional => {
            out.push_str("| Latent | Model | Mean F1 (%) |\n|---:|---|---:|\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} |",
                    r.latent_dim,
                    model_label(r.model),
                    pct(r.mean_f1)
                );
            }
        }
    }
    out
}

/// Writes `sweep.csv`, `sweep.json`, `sweep.md` and `metrics.csv` under `dir`.
pub fn write_sweep_reports(
    dir: &Path,
    task: Task,
    config: &RunConfig,
    rows: &[SweepRow],
    experiments: &[ExperimentReport],
) -> Result<()> {
    let report = SweepReport {
        build: crate::BUILD_ID,
        command: "sweep",
        task,
        config,
        rows,
        experiments,
    };
    write_file(&dir.join("sweep.json"), &to_json(&report))?;
    write_file(&dir.join("sweep.csv"), &sweep_csv(task, rows))?;
    write_file(
        &dir.join("sweep.md"),
        &sweep_markdown(task, config, rows, experiments),
    )?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(experiments))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(size: usize, ua: f64) -> SweepRow {
        SweepRow {
            latent_dim: size,
            model: ModelKind::Cvae,
            wa: ua + 0.01,
            ua,
            mean_f1: 0.5,
        }
    }

    #[test]
    fn sweep_csv_headers_are_exact() {
        let rows = [row(32, 0.5), row(64, 0.75)];
        let cat = sweep_csv(Task::Categorical, &rows);
        assert_eq!(
            cat,
            "latent_dim,model,wa,ua\n32,cvae,0.510000,0.500000\n64,cvae,0.760000,0.750000\n"
        );
        let dim = sweep_csv(Task::Dimensional, &rows);
        assert!(dim.starts_with("latent_dim,model,mean_f1\n32,cvae,0.500000\n"));
    }

    #[test]
    fn capitalize_first_letter() {
        assert_eq!(capitalize("dimensional"), "Dimensional");
        assert_eq!(capitalize(""), "");
    }
}
