use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emovae::config::RunConfig;
use emovae::experiment::{latent_sweep, run_experiment, train_representation, RunOptions, Task};
use emovae::features::Dataset;
use emovae::synth::{generate_synthetic_corpus, SynthConfig};
use emovae::{checkpoint, reports, Error, Result};
use emovae_core::gradcheck::{run_suite, GRADCHECK_TOLERANCE};
use emovae_core::models::ModelKind;

#[derive(Parser)]
#[command(name = "emovae", version = env!("CARGO_PKG_VERSION"))]
#[command(about = "LogMel + AE/VAE/CVAE + LSTM speech emotion recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the deterministic synthetic corpus (manifest + WAV files).
    SynthCorpus {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        utterances_per_speaker: usize,
    },
    /// Cache LogMel segments for every utterance in a manifest.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one representation model on every segment of a corpus.
    TrainRep {
        #[arg(long, value_parser = parse_kind)]
        kind: ModelKind,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated classification experiment.
    Run {
        #[arg(long, value_parser = parse_task)]
        task: Task,
        /// Comma-separated model kinds; defaults to the config's model.kind.
        #[arg(long, value_parser = parse_kind, value_delimiter = ',')]
        kind: Vec<ModelKind>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report_dir: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Repeat the experiment over several latent sizes.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
        sizes: Vec<usize>,
        #[arg(long, value_parser = parse_task, default_value = "categorical")]
        task: Task,
        #[arg(long, value_parser = parse_kind, value_delimiter = ',')]
        kind: Vec<ModelKind>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report_dir: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Finite-difference checks of every analytic gradient.
    Gradcheck,
}

fn parse_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse()
        .map_err(|_| format!("unknown model kind '{s}' (expected ae, vae or cvae)"))
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// The config with `--manifest` applied; fails when no manifest is known.
fn resolve(config: Option<&Path>, manifest: Option<PathBuf>) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = load_config(config)?;
    if manifest.is_some() {
        cfg.manifest = manifest;
    }
    let path = cfg.manifest.clone().ok_or_else(|| {
        Error::Config("no manifest: pass --manifest or set \"manifest\" in the config".into())
    })?;
    Ok((cfg, path))
}

fn load_dataset(cfg: &RunConfig, manifest: &Path) -> Result<Dataset> {
    let ds = Dataset::from_manifest(manifest, &cfg.logmel)?;
    if !ds.skipped.is_empty() {
        eprintln!("skipped {} utterances shorter than one segment", ds.skipped.len());
    }
    Ok(ds)
}

fn kinds_or_default(kinds: Vec<ModelKind>, cfg: &RunConfig) -> Vec<ModelKind> {
    if kinds.is_empty() {
        vec![cfg.model.kind]
    } else {
        kinds
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::SynthCorpus {
            seed,
            out,
            utterances_per_speaker,
        } => {
            let cfg = SynthConfig {
                seed,
                utterances_per_speaker,
                ..SynthConfig::default()
            };
            cfg.validate()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n";
            write_text(&out.join("config.json"), &text)?;
            let corpus = generate_synthetic_corpus(&cfg, &out)?;
            println!("wrote {} utterances to {}", corpus.records.len(), out.display());
        }
        Command::Extract {
            manifest,
            config,
            out,
        } => {
            let (cfg, manifest) = resolve(config.as_deref(), manifest)?;
            cfg.echo(&out)?;
            let ds = load_dataset(&cfg, &manifest)?;
            let path = out.join("segments.emv");
            ds.to_container()?.write(&path)?;
            println!(
                "wrote {} utterances, {} segments to {}",
                ds.len(),
                ds.n_segments(),
                path.display()
            );
        }
        Command::TrainRep {
            kind,
            manifest,
            config,
            out,
        } => {
            let (cfg, manifest) = resolve(config.as_deref(), manifest)?;
            let cfg = cfg.with_kind(kind);
            cfg.validate()?;
            cfg.echo(&out)?;
            let ds = load_dataset(&cfg, &manifest)?;
            let seed = cfg.evaluation.seeds[0];
            let (model, standardizer, history) = train_representation(&ds, &cfg, kind, seed)?;
            let meta = serde_json::json!({ "seed": seed, "n_segments": ds.n_segments() });
            checkpoint::autoencoder_container(&model, Some(&standardizer), meta)?
                .write(&out.join("autoencoder.emv"))?;
            let mut csv = String::from("epoch,total,recon,kl\n");
            for (i, e) in history.epochs.iter().enumerate() {
                csv.push_str(&format!("{},{},{},{}\n", i + 1, e.total, e.recon, e.kl));
            }
            write_text(&out.join("loss_history.csv"), &csv)?;
            if let Some(last) = history.epochs.last() {
                println!(
                    "{}: {} epochs, final loss {:.4} (recon {:.4}, kl {:.4})",
                    kind.name(),
                    history.epochs.len(),
                    last.total,
                    last.recon,
                    last.kl
                );
            }
        }
        Command::Run {
            task,
            kind,
            config,
            report_dir,
            manifest,
            jobs,
        } => {
            let (cfg, manifest) = resolve(config.as_deref(), manifest)?;
            cfg.echo(&report_dir)?;
            let ds = load_dataset(&cfg, &manifest)?;
            let opts = RunOptions {
                jobs,
                checkpoint_dir: Some(report_dir.join("checkpoints")),
                verbose: true,
            };
            let mut experiments = Vec::new();
            for k in kinds_or_default(kind, &cfg) {
                let report = run_experiment(&ds, &cfg, task, k, &opts)?;
                for t in &report.targets {
                    println!(
                        "{} {}: WA {:.4} UA {:.4} macro F1 {:.4} (chance F1 {:.4})",
                        k.name(),
                        t.name,
                        t.mean.wa,
                        t.mean.ua,
                        t.mean.macro_f1,
                        t.mean.chance_macro_f1
                    );
                }
                if let Some(m) = report.mean_macro_f1 {
                    println!("{} mean F1 {:.4}", k.name(), m);
                }
                experiments.push(report);
            }
            reports::write_run_reports(&report_dir, task, &cfg, &experiments)?;
        }
        Command::Sweep {
            sizes,
            task,
            kind,
            config,
            report_dir,
            manifest,
            jobs,
        } => {
            let (cfg, manifest) = resolve(config.as_deref(), manifest)?;
            if sizes.contains(&0) {
                return Err(Error::Config("latent sizes must be positive".into()));
            }
            cfg.echo(&report_dir)?;
            let ds = load_dataset(&cfg, &manifest)?;
            let opts = RunOptions {
                jobs,
                checkpoint_dir: Some(report_dir.join("checkpoints")),
                verbose: true,
            };
            let kinds = kinds_or_default(kind, &cfg);
            let (rows, experiments) = latent_sweep(&ds, &cfg, task, &kinds, &sizes, &opts)?;
            print!("{}", reports::sweep_csv(task, &rows));
            reports::write_sweep_reports(&report_dir, task, &cfg, &rows, &experiments)?;
        }
        Command::Gradcheck => {
            let cases = run_suite(GRADCHECK_PER_FAMILY, 0)?;
            let mut failed = 0;
            for c in &cases {
                let ok = c.passed();
                if !ok {
                    failed += 1;
                }
                println!(
                    "{} {:<5} {:.3e} params {:>4} {}",
                    if ok { "ok  " } else { "FAIL" },
                    c.family,
                    c.max_relative_error,
                    c.parameter_count,
                    c.description
                );
            }
            println!(
                "{} configurations, {failed} failed (tolerance {GRADCHECK_TOLERANCE:e})",
                cases.len()
            );
            if failed > 0 {
                return Err(Error::Core(emovae_core::Error::Validation(format!(
                    "{failed} gradient checks exceeded the tolerance"
                ))));
            }
        }
    }
    Ok(())
}

const GRADCHECK_PER_FAMILY: usize = 25;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
