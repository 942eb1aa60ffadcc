//! Cross-validated AE/VAE/CVAE → LSTM experiments and the latent-size
//! sweep.
//!
//! Every (seed, fold) pair is an independent job with its own named RNG
//! streams, so results do not depend on `jobs` or on scheduling order.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use emovae_core::classifier::{argmax, ClassifierSpec, LstmClassifier, SequenceExample, TrainHistory};
use emovae_core::corpus::{
    bin_dimensional, holdout_split, make_folds, map_categorical, DialogueKind, Dimension, EmotionClass, Fold,
    FoldPlan, LabelMap, UtteranceRecord,
};
use emovae_core::dsp::Standardizer;
use emovae_core::metrics::{f_measure, fraction_to_f64, ConfusionMatrix, MetricSummary};
use emovae_core::models::{Autoencoder, Conditioning, FitHistory, LossComponents, ModelKind};
use emovae_core::numeric::{Matrix, RngStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::checkpoint::{autoencoder_container, classifier_container};
use crate::config::{CvaeTrainFeatures, RunConfig};
use crate::features::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Categorical,
    Dimensional,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Categorical => "categorical",
            Task::Dimensional => "dimensional",
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "categorical" => Ok(Task::Categorical),
            "dimensional" => Ok(Task::Dimensional),
            other => Err(Error::Config(format!(
                "unknown task '{other}' (expected categorical or dimensional)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for fold-level parallelism; 0 and 1 both mean serial.
    pub jobs: usize,
    /// Where per-fold checkpoints go when `evaluation.save_checkpoints` is on.
    pub checkpoint_dir: Option<PathBuf>,
    /// Per-fold progress lines on stderr.
    pub verbose: bool,
}

/// One classification target: the emotion class, or one binned dimension.
#[derive(Debug, Clone)]
struct Target {
    name: &'static str,
    classes: Vec<String>,
    labels: Vec<usize>,
}

/// The eligible part of a dataset with its labels and fold plan.
struct Prepared<'a> {
    records: Vec<&'a UtteranceRecord>,
    segments: Vec<&'a Matrix>,
    /// Categorical class used to condition the CVAE, when known.
    condition: Vec<Option<usize>>,
    targets: Vec<Target>,
    plan: FoldPlan,
}

fn prepare<'a>(ds: &'a Dataset, task: Task, cfg: &RunConfig) -> Result<Prepared<'a>> {
    let lm = LabelMap::default();
    let eligible: Vec<usize> = (0..ds.len())
        .filter(|&i| {
            let r = &ds.records[i];
            cfg.evaluation.subset.admits(r.dialogue_kind)
                && (task == Task::Dimensional || map_categorical(&r.categorical_raw, &lm).is_some())
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::Config(format!(
            "no utterances are eligible for the {} task",
            task.name()
        )));
    }
    let records: Vec<&UtteranceRecord> = eligible.iter().map(|&i| &ds.records[i]).collect();
    let segments = eligible.iter().map(|&i| &ds.segments[i]).collect();
    let condition: Vec<Option<usize>> = records
        .iter()
        .map(|r| map_categorical(&r.categorical_raw, &lm).map(EmotionClass::index))
        .collect();
    let targets = match task {
        Task::Categorical => vec![Target {
            name: "emotion",
            classes: EmotionClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            labels: condition.iter().map(|c| c.expect("eligible")).collect(),
        }],
        Task::Dimensional => Dimension::ALL
            .iter()
            .map(|&d| {
                let labels = records
                    .iter()
                    .map(|r| Ok(bin_dimensional(r.dimension(d))?.index()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Target {
                    name: d.name(),
                    classes: ["low", "mid", "high"].map(String::from).to_vec(),
                    labels,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let scheme = match task {
        Task::Categorical => cfg.evaluation.categorical_folds,
        Task::Dimensional => cfg.evaluation.dimensional_folds,
    };
    let owned: Vec<UtteranceRecord> = records.iter().map(|r| (*r).clone()).collect();
    let plan = make_folds(&owned, scheme)?;
    Ok(Prepared {
        records,
        segments,
        condition,
        targets,
        plan,
    })
}

fn stack(parts: &[&Matrix]) -> Result<Matrix> {
    let rows: Vec<&[f64]> = parts
        .iter()
        .flat_map(|m| (0..m.rows()).map(move |r| m.row(r)))
        .collect();
    Ok(Matrix::from_rows(&rows)?)
}

fn standardized(m: &Matrix, s: &Standardizer) -> Result<Matrix> {
    let mut out = m.clone();
    s.transform_inplace(&mut out)?;
    Ok(out)
}

/// Trains a representation model on standardized segments. CVAE training
/// uses only utterances with a known categorical class.
fn fit_autoencoder(
    cfg: &RunConfig,
    kind: ModelKind,
    segments: &[Matrix],
    condition: &[Option<usize>],
    rng: &RngStream,
) -> Result<(Autoencoder, FitHistory)> {
    let spec = cfg.encoder_spec(kind, EmotionClass::COUNT);
    let mut model = Autoencoder::new(spec, &rng.fork_named("ae.init"))?;
    let (parts, labels): (Vec<&Matrix>, Vec<usize>) = if kind == ModelKind::Cvae {
        let mut parts = Vec::new();
        let mut labels = Vec::new();
        for (m, c) in segments.iter().zip(condition) {
            if let Some(c) = c {
                parts.push(m);
                labels.extend(std::iter::repeat_n(*c, m.rows()));
            }
        }
        (parts, labels)
    } else {
        (segments.iter().collect(), Vec::new())
    };
    if parts.is_empty() {
        return Err(Error::Config(
            "no labelled training utterances for the cvae".into(),
        ));
    }
    let x = stack(&parts)?;
    let mut adam = cfg.autoencoder.adam;
    let history = model.fit(
        &x,
        (kind == ModelKind::Cvae).then_some(labels.as_slice()),
        &cfg.autoencoder.fit_config(),
        &mut rng.fork_named("ae.fit"),
        &mut adam,
    )?;
    Ok((model, history))
}

/// A representation model fitted on every segment of `ds`, for `train-rep`.
pub fn train_representation(
    ds: &Dataset,
    cfg: &RunConfig,
    kind: ModelKind,
    seed: u64,
) -> Result<(Autoencoder, Standardizer, FitHistory)> {
    if ds.is_empty() {
        return Err(Error::Config("dataset has no utterances".into()));
    }
    let lm = LabelMap::default();
    let condition: Vec<Option<usize>> = ds
        .records
        .iter()
        .map(|r| map_categorical(&r.categorical_raw, &lm).map(EmotionClass::index))
        .collect();
    let refs: Vec<&Matrix> = ds.segments.iter().collect();
    let standardizer = Standardizer::fit(&stack(&refs)?)?;
    let segments = ds
        .segments
        .iter()
        .map(|m| standardized(m, &standardizer))
        .collect::<Result<Vec<_>>>()?;
    let (model, history) = fit_autoencoder(cfg, kind, &segments, &condition, &RngStream::new(seed))?;
    Ok((model, standardizer, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFit {
    pub target: String,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

impl ClassifierFit {
    fn new(target: &str, h: &TrainHistory) -> Self {
        ClassifierFit {
            target: target.to_string(),
            epochs_run: h.train_loss.len(),
            best_epoch: h.best_epoch,
            stopped_early: h.stopped_early,
            train_loss: h.train_loss.clone(),
            val_loss: h.val_loss.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub seed: u64,
    pub fold: usize,
    pub session: Option<u32>,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub n_train_segments: usize,
    pub autoencoder_loss: Vec<LossComponents>,
    pub classifiers: Vec<ClassifierFit>,
    /// One matrix per target, `[true][predicted]`.
    pub confusion: Vec<ConfusionMatrix>,
}

/// One test prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub utterance_id: String,
    pub truth: usize,
    pub predicted: usize,
    pub probabilities: Vec<f64>,
}

struct FoldOutput {
    report: FoldReport,
    /// Per target, `(eligible index, predicted, probabilities)` in test order.
    predictions: Vec<Vec<(usize, usize, Vec<f64>)>>,
}

struct FoldJob<'a> {
    prep: &'a Prepared<'a>,
    cfg: &'a RunConfig,
    kind: ModelKind,
    task: Task,
    checkpoint_dir: Option<&'a Path>,
}

impl FoldJob<'_> {
    fn features(
        &self,
        model: &Autoencoder,
        segments: &Matrix,
        condition: Option<usize>,
        is_train: bool,
        rng: &mut RngStream,
    ) -> Result<Matrix> {
        let labels;
        let cond = match (self.kind, condition) {
            (ModelKind::Cvae, Some(c))
                if is_train && self.cfg.autoencoder.cvae_train_features == CvaeTrainFeatures::TrueLabel =>
            {
                labels = vec![c; segments.rows()];
                Conditioning::Labels(&labels)
            }
            (ModelKind::Cvae, _) => Conditioning::Marginal,
            _ => Conditioning::None,
        };
        Ok(model.extract_batch(segments, cond, self.cfg.model.feature_mode, rng)?)
    }

    fn run(&self, seed: u64, fold_index: usize, fold: &Fold) -> Result<FoldOutput> {
        let prep = self.prep;
        let cfg = self.cfg;
        let rng = RngStream::new(seed).fork_named(&format!("fold/{fold_index}"));

        let train_raw: Vec<&Matrix> = fold.train.iter().map(|&i| prep.segments[i]).collect();
        let input_std = Standardizer::fit(&stack(&train_raw)?)?;
        let std_of = |i: usize| standardized(prep.segments[i], &input_std);
        let train_segs = fold
            .train
            .iter()
            .map(|&i| std_of(i))
            .collect::<Result<Vec<_>>>()?;
        let train_cond: Vec<Option<usize>> = fold.train.iter().map(|&i| prep.condition[i]).collect();
        let (ae, ae_history) = fit_autoencoder(cfg, self.kind, &train_segs, &train_cond, &rng)?;

        let mut feat_rng = rng.fork_named("features");
        let mut train_feats = Vec::with_capacity(fold.train.len());
        for (m, c) in train_segs.iter().zip(&train_cond) {
            train_feats.push(self.features(&ae, m, *c, true, &mut feat_rng)?);
        }
        let mut test_feats = Vec::with_capacity(fold.test.len());
        for &i in &fold.test {
            test_feats.push(self.features(&ae, &std_of(i)?, prep.condition[i], false, &mut feat_rng)?);
        }
        let feat_std = if cfg.classifier.standardize_features {
            let refs: Vec<&Matrix> = train_feats.iter().collect();
            let s = Standardizer::fit(&stack(&refs)?)?;
            for m in train_feats.iter_mut().chain(test_feats.iter_mut()) {
                s.transform_inplace(m)?;
            }
            Some(s)
        } else {
            None
        };

        let n_train = fold.train.len();
        let (inner, val) = if cfg.classifier.validation_fraction > 0.0 && n_train >= 2 {
            holdout_split(
                n_train,
                1.0 - cfg.classifier.validation_fraction,
                &mut rng.fork_named("validation"),
            )
        } else {
            ((0..n_train).collect(), Vec::new())
        };

        let fold_dir = self.checkpoint_dir.map(|d| {
            d.join(self.kind.name())
                .join(format!("seed{seed}"))
                .join(format!("fold{fold_index:02}"))
        });
        let ckpt_meta = json!({
            "task": self.task,
            "seed": seed,
            "fold": fold_index,
            "session": fold.session,
        });
        if let Some(dir) = &fold_dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            autoencoder_container(&ae, Some(&input_std), ckpt_meta.clone())?
                .write(&dir.join("autoencoder.emv"))?;
        }

        let feature_dim = train_feats.first().map_or(0, Matrix::cols);
        let mut classifiers = Vec::new();
        let mut confusion = Vec::new();
        let mut predictions = Vec::new();
        for target in &prep.targets {
            let example = |pos: usize, m: &Matrix, label: usize| SequenceExample {
                utterance_id: prep.records[pos].id.clone(),
                features: m.clone(),
                label,
            };
            let train_ex = |subset: &[usize]| -> Vec<SequenceExample> {
                subset
                    .iter()
                    .map(|&k| {
                        let pos = fold.train[k];
                        example(pos, &train_feats[k], target.labels[pos])
                    })
                    .collect()
            };
            let spec = ClassifierSpec {
                input_dim: feature_dim,
                lstm_hidden: cfg.classifier.lstm_hidden,
                n_classes: target.classes.len(),
                readout: cfg.classifier.readout,
            };
            let mut clf =
                LstmClassifier::new(spec, &rng.fork_named(&format!("classifier.{}.init", target.name)))?;
            let history = clf.fit(
                &train_ex(&inner),
                &train_ex(&val),
                &cfg.classifier.train_config(),
                &mut rng.fork_named(&format!("classifier.{}.fit", target.name)),
            )?;
            let test_ex: Vec<SequenceExample> = fold
                .test
                .iter()
                .zip(&test_feats)
                .map(|(&pos, m)| example(pos, m, target.labels[pos]))
                .collect();
            let refs: Vec<&SequenceExample> = test_ex.iter().collect();
            let probs = clf.predict_proba(&refs)?;
            let mut cm = ConfusionMatrix::new(target.classes.len());
            let mut rows = Vec::with_capacity(probs.len());
            for (&pos, p) in fold.test.iter().zip(probs) {
                let predicted = argmax(&p);
                cm.record(target.labels[pos], predicted)?;
                rows.push((pos, predicted, p));
            }
            if let Some(dir) = &fold_dir {
                let mut meta = ckpt_meta.clone();
                meta["target"] = json!(target.name);
                classifier_container(&clf, feat_std.as_ref(), meta)?
                    .write(&dir.join(format!("classifier_{}.emv", target.name)))?;
            }
            classifiers.push(ClassifierFit::new(target.name, &history));
            confusion.push(cm);
            predictions.push(rows);
        }
        Ok(FoldOutput {
            report: FoldReport {
                seed,
                fold: fold_index,
                session: fold.session,
                n_train,
                n_validation: val.len(),
                n_test: fold.test.len(),
                n_train_segments: train_segs.iter().map(Matrix::rows).sum(),
                autoencoder_loss: ae_history.epochs,
                classifiers,
                confusion,
            },
            predictions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub subset: String,
    pub n: usize,
    pub wa: f64,
    pub ua: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Sum of the fold matrices.
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSummary,
    /// Mean macro F1 of the pooled predictions against shuffled truth.
    pub chance_macro_f1: f64,
    /// Pooled predictions split by dialogue kind.
    pub subsets: Vec<SubsetMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub wa: f64,
    pub ua: f64,
    pub macro_f1: f64,
    pub chance_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub name: String,
    pub classes: Vec<String>,
    pub per_seed: Vec<SeedResult>,
    /// Arithmetic mean over seeds.
    pub mean: MeanMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_utterances: usize,
    pub n_eligible: usize,
    pub n_segments: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub task: Task,
    pub model_kind: ModelKind,
    pub latent_dim: usize,
    pub feature_mode: emovae_core::models::FeatureMode,
    pub seeds: Vec<u64>,
    pub folds: String,
    pub corpus: CorpusSummary,
    pub targets: Vec<TargetReport>,
    /// Dimensional task: mean of the per-dimension macro F1 scores.
    pub mean_macro_f1: Option<f64>,
    pub fold_reports: Vec<FoldReport>,
    /// Per target, per seed, in utterance order.
    #[serde(skip)]
    pub predictions: Vec<Vec<(u64, Vec<Prediction>)>>,
}

impl ExperimentReport {
    pub fn target(&self, name: &str) -> Option<&TargetReport> {
        self.targets.iter().find(|t| t.name == name)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean macro F1 of `predicted` against `permutations` shuffles of `truth`.
pub fn chance_macro_f1(
    n_classes: usize,
    truth: &[usize],
    predicted: &[usize],
    permutations: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if permutations == 0 {
        return Ok(0.0);
    }
    let mut shuffled = truth.to_vec();
    let mut total = 0.0;
    for _ in 0..permutations {
        rng.shuffle(&mut shuffled);
        let cm = ConfusionMatrix::from_predictions(n_classes, &shuffled, predicted)?;
        total += fraction_to_f64(&f_measure(&cm)?.macro_f1);
    }
    Ok(total / permutations as f64)
}

/// Runs the full cross-validated pipeline for one model kind.
pub fn run_experiment(
    ds: &Dataset,
    cfg: &RunConfig,
    task: Task,
    kind: ModelKind,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let cfg = cfg.with_kind(kind);
    cfg.validate()?;
    let prep = prepare(ds, task, &cfg)?;
    let checkpoint_dir = opts
        .checkpoint_dir
        .as_deref()
        .filter(|_| cfg.evaluation.save_checkpoints);
    let job = FoldJob {
        prep: &prep,
        cfg: &cfg,
        kind,
        task,
        checkpoint_dir,
    };
    let work: Vec<(u64, usize)> = cfg
        .evaluation
        .seeds
        .iter()
        .flat_map(|&s| (0..prep.plan.folds.len()).map(move |f| (s, f)))
        .collect();
    let run_one = |&(seed, f): &(u64, usize)| {
        let out = job
            .run(seed, f, &prep.plan.folds[f])
            .map_err(|e| e.context(format!("{} seed {seed} fold {f}", kind.name())));
        if opts.verbose {
            if let Ok(o) = &out {
                let accs: Vec<String> = o
                    .report
                    .confusion
                    .iter()
                    .map(|cm| format!("{:.3}", cm.trace() as f64 / cm.total().max(1) as f64))
                    .collect();
                eprintln!(
                    "[{}] seed {seed} fold {f}: {} test utterances, accuracy {}",
                    kind.name(),
                    o.report.n_test,
                    accs.join("/")
                );
            }
        }
        out
    };
    let outputs: Vec<Result<FoldOutput>> = if opts.jobs <= 1 {
        work.iter().map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| work.par_iter().map(run_one).collect())
    };
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    assemble(&prep, &cfg, task, kind, ds, outputs)
}

fn assemble(
    prep: &Prepared<'_>,
    cfg: &RunConfig,
    task: Task,
    kind: ModelKind,
    ds: &Dataset,
    outputs: Vec<FoldOutput>,
) -> Result<ExperimentReport> {
    let n_folds = prep.plan.folds.len();
    let mut targets = Vec::new();
    let mut all_predictions = Vec::new();
    for (t, target) in prep.targets.iter().enumerate() {
        let n_classes = target.classes.len();
        let mut per_seed = Vec::new();
        let mut target_predictions = Vec::new();
        for (s, &seed) in cfg.evaluation.seeds.iter().enumerate() {
            let folds = &outputs[s * n_folds..(s + 1) * n_folds];
            let mut summed = ConfusionMatrix::new(n_classes);
            let mut pooled: Vec<(usize, usize, Vec<f64>)> = Vec::new();
            for o in folds {
                summed.merge(&o.report.confusion[t])?;
                pooled.extend(o.predictions[t].iter().cloned());
            }
            pooled.sort_by_key(|p| p.0);
            let truth: Vec<usize> = pooled.iter().map(|p| target.labels[p.0]).collect();
            let predicted: Vec<usize> = pooled.iter().map(|p| p.1).collect();
            debug_assert_eq!(
                ConfusionMatrix::from_predictions(n_classes, &truth, &predicted)?,
                summed
            );
            let mut chance_rng = RngStream::new(seed).fork_named(&format!("chance/{}", target.name));
            let chance = chance_macro_f1(
                n_classes,
                &truth,
                &predicted,
                cfg.evaluation.chance_permutations,
                &mut chance_rng,
            )?;
            let mut subsets = Vec::new();
            if task == Task::Categorical {
                for kind in [DialogueKind::Improvised, DialogueKind::Scripted] {
                    let mut cm = ConfusionMatrix::new(n_classes);
                    for p in &pooled {
                        if prep.records[p.0].dialogue_kind == kind {
                            cm.record(target.labels[p.0], p.1)?;
                        }
                    }
                    if cm.total() > 0 {
                        let m = MetricSummary::from_confusion(&cm)?;
                        subsets.push(SubsetMetrics {
                            subset: kind.name().to_string(),
                            n: cm.total() as usize,
                            wa: m.wa,
                            ua: m.ua,
                        });
                    }
                }
            }
            per_seed.push(SeedResult {
                seed,
                metrics: MetricSummary::from_confusion(&summed)?,
                confusion: summed,
                chance_macro_f1: chance,
                subsets,
            });
            target_predictions.push((
                seed,
                pooled
                    .into_iter()
                    .map(|(pos, predicted, probabilities)| Prediction {
                        utterance_id: prep.records[pos].id.clone(),
                        truth: target.labels[pos],
                        predicted,
                        probabilities,
                    })
                    .collect(),
            ));
        }
        let mean_metrics = MeanMetrics {
            wa: mean(per_seed.iter().map(|r| r.metrics.wa)),
            ua: mean(per_seed.iter().map(|r| r.metrics.ua)),
            macro_f1: mean(per_seed.iter().map(|r| r.metrics.macro_f1)),
            chance_macro_f1: mean(per_seed.iter().map(|r| r.chance_macro_f1)),
        };
        targets.push(TargetReport {
            name: target.name.to_string(),
            classes: target.classes.clone(),
            per_seed,
            mean: mean_metrics,
        });
        all_predictions.push(target_predictions);
    }
    let mean_macro_f1 = (task == Task::Dimensional).then(|| mean(targets.iter().map(|t| t.mean.macro_f1)));
    Ok(ExperimentReport {
        task,
        model_kind: kind,
        latent_dim: cfg.model.latent_dim,
        feature_mode: cfg.model.feature_mode,
        seeds: cfg.evaluation.seeds.clone(),
        folds: prep.plan.scheme.name(),
        corpus: CorpusSummary {
            n_utterances: ds.len(),
            n_eligible: prep.records.len(),
            n_segments: prep.segments.iter().map(|m| m.rows()).sum(),
            n_skipped: ds.skipped.len(),
        },
        targets,
        mean_macro_f1,
        fold_reports: outputs.into_iter().map(|o| o.report).collect(),
        predictions: all_predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub latent_dim: usize,
    pub model: ModelKind,
    pub wa: f64,
    pub ua: f64,
    pub mean_f1: f64,
}

/// One experiment per (size, kind) with the rest of the configuration
/// fixed. Rows are sorted by size, then by kind.
pub fn latent_sweep(
    ds: &Dataset,
    cfg: &RunConfig,
    task: Task,
    kinds: &[ModelKind],
    sizes: &[usize],
    opts: &RunOptions,
) -> Result<(Vec<SweepRow>, Vec<ExperimentReport>)> {
    if sizes.is_empty() || kinds.is_empty() {
        return Err(Error::Config(
            "sweep needs at least one size and one model kind".into(),
        ));
    }
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &size in &sizes {
        for &kind in kinds {
            let mut c = cfg.clone();
            c.model.latent_dim = size;
            let mut o = opts.clone();
            o.checkpoint_dir = opts
                .checkpoint_dir
                .as_ref()
                .map(|d| d.join(format!("latent{size}")));
            let report = run_experiment(ds, &c, task, kind, &o)?;
            let first = &report.targets[0].mean;
            rows.push(SweepRow {
                latent_dim: size,
                model: kind,
                wa: first.wa,
                ua: first.ua,
                mean_f1: report.mean_macro_f1.unwrap_or(first.macro_f1),
            });
            reports.push(report);
        }
    }
    Ok((rows, reports))
}
