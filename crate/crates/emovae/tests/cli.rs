use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emovae::config::RunConfig;

fn emovae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emovae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn small_corpus(dir: &Path) -> PathBuf {
    let out = dir.join("corpus");
    let o = emovae(&[
        "synth-corpus",
        "--seed",
        "3",
        "--out",
        s(&out),
        "--utterances-per-speaker",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("manifest.csv")
}

fn tiny_config(dir: &Path) -> PathBuf {
    let mut cfg = RunConfig::default();
    cfg.model.hidden_dims = vec![32, 16];
    cfg.model.latent_dim = 8;
    cfg.autoencoder.epochs = 2;
    cfg.classifier.lstm_hidden = [8, 8];
    cfg.classifier.max_epochs = 2;
    cfg.evaluation.seeds = vec![1];
    cfg.evaluation.dimensional_folds = emovae_core::corpus::FoldScheme::KFold { k: 4, seed: 0 };
    cfg.evaluation.chance_permutations = 5;
    let path = dir.join("tiny.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn version_prints_the_build_identifier() {
    let o = emovae(&["--version"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), emovae::BUILD_ID);
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let o = emovae(&["synth-corpus", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--out"));
}

#[test]
fn unknown_model_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = emovae(&[
        "run",
        "--task",
        "categorical",
        "--kind",
        "gan",
        "--report-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_reports_its_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"model\": {\"latent_dim\": }\n}\n").unwrap();
    let o = emovae(&[
        "run",
        "--task",
        "categorical",
        "--config",
        s(&cfg),
        "--report-dir",
        s(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:2:"), "{err}");
}

#[test]
fn missing_manifest_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = emovae(&["extract", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_audio_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        "id,audio_path,session,speaker,dialogue_kind,label,arousal,power,valence\n\
         u1,missing.wav,1,S1,improvised,neutral,3,3,3\n",
    )
    .unwrap();
    let o = emovae(&[
        "extract",
        "--manifest",
        s(&manifest),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gradcheck_passes() {
    let o = emovae(&["gradcheck"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(
        out.lines().last().unwrap().ends_with("0 failed (tolerance 1e-4)"),
        "{out}"
    );
}

#[test]
fn synth_corpus_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let o = emovae(&[
            "synth-corpus",
            "--seed",
            "7",
            "--out",
            s(&dir.path().join(name)),
            "--utterances-per-speaker",
            "2",
        ]);
        assert!(o.status.success());
    }
    let a = tree(&dir.path().join("a"));
    assert_eq!(a, tree(&dir.path().join("b")));
    assert_eq!(
        a.keys()
            .filter(|k| k.extension().is_some_and(|e| e == "wav"))
            .count(),
        20
    );
    assert!(a.contains_key(Path::new("config.json")));
}

#[test]
fn extract_and_train_rep_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(dir.path());
    let cfg = tiny_config(dir.path());

    let seg = dir.path().join("seg");
    let o = emovae(&[
        "extract",
        "--manifest",
        s(&manifest),
        "--config",
        s(&cfg),
        "--out",
        s(&seg),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = emovae::container::Container::read(&seg.join("segments.emv")).unwrap();
    let ds = emovae::features::Dataset::from_container(&c, &seg.join("segments.emv")).unwrap();
    assert_eq!(ds.len(), 40);
    let echoed = RunConfig::load(&seg.join("config.json")).unwrap();
    assert_eq!(echoed.model.latent_dim, 8);
    assert_eq!(echoed.manifest.as_deref(), Some(manifest.as_path()));

    let rep = dir.path().join("rep");
    let o = emovae(&[
        "train-rep",
        "--kind",
        "vae",
        "--manifest",
        s(&manifest),
        "--config",
        s(&cfg),
        "--out",
        s(&rep),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let history = std::fs::read_to_string(rep.join("loss_history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,total,recon,kl");
    assert_eq!(lines.len(), 3);
    let path = rep.join("autoencoder.emv");
    let ckpt = emovae::container::Container::read(&path).unwrap();
    let (model, standardizer) = emovae::checkpoint::load_autoencoder(&ckpt, &path).unwrap();
    assert_eq!(model.spec().latent_dim, 8);
    assert_eq!(standardizer.unwrap().mean.len(), 800);
}

#[test]
fn run_emits_reports_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(dir.path());
    let cfg = tiny_config(dir.path());
    let report = dir.path().join("report");
    let o = emovae(&[
        "run",
        "--task",
        "dimensional",
        "--kind",
        "ae,cvae",
        "--config",
        s(&cfg),
        "--manifest",
        s(&manifest),
        "--report-dir",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["build"], emovae::BUILD_ID);
    assert_eq!(json["config"]["model"]["latent_dim"], 8);
    assert_eq!(json["experiments"].as_array().unwrap().len(), 2);

    let metrics = std::fs::read_to_string(report.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next(),
        Some("model,task,target,seed,wa,ua,macro_f1,chance_macro_f1")
    );
    // Two models × three dimensions × (one seed + mean).
    assert_eq!(lines.count(), 12);

    let md = std::fs::read_to_string(report.join("report.md")).unwrap();
    assert!(md.contains("| AE-LSTM |") && md.contains("| CVAE-LSTM |") && md.contains("Chance"));

    let preds = std::fs::read_to_string(report.join("predictions/cvae_valence_seed1.csv")).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next(), Some("utterance_id,true,predicted,p_0,p_1,p_2"));
    assert_eq!(lines.count(), 40);

    for fold in 0..4 {
        let d = report.join(format!("checkpoints/cvae/seed1/fold{fold:02}"));
        for f in [
            "autoencoder.emv",
            "classifier_arousal.emv",
            "classifier_power.emv",
            "classifier_valence.emv",
        ] {
            assert!(d.join(f).is_file(), "{}", d.join(f).display());
        }
    }
}

#[test]
fn sweep_writes_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_corpus(dir.path());
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("sweep");
    let o = emovae(&[
        "sweep",
        "--sizes",
        "8,2,4",
        "--kind",
        "vae",
        "--config",
        s(&cfg),
        "--manifest",
        s(&manifest),
        "--report-dir",
        s(&out),
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "latent_dim,model,wa,ua");
    let sizes: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(sizes, ["2", "4", "8"]);
    assert!(out.join("config.json").is_file() && out.join("sweep.json").is_file());
}
