//! Model checkpoints in the tensor container.

use std::path::Path;

use emovae_core::classifier::{ClassifierSpec, LstmClassifier};
use emovae_core::dsp::Standardizer;
use emovae_core::models::{Autoencoder, EncoderDecoderSpec};
use emovae_core::numeric::{Matrix, ParameterSet, RngStream};
use serde_json::{json, Value};

use crate::container::Container;
use crate::{Error, Result};

fn push_parameters(c: &mut Container, model: &impl ParameterSet) -> Result<()> {
    for p in model.parameters() {
        c.push(p.name.clone(), p.value.clone())?;
    }
    Ok(())
}

fn load_parameters(model: &mut impl ParameterSet, c: &Container, path: &Path) -> Result<()> {
    for p in model.parameters_mut() {
        let t = c.get(&p.name).ok_or_else(|| Error::Container {
            path: path.to_path_buf(),
            detail: format!("missing tensor '{}'", p.name),
        })?;
        if t.shape() != p.value.shape() {
            return Err(Error::Container {
                path: path.to_path_buf(),
                detail: format!(
                    "tensor '{}' has shape {:?}, model expects {:?}",
                    p.name,
                    t.shape(),
                    p.value.shape()
                ),
            });
        }
        p.value = t.clone();
    }
    Ok(())
}

fn meta_field<T: serde::de::DeserializeOwned>(c: &Container, key: &str, path: &Path) -> Result<T> {
    serde_json::from_value(c.meta.get(key).cloned().unwrap_or(Value::Null)).map_err(|e| Error::Container {
        path: path.to_path_buf(),
        detail: format!("header field '{key}': {e}"),
    })
}

fn check_kind(c: &Container, expected: &str, path: &Path) -> Result<()> {
    match c.meta.get("checkpoint").and_then(Value::as_str) {
        Some(k) if k == expected => Ok(()),
        other => Err(Error::Container {
            path: path.to_path_buf(),
            detail: format!("expected a {expected} checkpoint, found {other:?}"),
        }),
    }
}

/// Autoencoder weights plus the input standardizer, with the architecture
/// and `model_kind` in the header. `extra` is merged into the header.
pub fn autoencoder_container(
    model: &Autoencoder,
    standardizer: Option<&Standardizer>,
    extra: Value,
) -> Result<Container> {
    let mut meta = json!({
        "checkpoint": "autoencoder",
        "build": crate::BUILD_ID,
        "model_kind": model.kind(),
        "spec": model.spec(),
    });
    merge(&mut meta, extra);
    let mut c = Container::new(meta);
    push_parameters(&mut c, model)?;
    if let Some(s) = standardizer {
        push_standardizer(&mut c, "input", s)?;
    }
    Ok(c)
}

pub fn load_autoencoder(c: &Container, path: &Path) -> Result<(Autoencoder, Option<Standardizer>)> {
    check_kind(c, "autoencoder", path)?;
    let spec: EncoderDecoderSpec = meta_field(c, "spec", path)?;
    let mut model = Autoencoder::new(spec, &RngStream::new(0))?;
    load_parameters(&mut model, c, path)?;
    Ok((model, read_standardizer(c, "input")))
}

/// Classifier weights, with the feature standardizer when one was used.
pub fn classifier_container(
    model: &LstmClassifier,
    standardizer: Option<&Standardizer>,
    extra: Value,
) -> Result<Container> {
    let mut meta = json!({
        "checkpoint": "classifier",
        "build": crate::BUILD_ID,
        "spec": model.spec(),
    });
    merge(&mut meta, extra);
    let mut c = Container::new(meta);
    push_parameters(&mut c, model)?;
    if let Some(s) = standardizer {
        push_standardizer(&mut c, "features", s)?;
    }
    Ok(c)
}

pub fn load_classifier(c: &Container, path: &Path) -> Result<(LstmClassifier, Option<Standardizer>)> {
    check_kind(c, "classifier", path)?;
    let spec: ClassifierSpec = meta_field(c, "spec", path)?;
    let mut model = LstmClassifier::new(spec, &RngStream::new(0))?;
    load_parameters(&mut model, c, path)?;
    Ok((model, read_standardizer(c, "features")))
}

fn push_standardizer(c: &mut Container, prefix: &str, s: &Standardizer) -> Result<()> {
    c.push(format!("{prefix}.mean"), Matrix::row_vector(s.mean.clone())?)?;
    c.push(format!("{prefix}.std"), Matrix::row_vector(s.std.clone())?)
}

fn read_standardizer(c: &Container, prefix: &str) -> Option<Standardizer> {
    let mean = c.get(&format!("{prefix}.mean"))?;
    let std = c.get(&format!("{prefix}.std"))?;
    Some(Standardizer {
        mean: mean.as_slice().to_vec(),
        std: std.as_slice().to_vec(),
    })
}

fn merge(meta: &mut Value, extra: Value) {
    if let (Value::Object(m), Value::Object(e)) = (meta, extra) {
        for (k, v) in e {
            m.insert(k, v);
        }
    }
}
