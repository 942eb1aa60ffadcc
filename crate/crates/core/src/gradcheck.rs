//! Fourth-order central-difference checks of every hand-written backward
//! pass over random small configurations. Used by the tests and `gradcheck`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::classifier::{ClassifierSpec, LstmClassifier, Readout, SequenceExample};
use crate::layers::Activation;
use crate::models::{one_hot_matrix, Autoencoder, EncoderDecoderSpec, ModelKind};
use crate::numeric::{finite_difference_gradient_o4, relative_error, Matrix, ParameterSet, RngStream};
use crate::Result;

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckCase {
    pub family: &'static str,
    pub description: String,
    pub parameter_count: usize,
    pub max_relative_error: f64,
    pub worst: WorstCoordinate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorstCoordinate {
    pub parameter: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradcheckCase {
    pub fn passed(&self) -> bool {
        self.max_relative_error < GRADCHECK_TOLERANCE
    }
}

fn random_matrix(rng: &mut RngStream, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.standard_normal()).collect()).expect("finite normals")
}

fn range(rng: &mut RngStream, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// Compares `analytic` with central differences of `loss` around the
/// model's current values and reports the worst coordinate.
fn compare<M, F>(model: &M, analytic: &[f64], mut loss: F) -> Result<(f64, WorstCoordinate)>
where
    M: ParameterSet + Clone,
    F: FnMut(&M) -> Result<f64>,
{
    let theta = model.flat_values();
    let mut probe = model.clone();
    let mut failure = None;
    let numeric = finite_difference_gradient_o4(
        |v| {
            probe.load_flat_values(v).expect("same length");
            loss(&probe).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        &theta,
        GRADCHECK_EPS,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let numeric = numeric?;
    let mut worst = (-1.0, WorstCoordinate::default());
    let mut offset = 0;
    for p in model.parameters() {
        for k in offset..offset + p.len() {
            let e = relative_error(analytic[k], numeric[k]);
            if e > worst.0 {
                worst = (
                    e,
                    WorstCoordinate {
                        parameter: p.name.clone(),
                        index: k - offset,
                        analytic: analytic[k],
                        numeric: numeric[k],
                    },
                );
            }
        }
        offset += p.len();
    }
    Ok(worst)
}

/// One random autoencoder of `kind` with δ frozen to a fixed draw.
pub fn autoencoder_case(kind: ModelKind, rng: &mut RngStream) -> Result<GradcheckCase> {
    let n_hidden = range(rng, 1, 2);
    let hidden_dims: Vec<usize> = (0..n_hidden).map(|_| range(rng, 2, 5)).collect();
    let activation = if rng.below(2) == 0 {
        Activation::Tanh
    } else {
        Activation::Sigmoid
    };
    let spec = EncoderDecoderSpec {
        kind,
        input_dim: range(rng, 2, 6),
        hidden_dims,
        latent_dim: range(rng, 1, 3),
        condition_dim: if kind == ModelKind::Cvae {
            range(rng, 2, 4)
        } else {
            0
        },
        activation,
    };
    let batch = range(rng, 1, 3);
    let kl_weight = if kind.is_variational() {
        rng.uniform(0.1, 1.0)
    } else {
        0.0
    };
    let mut model = Autoencoder::new(spec.clone(), &rng.fork(1))?;
    let x = random_matrix(rng, batch, spec.input_dim);
    let cond = if kind == ModelKind::Cvae {
        let labels: Vec<usize> = (0..batch).map(|_| rng.below(spec.condition_dim)).collect();
        Some(one_hot_matrix(&labels, spec.condition_dim)?)
    } else {
        None
    };
    let delta = kind
        .is_variational()
        .then(|| random_matrix(rng, batch, spec.latent_dim));
    model.zero_grads();
    model.loss_and_grad(&x, cond.as_ref(), delta.as_ref(), kl_weight)?;
    let analytic = model.flat_grads();
    let (err, worst) = compare(&model, &analytic, |m| {
        Ok(m.loss(&x, cond.as_ref(), delta.as_ref(), kl_weight)?.total)
    })?;
    Ok(GradcheckCase {
        family: kind.name(),
        description: format!(
            "in {} hidden {:?} latent {} cond {} batch {} {:?} kl_weight {:.3}",
            spec.input_dim,
            spec.hidden_dims,
            spec.latent_dim,
            spec.condition_dim,
            batch,
            activation,
            kl_weight
        ),
        parameter_count: model.parameter_count(),
        max_relative_error: err,
        worst,
    })
}

/// One random two-layer LSTM classifier with cross-entropy loss over a
/// padded batch of variable-length sequences.
pub fn classifier_case(rng: &mut RngStream) -> Result<GradcheckCase> {
    let spec = ClassifierSpec {
        input_dim: range(rng, 1, 4),
        lstm_hidden: [range(rng, 1, 4), range(rng, 1, 4)],
        n_classes: range(rng, 2, 4),
        readout: if rng.below(2) == 0 {
            Readout::Final
        } else {
            Readout::Mean
        },
    };
    let batch = range(rng, 1, 3);
    let data: Vec<SequenceExample> = (0..batch)
        .map(|i| {
            let len = range(rng, 1, 4);
            SequenceExample {
                utterance_id: format!("g{i}"),
                features: random_matrix(rng, len, spec.input_dim),
                label: rng.below(spec.n_classes),
            }
        })
        .collect();
    let refs: Vec<&SequenceExample> = data.iter().collect();
    let mut model = LstmClassifier::new(spec.clone(), &rng.fork(2))?;
    model.zero_grads();
    model.loss_and_grad(&refs)?;
    let analytic = model.flat_grads();
    let (err, worst) = compare(&model, &analytic, |m| m.loss(&refs))?;
    let lens: Vec<usize> = data.iter().map(|e| e.features.rows()).collect();
    Ok(GradcheckCase {
        family: "lstm",
        description: format!(
            "in {} hidden {:?} classes {} lengths {:?} {:?}",
            spec.input_dim, spec.lstm_hidden, spec.n_classes, lens, spec.readout
        ),
        parameter_count: model.parameter_count(),
        max_relative_error: err,
        worst,
    })
}

/// `per_family` random configurations for each of AE, VAE, CVAE and the
/// LSTM classifier.
pub fn run_suite(per_family: usize, seed: u64) -> Result<Vec<GradcheckCase>> {
    let root = RngStream::new(seed);
    let mut cases = Vec::with_capacity(4 * per_family);
    for (f, kind) in [ModelKind::Ae, ModelKind::Vae, ModelKind::Cvae]
        .into_iter()
        .enumerate()
    {
        let mut rng = root.fork(f as u64);
        for _ in 0..per_family {
            cases.push(autoencoder_case(kind, &mut rng)?);
        }
    }
    let mut rng = root.fork(3);
    for _ in 0..per_family {
        cases.push(classifier_case(&mut rng)?);
    }
    Ok(cases)
}

pub fn all_passed(cases: &[GradcheckCase]) -> bool {
    !cases.is_empty() && cases.iter().all(GradcheckCase::passed)
}
