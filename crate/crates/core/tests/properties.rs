use approx::assert_relative_eq;
use emovae_core::classifier::{argmax, lstm_cell, LstmLayerParams};
use emovae_core::corpus::{bin_dimensional, map_categorical, DimBin, LabelMap};
use emovae_core::gradcheck::{autoencoder_case, classifier_case};
use emovae_core::layers::Activation;
use emovae_core::metrics::{f_measure, unweighted_accuracy, weighted_accuracy, ConfusionMatrix};
use emovae_core::models::{
    kl_divergence, Autoencoder, ConditionVector, EncoderDecoderSpec, FeatureMode, LatentParams, ModelKind,
};
use emovae_core::numeric::{softmax, RngStream};
use proptest::prelude::*;

fn kind_strategy() -> impl Strategy<Value = ModelKind> {
    prop_oneof![Just(ModelKind::Ae), Just(ModelKind::Vae), Just(ModelKind::Cvae)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kl_is_non_negative(
        pairs in prop::collection::vec((-20.0f64..20.0, -10.0f64..10.0), 1..16)
    ) {
        let (mu, lv): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let kl = kl_divergence(&LatentParams::gaussian(mu, lv).unwrap());
        prop_assert!(kl >= 0.0);
    }

    #[test]
    fn encode_decode_shapes_follow_the_spec(
        kind in kind_strategy(),
        input_dim in 1usize..12,
        hidden in prop::collection::vec(1usize..10, 1..3),
        latent_dim in 1usize..6,
        n_classes in 2usize..5,
        seed in any::<u64>(),
    ) {
        let spec = EncoderDecoderSpec {
            kind,
            input_dim,
            hidden_dims: hidden,
            latent_dim,
            condition_dim: if kind == ModelKind::Cvae { n_classes } else { 0 },
            activation: Activation::Tanh,
        };
        let model = Autoencoder::new(spec.clone(), &RngStream::new(seed)).unwrap();
        let c = (kind == ModelKind::Cvae).then(|| ConditionVector::one_hot(0, n_classes).unwrap());
        let x = vec![0.5; input_dim];
        let lp = model.encode(&x, c.as_ref()).unwrap();
        prop_assert_eq!(lp.mu.len(), latent_dim);
        prop_assert_eq!(lp.log_var.is_some(), kind.is_variational());
        if let Some(lv) = &lp.log_var {
            prop_assert!(lv.iter().all(|v| (-10.0..=10.0).contains(v)));
        }
        prop_assert_eq!(model.decode(&lp.mu, c.as_ref()).unwrap().len(), input_dim);
        prop_assert_eq!(spec.encoder_input_dim(), input_dim + spec.condition_dim);
        prop_assert_eq!(spec.decoder_input_dim(), latent_dim + spec.condition_dim);
        let mut rev = spec.hidden_dims.clone();
        rev.reverse();
        prop_assert_eq!(spec.decoder_hidden_dims(), rev);
        let modes: &[FeatureMode] = if kind.is_variational() {
            &[FeatureMode::Mu, FeatureMode::MuLogVar, FeatureMode::Sample]
        } else {
            &[FeatureMode::Mu]
        };
        for &m in modes {
            let expected = if m == FeatureMode::MuLogVar { 2 * latent_dim } else { latent_dim };
            prop_assert_eq!(spec.feature_dim(m), expected);
        }
    }

    #[test]
    fn dimensional_bins_partition_the_scale(v in 1.0f64..=5.0) {
        let bin = bin_dimensional(v).unwrap();
        let expected = if v < 3.0 { DimBin::Low } else if v > 3.0 { DimBin::High } else { DimBin::Mid };
        prop_assert_eq!(bin, expected);
    }

    #[test]
    fn softmax_is_a_probability_vector(logits in prop::collection::vec(-50.0f64..50.0, 2..8)) {
        let p = softmax(&logits);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn argmax_ignores_a_shared_shift(
        logits in prop::collection::vec(-5.0f64..5.0, 2..6),
        shift in -100.0f64..100.0,
    ) {
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        prop_assert_eq!(argmax(&softmax(&logits)), argmax(&softmax(&shifted)));
    }

    #[test]
    fn lstm_hidden_state_is_bounded(
        x in prop::collection::vec(-20.0f64..20.0, 3),
        h in prop::collection::vec(-1.0f64..1.0, 4),
        c in prop::collection::vec(-50.0f64..50.0, 4),
        seed in any::<u64>(),
    ) {
        let p = LstmLayerParams::new("l", 3, 4, &RngStream::new(seed));
        let (h1, _) = lstm_cell(&x, &h, &c, &p).unwrap();
        prop_assert!(h1.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn metrics_are_invariant_under_class_relabeling(
        counts in prop::collection::vec(0u64..20, 16),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let rows: Vec<Vec<u64>> = counts.chunks(4).map(<[u64]>::to_vec).collect();
        let cm = ConfusionMatrix::from_rows(&rows).unwrap();
        prop_assume!(cm.total() > 0);
        let p = cm.permuted(&perm);
        prop_assert_eq!(weighted_accuracy(&cm).unwrap(), weighted_accuracy(&p).unwrap());
        prop_assert_eq!(unweighted_accuracy(&cm).unwrap(), unweighted_accuracy(&p).unwrap());
        prop_assert_eq!(f_measure(&cm).unwrap().macro_f1, f_measure(&p).unwrap().macro_f1);
    }

    #[test]
    fn equal_row_sums_make_wa_equal_ua(
        splits in prop::collection::vec(prop::collection::vec(0u64..10, 2), 3),
    ) {
        // Every row sums to 30.
        let rows: Vec<Vec<u64>> = splits
            .iter()
            .map(|s| {
                let a = s[0].min(30);
                let b = s[1].min(30 - a);
                vec![a, b, 30 - a - b]
            })
            .collect();
        let cm = ConfusionMatrix::from_rows(&rows).unwrap();
        prop_assert_eq!(weighted_accuracy(&cm).unwrap(), unweighted_accuracy(&cm).unwrap());
    }

    #[test]
    fn label_mapping_is_case_insensitive_and_idempotent(
        raw in prop::sample::select(vec!["neutral", "happiness", "excited", "sadness", "anger", "frustration", "fear"]),
        upper in prop::collection::vec(any::<bool>(), 12),
    ) {
        let lm = LabelMap::default();
        let mixed: String = raw
            .chars()
            .zip(upper.iter().cycle())
            .map(|(ch, &u)| if u { ch.to_ascii_uppercase() } else { ch })
            .collect();
        let once = map_categorical(&mixed, &lm);
        prop_assert_eq!(once, map_categorical(raw, &lm));
        if let Some(class) = once {
            prop_assert_eq!(map_categorical(class.name(), &lm), Some(class));
        }
    }
}

#[test]
fn autoencoder_gradients_over_a_hundred_configurations_per_kind() {
    for (i, kind) in [ModelKind::Ae, ModelKind::Vae, ModelKind::Cvae]
        .into_iter()
        .enumerate()
    {
        let mut rng = RngStream::new(1000 + i as u64);
        for _ in 0..100 {
            let case = autoencoder_case(kind, &mut rng).unwrap();
            assert!(case.passed(), "{case:?}");
        }
    }
}

#[test]
fn lstm_gradients_over_fifty_configurations() {
    let mut rng = RngStream::new(2000);
    for _ in 0..50 {
        let case = classifier_case(&mut rng).unwrap();
        assert!(case.passed(), "{case:?}");
    }
}

#[test]
fn kl_closed_form_values() {
    let one = |mu: f64, lv: f64| kl_divergence(&LatentParams::gaussian(vec![mu], vec![lv]).unwrap());
    assert_eq!(one(0.0, 0.0), 0.0);
    assert_relative_eq!(one(1.0, 0.0), 0.5);
    assert_relative_eq!(one(0.0, 1.0), 0.5 * (std::f64::consts::E - 2.0), epsilon = 1e-15);
    assert_relative_eq!(one(0.0, 1.0), 0.35914, epsilon = 1e-5);
}
