use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dsp::MelSpectrogram;

fn small(n_mood: usize, n_metadata: usize) -> ModelConfig {
    ModelConfig {
        input_frames: 20,
        input_bands: 12,
        num_blocks: 2,
        filters_per_block: 3,
        ..ModelConfig::new(n_mood, n_metadata)
    }
}

fn random_batch(n: usize, cfg: &ModelConfig, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[n, cfg.input_frames, cfg.input_bands, 1], |_| {
        rng.random_range(-1.0..1.0)
    })
}

#[test]
fn default_shape_chain_and_flatten() {
    let cfg = ModelConfig::new(3, 50);
    let chain = cfg.spatial_chain().unwrap();
    assert_eq!(
        chain,
        vec![(187, 96), (93, 48), (46, 24), (23, 12), (11, 6), (5, 3)]
    );
    assert_eq!(cfg.flatten_width().unwrap(), 1920);
}

#[test]
fn trunk_parameter_count() {
    let model = Model::<f32>::zeros(ModelConfig::new(3, 50)).unwrap();
    let report = model.param_report();
    let by_hand = (3 * 3 * 128 + 128) + 4 * (3 * 3 * 128 * 128 + 128);
    assert_eq!(report.trunk_conv, by_hand);
    assert_eq!(report.trunk_conv, 591_616);
    assert_eq!(report.trunk_batchnorm, 5 * 2 * 128);
    assert_eq!(report.mood_head, 1920 * 3 + 3);
    assert_eq!(report.metadata_head, 1920 * 50 + 50);
    assert_eq!(model.metadata_head().unwrap().weights.shape(), &[1920, 50]);
    assert_eq!(model.mood_head().weights.shape(), &[1920, 3]);
}

#[test]
fn baseline_has_no_metadata_head() {
    let model = Model::<f32>::zeros(ModelConfig::new(3, 0)).unwrap();
    assert!(model.metadata_head().is_none());
    assert_eq!(model.param_report().metadata_head, 0);
    assert_eq!(model.alpha(), 0.0);
}

#[test]
fn collapsing_input_is_rejected() {
    let cfg = ModelConfig {
        input_frames: 20,
        ..ModelConfig::new(3, 0)
    };
    assert!(matches!(cfg.validate(), Err(ModelError::InvalidConfig(_))));
    let cfg = ModelConfig {
        n_mood: 0,
        ..ModelConfig::new(3, 0)
    };
    assert!(Model::<f32>::zeros(cfg).is_err());
    let cfg = ModelConfig {
        alpha: AlphaSetting::Auto,
        ..ModelConfig::new(3, 0)
    };
    assert!(matches!(
        cfg.validate(),
        Err(ModelError::ZeroMetadataLabels)
    ));
}

#[test]
fn alpha_defaults() {
    assert_eq!(default_alpha(3, 50).unwrap(), 0.06);
    assert_eq!(default_alpha(50, 50).unwrap(), 1.0);
    assert!((default_alpha(3, 59).unwrap() - 0.050_847).abs() < 1e-6);
    assert!(matches!(
        default_alpha(3, 0),
        Err(ModelError::ZeroMetadataLabels)
    ));
    assert_eq!(ModelConfig::new(3, 50).resolved_alpha(), 3.0 / 50.0);
}

#[test]
fn alpha_setting_parses_and_serializes() {
    assert_eq!("auto".parse::<AlphaSetting>().unwrap(), AlphaSetting::Auto);
    assert_eq!(
        "0.5".parse::<AlphaSetting>().unwrap(),
        AlphaSetting::Fixed(0.5)
    );
    assert!("-1".parse::<AlphaSetting>().is_err());
    assert!("x".parse::<AlphaSetting>().is_err());
    let json = serde_json::to_string(&ModelConfig::new(3, 50)).unwrap();
    assert!(json.contains("\"alpha\":\"auto\""));
    let back: ModelConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, ModelConfig::new(3, 50));
    let fixed: AlphaSetting = serde_json::from_str("0.25").unwrap();
    assert_eq!(fixed, AlphaSetting::Fixed(0.25));
}

#[test]
fn outputs_are_probabilities_and_infer_is_deterministic() {
    let cfg = small(3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = Model::<f64>::build(cfg.clone(), &mut rng).unwrap();
    let batch = random_batch(5, &cfg, 2);
    let (out, _) = model.forward(&batch, Mode::Train, &mut rng).unwrap();
    assert_eq!(out.mood.shape(), &[5, 3]);
    assert_eq!(out.metadata.as_ref().unwrap().shape(), &[5, 4]);
    for &p in out.mood.data().iter().chain(out.metadata.unwrap().data()) {
        assert!(p > 0.0 && p < 1.0);
    }
    let a = model.infer(&batch).unwrap();
    let b = model.infer(&batch).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.mood, model.mood_only(&batch).unwrap());
}

#[test]
fn wrong_batch_shape_is_rejected() {
    let cfg = small(2, 0);
    let model = Model::<f64>::zeros(cfg).unwrap();
    let bad = Tensor::<f64>::zeros(&[1, 19, 12, 1]);
    assert!(matches!(model.infer(&bad), Err(ModelError::Tensor(_))));
}

fn probs(v: f64, n: usize) -> Tensor<f64> {
    Tensor::full(&[1, n], v)
}

#[test]
fn combined_loss_arithmetic() {
    // bce with p = e^{-0.5} against t = 1 is 0.5; p = e^{-1} gives 1.0.
    let out = ModelOutput {
        mood: probs((-0.5f64).exp(), 2),
        metadata: Some(probs((-1.0f64).exp(), 3)),
    };
    let mt = Tensor::full(&[1, 2], 1.0);
    let xt = Tensor::full(&[1, 3], 1.0);
    let l = combined_loss(&out, &mt, Some(&xt), 0.06).unwrap();
    assert!((l.mood - 0.5).abs() < 1e-12);
    assert!((l.metadata.unwrap() - 1.0).abs() < 1e-12);
    assert!((l.total - 0.56).abs() < 1e-12);

    let zero = combined_loss(&out, &mt, Some(&xt), 0.0).unwrap();
    assert_eq!(zero.total.to_bits(), zero.mood.to_bits());
    assert!(zero.grads.metadata.is_none());

    let dup = ModelOutput {
        mood: out.mood.clone(),
        metadata: Some(out.mood.clone()),
    };
    let l = combined_loss(&dup, &mt, Some(&mt), 1.0).unwrap();
    assert!((l.total - 2.0 * l.mood).abs() < 1e-12);

    let base = ModelOutput {
        mood: out.mood.clone(),
        metadata: None,
    };
    let l = combined_loss(&base, &mt, None, 0.7).unwrap();
    assert_eq!(l.total, l.mood);
    assert!(combined_loss(&out, &mt, Some(&xt), -1.0).is_err());
}

fn trunk_grads(model: &Model<f64>) -> Vec<Vec<f64>> {
    model
        .trainable()
        .into_iter()
        .filter(|(n, _)| n.starts_with("block") || n.starts_with("mood"))
        .map(|(_, t)| t.grad().map(<[f64]>::to_vec).unwrap_or_default())
        .collect()
}

#[test]
fn zero_alpha_matches_baseline_gradients() {
    let batch = random_batch(4, &small(2, 0), 9);
    let mood_t = Tensor::from_fn(&[4, 2], |i| (i % 3 == 0) as u8 as f64);
    let meta_t = Tensor::from_fn(&[4, 5], |i| (i % 2 == 0) as u8 as f64);

    let mut base = Model::<f64>::build(small(2, 0), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let mtl_cfg = ModelConfig {
        alpha: AlphaSetting::Fixed(0.0),
        ..small(2, 5)
    };
    let mut mtl = Model::<f64>::build(mtl_cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    // The metadata head is drawn last, so the shared parameters coincide.
    assert_eq!(base.blocks(), mtl.blocks());
    assert_eq!(base.mood_head(), mtl.mood_head());

    for (model, meta) in [(&mut base, None), (&mut mtl, Some(&meta_t))] {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (out, trace) = model.forward(&batch, Mode::Train, &mut rng).unwrap();
        let loss = combined_loss(&out, &mood_t, meta, model.alpha()).unwrap();
        model.backward(&trace, &loss.grads).unwrap();
    }
    assert_eq!(trunk_grads(&base), trunk_grads(&mtl));
}

#[test]
fn combined_loss_is_monotone_in_alpha() {
    let out = ModelOutput {
        mood: probs(0.3, 2),
        metadata: Some(probs(0.6, 2)),
    };
    let t = Tensor::full(&[1, 2], 1.0);
    let mut prev = f64::NEG_INFINITY;
    for a in [0.0, 0.1, 0.5, 1.0, 3.0] {
        let l = combined_loss(&out, &t, Some(&t), a).unwrap().total;
        assert!(l >= prev);
        prev = l;
    }
}

fn spec(frames: usize, bands: usize, seed: u64) -> MelSpectrogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..frames * bands)
        .map(|_| rng.random_range(-2.0f32..2.0))
        .collect();
    MelSpectrogram::new(frames, bands, v).unwrap()
}

#[test]
fn predict_song_averages_full_windows() {
    let cfg = small(3, 2);
    let model = Model::<f64>::build(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let w = cfg.input_frames;
    let s = spec(3 * w + 7, cfg.input_bands, 3);
    let song = predict_song(&model, &s).unwrap();
    let mut expected = vec![0.0; 3];
    for k in (0..3).rev() {
        let win = extract_window(&s, k * w, w);
        let batch = Tensor::new(
            vec![1, w, cfg.input_bands, 1],
            win.into_iter().map(f64::from).collect(),
        )
        .unwrap();
        for (e, p) in expected
            .iter_mut()
            .zip(model.mood_only(&batch).unwrap().data())
        {
            *e += p / 3.0;
        }
    }
    for (a, b) in song.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-7);
    }

    let exact = spec(w, cfg.input_bands, 8);
    let one = predict_song(&model, &exact).unwrap();
    let batch = Tensor::new(
        vec![1, w, cfg.input_bands, 1],
        exact.values().iter().map(|&v| v as f64).collect(),
    )
    .unwrap();
    assert_eq!(one, model.mood_only(&batch).unwrap().data().to_vec());

    let short = spec(5, cfg.input_bands, 2);
    assert_eq!(predict_song(&model, &short).unwrap().len(), 3);
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let cfg = small(3, 2);
    let mut model = Model::<f32>::build(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    model.annotations.mood_labels = vec!["a".into(), "b".into(), "c".into()];
    model.annotations.mood_vocab_hash = "abc".into();
    // Move the running statistics off their defaults.
    let batch = random_batch(4, &cfg, 1).cast::<f32>();
    model
        .forward(&batch, Mode::Train, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap();
    let bytes = checkpoint_to_bytes(&model);
    let back = checkpoint_from_bytes::<f32>(&bytes).unwrap();
    assert_eq!(checkpoint_to_bytes(&back), bytes);
    assert_eq!(back.infer(&batch).unwrap(), model.infer(&batch).unwrap());
    assert_eq!(back.annotations, model.annotations);

    assert!(matches!(
        checkpoint_from_bytes::<f32>(&bytes[..bytes.len() - 1]),
        Err(ModelError::CorruptCheckpoint(_))
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        checkpoint_from_bytes::<f32>(&bad),
        Err(ModelError::CorruptCheckpoint(_))
    ));
    let mut extra = bytes;
    extra.push(0);
    assert!(checkpoint_from_bytes::<f32>(&extra).is_err());
}

#[test]
fn checked_load_rejects_other_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let mut model = Model::<f32>::zeros(small(2, 0)).unwrap();
    model.annotations.mood_vocab_hash = "h1".into();
    save_checkpoint(&model, &path).unwrap();
    assert!(load_checkpoint_checked::<f32>(&path, "h1").is_ok());
    assert!(load_checkpoint_checked::<f32>(&path, "h2").is_err());
}
