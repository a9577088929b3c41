//! Training-improvement check: a briefly trained tokenizer reconstructs
//! motion far better than an untrained one with the same architecture.

use social_motion::data::{synth_scene, ScenePattern, SynthSpec};
use social_motion::metrics::mpjpe;
use social_motion::skeleton::SkeletonDef;
use social_motion::vq::{slice_windows, train_vq, vq_decode, vq_encode, VQConfig, VQModel};
use social_motion::xh3d::{canonicalize_person, decode_person_h3d, encode_person_h3d};

#[test]
fn trained_reconstruction_beats_untrained_baseline() {
    let skel = SkeletonDef::default_22();
    let mut features = Vec::new();
    for seed in 0..10u64 {
        let pattern = ScenePattern::ALL[seed as usize % 5];
        let spec = SynthSpec {
            persons: pattern.min_persons().max(2),
            pattern,
            duration_s: 5.0,
            walk_speed: 1.1,
            seed,
        };
        let scene = synth_scene(&spec, &skel).unwrap().scene;
        for person in &scene.persons {
            let (canonical, _) = canonicalize_person(person, &skel).unwrap();
            features.push(encode_person_h3d(&canonical, &skel).unwrap());
        }
    }
    let windows = slice_windows(&features, 16);
    assert!(windows.len() > 40);

    let cfg = VQConfig {
        feature_dim: 263,
        codebook_size: 48,
        latent_dim: 24,
        hidden_dim: 32,
        window: 16,
        batch_size: 8,
        iterations: 700,
        learning_rate: 4e-4,
        seed: 99,
        ..Default::default()
    };
    let untrained = {
        let mut m = VQModel::new(cfg.clone()).unwrap();
        m.stats = social_motion::vq::FeatureStats::fit(&windows);
        m
    };
    let (trained, _) = train_vq(&windows, &cfg).unwrap();

    // Reconstruction MPJPE over held-in windows: decode both the original
    // features and the tokenizer round trip, compare joint positions.
    let recon_error = |model: &VQModel| -> f64 {
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for w in windows.iter().step_by(5) {
            let tokens = vq_encode(w, model).unwrap();
            let decoded = vq_decode(&tokens, model, w.fps).unwrap();
            pred.push(decode_person_h3d(&decoded, &skel).unwrap().positions);
            truth.push(decode_person_h3d(w, &skel).unwrap().positions);
        }
        mpjpe(&pred, &truth).unwrap()
    };
    let before = recon_error(&untrained);
    let after = recon_error(&trained);
    assert!(
        after <= 0.5 * before,
        "training must cut reconstruction MPJPE by at least half: {before:.1} mm -> {after:.1} mm"
    );
}
