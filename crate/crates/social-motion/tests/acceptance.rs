//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use social_motion::data::{synth_scene, ScenePattern, SynthSpec};
use social_motion::grammar::{
    build_vocabulary, parse_social, serialize_social, shuffle_persons, ParseError,
    UnifiedVocabulary, TOKEN_EOS,
};
use social_motion::lm::{
    build_task_pair, generate, lm_train_step, span_corrupt, ModelConfig, Sampling, Seq2SeqModel,
    SupervisedTask, TaskPair, TokenizedScene,
};
use social_motion::metrics::{
    accel_error, fid, mpjpe, pa_mpjpe, procrustes_align, r_precision_mm_dist,
};
use social_motion::motion::{forward_kinematics, Positions, SocialMotion};
use social_motion::nn::{gaussian, AdamW, AdamWConfig, Mat, VisitParams};
use social_motion::relpose::{bin_decode, bin_encode, AxisBins, BinSpec, RelPoseBins};
use social_motion::skeleton::SkeletonDef;
use social_motion::vq::{
    quantize_latents, train_vq, vq_assignments, vq_backward, vq_loss, Codebook, VQConfig, VQModel,
};
use social_motion::xh3d::{
    canonicalize_person, decode_person_h3d, decode_social, encode_person_h3d, encode_social,
    FeatureLayout, PersonFeatures, ReferenceChoice, RelPose, SocialFeatures,
};

fn conclude(number: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {number} — {name}: {detail}");
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

/// Deterministic synthetic scene pool shared by several criteria.
fn scene_pool(skel: &SkeletonDef, count: usize, max_duration: f64) -> Vec<SocialMotion> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut scenes = Vec::with_capacity(count);
    let mut i = 0;
    while scenes.len() < count {
        let pattern = ScenePattern::ALL[i % ScenePattern::ALL.len()];
        let persons = rng.random_range(pattern.min_persons()..=5);
        let duration = rng.random_range(2.0..=max_duration);
        let spec = SynthSpec {
            persons,
            pattern,
            duration_s: duration,
            walk_speed: rng.random_range(0.7..1.5),
            seed: i as u64,
        };
        scenes.push(synth_scene(&spec, skel).expect("feasible spec").scene);
        i += 1;
    }
    scenes
}

// ---------------------------------------------------------------------------
// 1. Codec round trip

#[test]
fn acceptance_01_codec_round_trip() {
    let skel = SkeletonDef::default_22();
    let scenes = scene_pool(&skel, 100, 20.0);
    let mut worst_joint = 0.0f64;
    let mut worst_pair = 0.0f64;
    for scene in &scenes {
        let features = encode_social(scene, &skel, ReferenceChoice::Index(0)).unwrap();
        let decoded = decode_social(&features, &skel).unwrap();
        // The decoded scene lives in the reference's canonical frame; map it
        // back with the reference's removed transform before comparing.
        let (_, ref_transform) = canonicalize_person(&scene.persons[0], &skel).unwrap();
        for (person, original) in decoded.positions.iter().zip(&scene.persons) {
            let truth = forward_kinematics(original, &skel).unwrap();
            for t in 0..person.frames {
                for j in 0..person.joints {
                    let p = ref_transform.apply_point(person.get(t, j));
                    let q = truth.get(t, j);
                    let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
                        .sqrt();
                    worst_joint = worst_joint.max(d);
                }
            }
        }
        // Pairwise frame-0 root distances.
        let n = scene.persons.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let a0 = scene.persons[i].root_pos[0];
                let b0 = scene.persons[j].root_pos[0];
                let a1 = decoded.motion.persons[i].root_pos[0];
                let b1 = decoded.motion.persons[j].root_pos[0];
                let d0 = ((a0[0] - b0[0]).powi(2) + (a0[2] - b0[2]).powi(2)).sqrt();
                let d1 = ((a1[0] - b1[0]).powi(2) + (a1[2] - b1[2]).powi(2)).sqrt();
                worst_pair = worst_pair.max((d0 - d1).abs());
            }
        }
    }
    conclude(
        1,
        "codec round trip",
        worst_joint < 1e-4 && worst_pair < 1e-6,
        &format!("max joint error {worst_joint:.2e} m, max pairwise drift {worst_pair:.2e} m over 100 scenes"),
    );
}

// ---------------------------------------------------------------------------
// 2. Grammar soundness

#[test]
fn acceptance_02_grammar_soundness() {
    let vocab = build_vocabulary(&["walk wave circle huddle follow".to_string()], 512, 512)
        .expect("vocabulary");
    let mut rng = ChaCha8Rng::seed_from_u64(0x6201);
    let mut round_trips = 0usize;
    for _ in 0..10_000 {
        let persons = rng.random_range(1..=5usize);
        let runs: Vec<Vec<u32>> = (0..persons)
            .map(|_| (0..rng.random_range(1..=100)).map(|_| rng.random_range(0..512)).collect())
            .collect();
        let rels: Vec<RelPoseBins> = (1..persons)
            .map(|_| RelPoseBins {
                x: rng.random_range(0..512),
                z: rng.random_range(0..512),
                theta: rng.random_range(0..512),
            })
            .collect();
        let seq = serialize_social(&runs, &rels, &vocab).unwrap();
        let parsed = parse_social(&seq, &vocab).unwrap();
        assert_eq!(parsed.persons, runs);
        assert_eq!(parsed.relposes, rels);
        round_trips += 1;
    }

    // Mutations guaranteed ungrammatical, each must fail with a position.
    let mut rejected = 0usize;
    for case in 0..1_000 {
        let persons = rng.random_range(1..=4usize);
        let runs: Vec<Vec<u32>> = (0..persons)
            .map(|_| (0..rng.random_range(1..=20)).map(|_| rng.random_range(0..512)).collect())
            .collect();
        let rels: Vec<RelPoseBins> = (1..persons)
            .map(|_| RelPoseBins { x: 1, z: 2, theta: 3 })
            .collect();
        let mut seq = serialize_social(&runs, &rels, &vocab).unwrap();
        match case % 6 {
            0 => {
                seq.remove(0); // no Motion_S
            }
            1 => {
                seq.pop(); // no Motion_E
            }
            2 => {
                // Text token inside the motion block.
                let at = 1 + (case % seq.len().saturating_sub(2));
                seq.insert(at.min(seq.len() - 1), TOKEN_EOS);
            }
            3 => {
                // Truncated triplet or empty-run injection: insert a lone x
                // token right before Motion_E.
                let at = seq.len() - 1;
                seq.insert(at, vocab.rel_x_token(7).unwrap());
            }
            4 => {
                seq.push(vocab.motion_token(0).unwrap()); // trailing tokens
            }
            _ => {
                // Misordered triplet: theta first.
                let at = seq.len() - 1;
                seq.insert(at, vocab.rel_theta_token(9).unwrap());
            }
        }
        match parse_social(&seq, &vocab) {
            Err(ParseError::Grammar { position, .. }) => {
                assert!(position <= seq.len());
                rejected += 1;
            }
            Err(ParseError::Vocab(_)) => panic!("mutation produced unknown ids"),
            Ok(_) => panic!("mutated sequence unexpectedly parsed (case {case})"),
        }
    }
    conclude(
        2,
        "grammar soundness",
        round_trips == 10_000 && rejected == 1_000,
        &format!("{round_trips} fuzz round trips, {rejected} mutations rejected with positions"),
    );
}

// ---------------------------------------------------------------------------
// 3. Quantization bounds

#[test]
fn acceptance_03_quantization_bounds() {
    let spec = BinSpec {
        x: AxisBins { min: -5.0, max: 5.0, bins: 512 },
        z: AxisBins { min: -4.0, max: 6.0, bins: 512 },
        theta: AxisBins { min: -std::f64::consts::PI, max: std::f64::consts::PI, bins: 512 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x6300);
    let mut worst_ratio = 0.0f64;
    for _ in 0..10_000 {
        let p = RelPose {
            x: rng.random_range(-5.0..5.0),
            z: rng.random_range(-4.0..6.0),
            theta: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        };
        let bins = bin_encode(&p, &spec).unwrap();
        let back = bin_decode(&bins, &spec).unwrap();
        worst_ratio = worst_ratio
            .max((back.x - p.x).abs() / (spec.x.width() / 2.0))
            .max((back.z - p.z).abs() / (spec.z.width() / 2.0))
            .max((back.theta - p.theta).abs() / (spec.theta.width() / 2.0));
    }

    // Nearest-entry quantization against an independent brute-force scan.
    let mut cb_rng = ChaCha8Rng::seed_from_u64(0x6301);
    let cb = Codebook::random(&mut cb_rng, 32, 8);
    let mut agree = 0usize;
    for _ in 0..1_000 {
        let latents = Mat::from_vec(
            16,
            8,
            (0..16 * 8).map(|_| cb_rng.random_range(-1.0..1.0)).collect(),
        );
        let q = quantize_latents(&latents, &cb).unwrap();
        for r in 0..16 {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for k in 0..cb.size {
                let mut d = 0.0;
                for i in 0..8 {
                    let diff = latents.row(r)[i] - cb.entry(k)[i];
                    d += diff * diff;
                }
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            assert_eq!(q.indices[r], best);
        }
        agree += 1;
    }
    conclude(
        3,
        "quantization bounds",
        worst_ratio <= 1.0 + 1e-12 && agree == 1_000,
        &format!(
            "worst bin error {worst_ratio:.4} of half-width; {agree} batches match brute force"
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Gradient correctness

#[test]
fn acceptance_04_gradient_correctness() {
    // Tokenizer, tiny config: d = 8, K = 4, T = 8 on the toy skeleton width.
    let vq_cfg = VQConfig {
        feature_dim: 59,
        codebook_size: 4,
        latent_dim: 8,
        hidden_dim: 8,
        window: 8,
        seed: 0x64,
        ..Default::default()
    };
    let mut model = VQModel::new(vq_cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6400);
    let window = PersonFeatures {
        joints: 5,
        fps: 20.0,
        frames: 8,
        data: (0..8 * 59).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let frozen = vq_assignments(&model, &window).unwrap();
    model.zero_grad();
    vq_backward(&mut model, &window, Some(&frozen)).unwrap();
    let analytic = model.flatten_grads();
    let base = model.flatten_params();
    let h = 1e-5;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] += h;
        model.unflatten_params(&p);
        let up = vq_loss(&model, &window, Some(&frozen)).unwrap().total;
        p[i] = base[i] - h;
        model.unflatten_params(&p);
        let down = vq_loss(&model, &window, Some(&frozen)).unwrap().total;
        p[i] = base[i];
        model.unflatten_params(&p);
        let fd = (up - down) / (2.0 * h);
        num += (fd - analytic[i]) * (fd - analytic[i]);
        den += fd * fd;
    }
    let vq_rel = (num / den.max(1e-300)).sqrt();

    // Language model, tiny config: width 16, 1+1 layers, |V| = 64.
    let mut lm = Seq2SeqModel::new(ModelConfig {
        vocab_size: 64,
        dim: 16,
        enc_layers: 1,
        dec_layers: 1,
        heads: 2,
        ffn_dim: 32,
        max_len: 16,
        dropout: 0.0,
        seed: 0x65,
    })
    .unwrap();
    // Perturb the zero-initialized head so gradients flow everywhere.
    let mut head_rng = ChaCha8Rng::seed_from_u64(0x6401);
    lm.visit_params(&mut |name, p| {
        if name == "out_proj.w" {
            for v in p.w.iter_mut() {
                *v = 0.02 * gaussian(&mut head_rng);
            }
        }
    });
    let pairs = [
        TaskPair { task: "a".into(), input: vec![5, 9, 2], target: vec![11, 3] },
        TaskPair { task: "b".into(), input: vec![40, 41], target: vec![7, 8, 9] },
    ];
    let tokens: usize = pairs.iter().map(|p| p.target.len()).sum();
    let scale = 1.0 / tokens as f64;
    lm.zero_grad();
    for pair in &pairs {
        let cache = lm.forward_pair(pair, None).unwrap();
        lm.backward_pair(&cache, scale);
    }
    let analytic = lm.flatten_grads();
    let base = lm.flatten_params();
    let loss_of = |m: &Seq2SeqModel| -> f64 {
        pairs.iter().map(|p| m.forward_pair(p, None).unwrap().loss_sum).sum::<f64>() * scale
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] += h;
        lm.unflatten_params(&p);
        let up = loss_of(&lm);
        p[i] = base[i] - h;
        lm.unflatten_params(&p);
        let down = loss_of(&lm);
        p[i] = base[i];
        lm.unflatten_params(&p);
        let fd = (up - down) / (2.0 * h);
        num += (fd - analytic[i]) * (fd - analytic[i]);
        den += fd * fd;
    }
    let lm_rel = (num / den.max(1e-300)).sqrt();

    conclude(
        4,
        "gradient correctness",
        vq_rel < 1e-4 && lm_rel < 1e-3,
        &format!("tokenizer relative error {vq_rel:.2e} (< 1e-4), language model {lm_rel:.2e} (< 1e-3)"),
    );
}

// ---------------------------------------------------------------------------
// 5. VQ training

fn training_windows(skel: &SkeletonDef, window: usize, count: usize) -> Vec<PersonFeatures> {
    let scenes = scene_pool(skel, 60, 10.0);
    let mut features = Vec::new();
    for scene in &scenes {
        for person in &scene.persons {
            let (canonical, _) = canonicalize_person(person, skel).unwrap();
            features.push(encode_person_h3d(&canonical, skel).unwrap());
        }
    }
    let mut windows = social_motion::vq::slice_windows(&features, window);
    windows.truncate(count);
    assert!(windows.len() == count, "need {count} windows, got {}", windows.len());
    windows
}

#[test]
fn acceptance_05_vq_training() {
    let skel = SkeletonDef::default_22();
    let windows = training_windows(&skel, 32, 500);
    let mut tail_recon = Vec::new();
    let mut detail = String::new();
    let mut halved = false;
    let mut utilized = 0.0;
    for (i, k) in [32usize, 64, 128].iter().enumerate() {
        let cfg = VQConfig {
            feature_dim: 263,
            codebook_size: *k,
            latent_dim: 32,
            hidden_dim: 48,
            window: 32,
            batch_size: 8,
            iterations: 2000,
            learning_rate: 3e-4,
            seed: 0x6500,
            ..Default::default()
        };
        let (_, curve) = train_vq(&windows, &cfg).unwrap();
        let at_10 = curve.losses[9].reconstruction;
        let tail = &curve.losses[curve.losses.len() - 100..];
        let final_recon =
            tail.iter().map(|l| l.reconstruction).sum::<f64>() / tail.len() as f64;
        tail_recon.push(final_recon);
        if i == 2 {
            halved = final_recon <= 0.5 * at_10;
            utilized = curve.final_utilization;
            detail = format!(
                "K=128: recon {at_10:.4} @iter10 -> {final_recon:.4} at convergence, utilization {:.0}%",
                100.0 * utilized
            );
        }
    }
    let monotone = tail_recon[0] >= tail_recon[1] && tail_recon[1] >= tail_recon[2];
    conclude(
        5,
        "tokenizer training",
        halved && utilized >= 0.30 && monotone,
        &format!(
            "{detail}; recon by K {:.4} / {:.4} / {:.4} (monotone: {monotone})",
            tail_recon[0], tail_recon[1], tail_recon[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Representation comparison (feature-space quantization)

/// Seeded Lloyd's k-means over feature rows.
fn kmeans(rows: &[Vec<f64>], k: usize, iters: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rows[0].len();
    let mut centroids: Vec<Vec<f64>> =
        (0..k).map(|_| rows[rng.random_range(0..rows.len())].clone()).collect();
    let mut assign = vec![0usize; rows.len()];
    for _ in 0..iters {
        for (i, row) in rows.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let mut d = 0.0;
                for (a, b) in row.iter().zip(centroid) {
                    d += (a - b) * (a - b);
                }
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (row, &a) in rows.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(row) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
        }
    }
    centroids
}

fn quantize_rows(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let mut d = 0.0;
                for (a, b) in row.iter().zip(centroid) {
                    d += (a - b) * (a - b);
                }
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            centroids[best].clone()
        })
        .collect()
}

/// Global-absolute variant: per frame, world joint positions, velocities,
/// local 6D rotations and contacts (262 wide for 22 joints).
fn encode_global(person: &social_motion::motion::RawMotion, skel: &SkeletonDef) -> Vec<Vec<f64>> {
    use social_motion::rotation::Rot6d;
    let positions = forward_kinematics(person, skel).unwrap();
    let j = skel.joint_count();
    let frames = person.frames();
    let contacts = social_motion::xh3d::detect_foot_contacts(&positions, skel, 2e-3);
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let v = if t + 1 < frames { t } else { frames - 2 };
        let mut row = Vec::with_capacity(3 * j + 3 * j + 6 * (j - 1) + 4);
        for joint in 0..j {
            row.extend_from_slice(&positions.get(t, joint));
        }
        for joint in 0..j {
            let a = positions.get(v, joint);
            let b = positions.get(v + 1, joint);
            row.extend_from_slice(&[b[0] - a[0], b[1] - a[1], b[2] - a[2]]);
        }
        for joint in 1..j {
            let six = Rot6d::from_quaternion(&person.rotations[t][joint]).unwrap();
            row.extend_from_slice(&six.0);
        }
        row.extend_from_slice(&contacts[t]);
        out.push(row);
    }
    out
}

#[test]
fn acceptance_06_representation_comparison() {
    let skel = SkeletonDef::default_22();
    let scenes = scene_pool(&skel, 12, 8.0);
    let k = 64;

    let mut xh3d_rows: Vec<Vec<f64>> = Vec::new();
    let mut global_rows: Vec<Vec<f64>> = Vec::new();
    let mut persons = Vec::new();
    for scene in &scenes {
        for person in &scene.persons {
            let (canonical, _) = canonicalize_person(person, &skel).unwrap();
            let feats = encode_person_h3d(&canonical, &skel).unwrap();
            for t in 0..feats.frames {
                xh3d_rows.push(feats.row(t).to_vec());
            }
            global_rows.extend(encode_global(&canonical, &skel));
            persons.push((canonical, feats));
        }
    }

    // Identically configured codebooks: same K, iterations and seed.
    let xh3d_centroids = kmeans(&xh3d_rows, k, 12, 0x6600);
    let global_centroids = kmeans(&global_rows, k, 12, 0x6600);

    let mut pred_x = Vec::new();
    let mut pred_g = Vec::new();
    let mut truth = Vec::new();
    for (canonical, feats) in &persons {
        let gt = forward_kinematics(canonical, &skel).unwrap();

        // XH3D route: quantize feature rows, decode through the codec.
        let rows: Vec<Vec<f64>> = (0..feats.frames).map(|t| feats.row(t).to_vec()).collect();
        let quantized = quantize_rows(&rows, &xh3d_centroids);
        let mut qf = feats.clone();
        // Contacts must stay binary for the decoder contract.
        let cf = FeatureLayout::new(22).foot_contacts();
        for (t, row) in quantized.iter().enumerate() {
            qf.row_mut(t).copy_from_slice(row);
            for c in cf.clone() {
                let v = qf.row(t)[c];
                qf.row_mut(t)[c] = if v >= 0.5 { 1.0 } else { 0.0 };
            }
        }
        let decoded = decode_person_h3d(&qf, &skel).unwrap();
        pred_x.push(decoded.positions);

        // Global route: quantized world positions are the reconstruction.
        let rows = encode_global(canonical, &skel);
        let quantized = quantize_rows(&rows, &global_centroids);
        let mut pos = Positions::zeros(feats.frames, 22);
        for (t, row) in quantized.iter().enumerate() {
            for joint in 0..22 {
                pos.set(t, joint, [row[3 * joint], row[3 * joint + 1], row[3 * joint + 2]]);
            }
        }
        pred_g.push(pos);
        truth.push(gt);
    }

    let accel_xh3d = accel_error(&pred_x, &truth).unwrap();
    let accel_global = accel_error(&pred_g, &truth).unwrap();
    conclude(
        6,
        "representation comparison",
        accel_xh3d < accel_global,
        &format!(
            "reconstruction Accel {accel_xh3d:.2} (canonical features) vs {accel_global:.2} (global positions), mm/frame^2"
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Language model mechanism

fn memorization_corpus(
    skel: &SkeletonDef,
    vocab: &UnifiedVocabulary,
) -> (Vec<TaskPair>, Vec<usize>) {
    // Short scenes with few persons keep targets memorizable.
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
    let mut scenes = Vec::new();
    let mut i = 0;
    while scenes.len() < 16 {
        let pattern = ScenePattern::ALL[i % ScenePattern::ALL.len()];
        let persons = rng.random_range(pattern.min_persons()..=3);
        let spec = SynthSpec {
            persons,
            pattern,
            duration_s: rng.random_range(2.0..3.0),
            walk_speed: rng.random_range(0.8..1.4),
            seed: 0x700 + i as u64,
        };
        scenes.push(synth_scene(&spec, skel).expect("feasible spec").scene);
        i += 1;
    }
    // Cheap frame-level tokenization: a k-means codebook over canonical
    // features stands in for the trained tokenizer (the criterion tests the
    // language model mechanism, not reconstruction quality).
    let mut rows = Vec::new();
    let mut encoded = Vec::new();
    for scene in &scenes {
        let features = encode_social(scene, skel, ReferenceChoice::Index(0)).unwrap();
        for p in &features.persons {
            for t in (0..p.frames).step_by(4) {
                rows.push(p.row(t).to_vec());
            }
        }
        encoded.push(features);
    }
    let centroids = kmeans(&rows, 64, 8, 0x6700);
    let spec = BinSpec {
        x: AxisBins { min: -8.0, max: 8.0, bins: 64 },
        z: AxisBins { min: -8.0, max: 8.0, bins: 64 },
        theta: AxisBins { min: -std::f64::consts::PI, max: std::f64::consts::PI, bins: 64 },
    };
    let bases = [
        "walk toward", "walk circle", "stand wave", "walk line", "stand huddle",
        "drift close", "turn around", "step apart",
    ];
    let takes = [
        "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india",
        "juliet", "kilo", "lima", "mike", "november", "oscar", "papa",
    ];
    let mut pairs = Vec::new();
    let mut motion_targets = Vec::new();
    for (i, features) in encoded.iter().enumerate() {
        let runs: Vec<Vec<u32>> = features
            .persons
            .iter()
            .map(|p| {
                (0..p.frames)
                    .step_by(4)
                    .map(|t| {
                        let mut best = 0u32;
                        let mut best_d = f64::INFINITY;
                        for (c, centroid) in centroids.iter().enumerate() {
                            let mut d = 0.0;
                            for (a, b) in p.row(t).iter().zip(centroid) {
                                d += (a - b) * (a - b);
                            }
                            if d < best_d {
                                best_d = d;
                                best = c as u32;
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect();
        let rel_bins: Vec<RelPoseBins> =
            features.relposes.iter().map(|p| bin_encode(p, &spec).unwrap()).collect();
        let scene = TokenizedScene {
            caption: format!("{} {}", bases[i % bases.len()], takes[i % takes.len()]),
            runs,
            rel_bins,
            frames: features.persons[0].frames,
            fps: 20.0,
        };
        let t2m = build_task_pair(SupervisedTask::TextToMotion, &scene, vocab, i as u64).unwrap();
        motion_targets.push(pairs.len());
        pairs.push(t2m);
        if let Ok(fc) = build_task_pair(SupervisedTask::Forecast, &scene, vocab, i as u64) {
            motion_targets.push(pairs.len());
            pairs.push(fc);
        } else {
            pairs.push(
                build_task_pair(SupervisedTask::MotionToText, &scene, vocab, i as u64).unwrap(),
            );
        }
    }
    pairs.truncate(32);
    let motion_targets = motion_targets.into_iter().filter(|&i| i < 32).collect();
    (pairs, motion_targets)
}

#[test]
fn acceptance_07_lm_mechanism() {
    let skel = SkeletonDef::default_22();
    let vocab = build_vocabulary(
        &[
            "walk toward circle stand wave line huddle drift close turn around step apart"
                .to_string(),
            "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima mike \
             november oscar papa predict motion : generate reaction"
                .to_string(),
        ],
        64,
        64,
    )
    .unwrap();
    let (pairs, motion_pairs) = memorization_corpus(&skel, &vocab);
    assert_eq!(pairs.len(), 32);

    // Uniform-logit loss of a fresh model is exactly ln |V|.
    let vocab_size = vocab.size() as usize;
    let cfg = ModelConfig {
        vocab_size,
        dim: 96,
        enc_layers: 2,
        dec_layers: 2,
        heads: 4,
        ffn_dim: 256,
        max_len: pairs
            .iter()
            .map(|p| p.input.len().max(p.target.len()) + 1)
            .max()
            .unwrap()
            .max(16),
        dropout: 0.0,
        seed: 0x6701,
    };
    let mut model = Seq2SeqModel::new(cfg).unwrap();
    let uniform = model.pair_loss(&pairs[0]).unwrap();
    let ln_v = (vocab_size as f64).ln();
    let uniform_ok = (uniform - ln_v).abs() < 1e-6;

    // Memorize.
    let mut opt = AdamW::new(AdamWConfig { lr: 2e-3, warmup_steps: 20, ..Default::default() });
    let stops = [TOKEN_EOS, vocab.motion_end()];
    let mut exact = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6702);
    for step in 0..4_000 {
        let batch: Vec<TaskPair> =
            (0..8).map(|_| pairs[rng.random_range(0..pairs.len())].clone()).collect();
        lm_train_step(&batch, &mut model, &mut opt).unwrap();
        if step >= 500 && step % 250 == 0 {
            exact = pairs
                .iter()
                .filter(|p| {
                    let out = generate(&model, &p.input, Sampling::Greedy, 220, &stops).unwrap();
                    let want = &p.target[..p.target.len() - 1];
                    out.ids == want && out.stopped_at == Some(*p.target.last().unwrap())
                })
                .count();
            if exact * 10 >= pairs.len() * 9 {
                break;
            }
        }
    }
    let reproduction = exact as f64 / pairs.len() as f64;

    // Grammaticality of motion-task generations.
    let mut grammatical = 0usize;
    for &i in &motion_pairs {
        let out = generate(&model, &pairs[i].input, Sampling::Greedy, 220, &stops).unwrap();
        let mut ids = out.ids.clone();
        if out.stopped_at == Some(vocab.motion_end()) {
            ids.push(vocab.motion_end());
        }
        if parse_social(&ids, &vocab).is_ok() {
            grammatical += 1;
        }
    }
    let grammatical_rate = grammatical as f64 / motion_pairs.len() as f64;

    conclude(
        7,
        "language model mechanism",
        uniform_ok && reproduction >= 0.90 && grammatical_rate >= 0.95,
        &format!(
            "uniform loss {uniform:.9} vs ln|V| {ln_v:.9}; {:.0}% exact reproduction; {:.0}% grammatical motion generations",
            100.0 * reproduction,
            100.0 * grammatical_rate
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Span corruption

#[test]
fn acceptance_08_span_corruption() {
    let vocab = build_vocabulary(&["filler words for text".to_string()], 256, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6800);
    let mut ratio_sum = 0.0;
    let mut lossless = 0usize;
    let runs = 1_000;
    for seed in 0..runs {
        let len = rng.random_range(20..200);
        let seq: Vec<u32> =
            (0..len).map(|_| vocab.motion_token(rng.random_range(0..256)).unwrap()).collect();
        let pair = span_corrupt(&seq, 0.15, 3, seed, &vocab).unwrap();

        // Independent splice-back oracle.
        let mut spans: Vec<(u32, Vec<u32>)> = Vec::new();
        for &id in &pair.target {
            if vocab.is_sentinel(id) {
                spans.push((id, Vec::new()));
            } else if let Some(last) = spans.last_mut() {
                last.1.push(id);
            }
        }
        let mut rebuilt = Vec::new();
        for &id in &pair.input {
            if vocab.is_sentinel(id) {
                if let Some((_, body)) = spans.iter().find(|(s, _)| *s == id) {
                    rebuilt.extend(body.iter().copied());
                }
            } else {
                rebuilt.push(id);
            }
        }
        if rebuilt == seq {
            lossless += 1;
        }
        let sentinels = pair.input.iter().filter(|&&t| vocab.is_sentinel(t)).count();
        let corrupted = seq.len() + sentinels - pair.input.len();
        ratio_sum += corrupted as f64 / seq.len() as f64;
    }
    let mean_ratio = ratio_sum / runs as f64;
    conclude(
        8,
        "span corruption",
        lossless == runs as usize && (mean_ratio - 0.15).abs() < 0.05,
        &format!("{lossless}/{runs} lossless splice-backs, realized ratio {mean_ratio:.3}"),
    );
}

// ---------------------------------------------------------------------------
// 9. Metrics certification

#[test]
fn acceptance_09_metrics_certification() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6900);

    // FID identity and the analytic 1-D case.
    let x: Vec<Vec<f64>> = (0..400)
        .map(|_| (0..4).map(|_| gaussian(&mut rng)).collect())
        .collect();
    let fid_xx = fid(&x, &x).unwrap();
    let a: Vec<Vec<f64>> = (0..40_000).map(|_| vec![gaussian(&mut rng)]).collect();
    let b: Vec<Vec<f64>> = (0..40_000).map(|_| vec![1.0 + gaussian(&mut rng)]).collect();
    let fid_1d = fid(&a, &b).unwrap();

    // PA-MPJPE: never above MPJPE, absorbs similarity transforms.
    let mut pa_le_mpjpe = true;
    let mut worst_similarity = 0.0f64;
    for case in 0..50 {
        let frames = 3;
        let joints = 10;
        let mut gt = Positions::zeros(frames, joints);
        for t in 0..frames {
            for j in 0..joints {
                gt.set(t, j, [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..2.0),
                    rng.random_range(-1.0..1.0),
                ]);
            }
        }
        let mut pred = Positions::zeros(frames, joints);
        let yaw: f64 = rng.random_range(-3.0..3.0);
        let scale: f64 = rng.random_range(0.5..2.0);
        let (s, c) = yaw.sin_cos();
        let shift = [rng.random_range(-1.0..1.0), 0.3, rng.random_range(-1.0..1.0)];
        for t in 0..frames {
            for j in 0..joints {
                let v = gt.get(t, j);
                let noise = if case % 2 == 0 { 0.0 } else { rng.random_range(-0.05..0.05) };
                pred.set(t, j, [
                    scale * (c * v[0] + s * v[2]) + shift[0] + noise,
                    scale * v[1] + shift[1],
                    scale * (-s * v[0] + c * v[2]) + shift[2],
                ]);
            }
        }
        let pa = pa_mpjpe(&[pred.clone()], &[gt.clone()]).unwrap();
        let raw = mpjpe(&[pred], &[gt]).unwrap();
        if pa > raw + 1e-9 {
            pa_le_mpjpe = false;
        }
        if case % 2 == 0 {
            worst_similarity = worst_similarity.max(pa);
        }
    }

    // Procrustes against the simplex-optimizer oracle.
    let n = 8;
    let src: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dst: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let aligned = procrustes_align(&src, &dst, 0).unwrap();
    let closed: f64 = aligned
        .chunks_exact(3)
        .zip(dst.chunks_exact(3))
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
        .sum();
    let oracle = simplex_similarity_fit(&src, &dst, &mut rng);
    let procrustes_ok = closed <= oracle.0 + 1e-9
        && aligned.iter().zip(&oracle.1).all(|(a, b)| (a - b).abs() < 1e-6);

    // Random-embedding retrieval at chance rate over 10k batches.
    let count = 32 * 10_000;
    let motion: Vec<Vec<f64>> =
        (0..count).map(|_| (0..4).map(|_| gaussian(&mut rng)).collect()).collect();
    let text: Vec<Vec<f64>> =
        (0..count).map(|_| (0..4).map(|_| gaussian(&mut rng)).collect()).collect();
    let r = r_precision_mm_dist(&motion, &text, 32, 0x6901).unwrap();

    let pass = fid_xx.abs() < 1e-6
        && (fid_1d - 1.0).abs() < 0.05
        && pa_le_mpjpe
        && worst_similarity < 1e-6
        && procrustes_ok
        && (r.top1 - 1.0 / 32.0).abs() < 0.02;
    conclude(
        9,
        "metrics certification",
        pass,
        &format!(
            "fid(X,X)={fid_xx:.2e}, 1-D fid={fid_1d:.3}, pa<=mpjpe={pa_le_mpjpe}, similarity residual {worst_similarity:.2e} mm, procrustes-oracle={procrustes_ok}, top1={:.4}",
            r.top1
        ),
    );
}

/// Nelder-Mead over (axis-angle, log-scale, translation), several restarts.
fn simplex_similarity_fit(
    src: &[f64],
    dst: &[f64],
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<f64>) {
    use social_motion::rotation::Quaternion;
    let apply = |params: &[f64]| -> Vec<f64> {
        let axis = [params[0], params[1], params[2]];
        let angle = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let q = if angle < 1e-12 {
            Quaternion::IDENTITY
        } else {
            Quaternion::from_axis_angle(
                [axis[0] / angle, axis[1] / angle, axis[2] / angle],
                angle,
            )
        };
        let scale = params[3].exp();
        src.chunks_exact(3)
            .flat_map(|p| {
                let r = q.rotate([p[0], p[1], p[2]]);
                [
                    scale * r[0] + params[4],
                    scale * r[1] + params[5],
                    scale * r[2] + params[6],
                ]
            })
            .collect()
    };
    let cost = |params: &[f64]| -> f64 {
        apply(params)
            .chunks_exact(3)
            .zip(dst.chunks_exact(3))
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
            .sum()
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    for restart in 0..8 {
        let mut point = vec![0.0; 7];
        if restart > 0 {
            for v in point.iter_mut().take(3) {
                *v = rng.random_range(-2.5..2.5);
            }
        }
        // Simplex loop.
        let n = 7;
        let mut simplex = vec![point.clone()];
        for i in 0..n {
            let mut p = point.clone();
            p[i] += 0.5;
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| cost(p)).collect();
        for _ in 0..6_000 {
            let mut order: Vec<usize> = (0..simplex.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let (bi, wi, si) = (order[0], order[n], order[n - 1]);
            if (values[wi] - values[bi]).abs() < 1e-17 {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (i, p) in simplex.iter().enumerate() {
                if i == wi {
                    continue;
                }
                for k in 0..n {
                    centroid[k] += p[k] / n as f64;
                }
            }
            let reflect: Vec<f64> =
                (0..n).map(|k| 2.0 * centroid[k] - simplex[wi][k]).collect();
            let fr = cost(&reflect);
            if fr < values[bi] {
                let expand: Vec<f64> =
                    (0..n).map(|k| centroid[k] + 2.0 * (centroid[k] - simplex[wi][k])).collect();
                let fe = cost(&expand);
                if fe < fr {
                    simplex[wi] = expand;
                    values[wi] = fe;
                } else {
                    simplex[wi] = reflect;
                    values[wi] = fr;
                }
            } else if fr < values[si] {
                simplex[wi] = reflect;
                values[wi] = fr;
            } else {
                let contract: Vec<f64> =
                    (0..n).map(|k| centroid[k] + 0.5 * (simplex[wi][k] - centroid[k])).collect();
                let fc = cost(&contract);
                if fc < values[wi] {
                    simplex[wi] = contract;
                    values[wi] = fc;
                } else {
                    let bp = simplex[bi].clone();
                    for (i, p) in simplex.iter_mut().enumerate() {
                        if i != bi {
                            for k in 0..n {
                                p[k] = bp[k] + 0.5 * (p[k] - bp[k]);
                            }
                        }
                    }
                    for (i, p) in simplex.iter().enumerate() {
                        values[i] = cost(p);
                    }
                }
            }
        }
        let mut bi = 0;
        for i in 1..values.len() {
            if values[i] < values[bi] {
                bi = i;
            }
        }
        if best.as_ref().is_none_or(|(c, _)| values[bi] < *c) {
            best = Some((values[bi], simplex[bi].clone()));
        }
    }
    let (cost_best, params) = best.unwrap();
    (cost_best, apply_params(src, &params))
}

fn apply_params(src: &[f64], params: &[f64]) -> Vec<f64> {
    use social_motion::rotation::Quaternion;
    let axis = [params[0], params[1], params[2]];
    let angle = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let q = if angle < 1e-12 {
        Quaternion::IDENTITY
    } else {
        Quaternion::from_axis_angle([axis[0] / angle, axis[1] / angle, axis[2] / angle], angle)
    };
    let scale = params[3].exp();
    src.chunks_exact(3)
        .flat_map(|p| {
            let r = q.rotate([p[0], p[1], p[2]]);
            [scale * r[0] + params[4], scale * r[1] + params[5], scale * r[2] + params[6]]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 10. Augmentation invariance

#[test]
fn acceptance_10_augmentation_invariance() {
    let skel = SkeletonDef::default_22();
    let spec = BinSpec {
        x: AxisBins { min: -8.0, max: 8.0, bins: 512 },
        z: AxisBins { min: -8.0, max: 8.0, bins: 512 },
        theta: AxisBins { min: -std::f64::consts::PI, max: std::f64::consts::PI, bins: 512 },
    };
    // Placement error from bin-center quantization, per person.
    let tolerance = (spec.x.width().powi(2) + spec.z.width().powi(2)).sqrt() + 1e-6;

    let scenes: Vec<SocialMotion> = scene_pool(&skel, 20, 8.0)
        .into_iter()
        .filter(|s| s.persons.len() >= 2)
        .collect();
    assert!(scenes.len() >= 10);

    let quantized_distances = |features: &SocialFeatures| -> Vec<[f64; 2]> {
        // Decode with bin-quantized relative poses, report each person's
        // frame-0 planar root position.
        let mut placed = vec![[0.0f64, 0.0]];
        for rel in &features.relposes {
            let bins = bin_encode(rel, &spec).unwrap();
            let back = bin_decode(&bins, &spec).unwrap();
            placed.push([back.x, back.z]);
        }
        placed
    };

    let mut worst = 0.0f64;
    for (si, scene) in scenes.iter().enumerate() {
        let n = scene.persons.len();
        let base = encode_social(scene, &skel, ReferenceChoice::Index(0)).unwrap();
        let shuffled_scene = shuffle_persons(scene, 0xA0 + si as u64);
        let shuffled = encode_social(&shuffled_scene, &skel, ReferenceChoice::Index(0)).unwrap();

        // Identify each shuffled person by its frame-0 root in the original
        // scene (persons are distinct by construction).
        let original_roots: Vec<[f64; 3]> =
            scene.persons.iter().map(|p| p.root_pos[0]).collect();
        let mapping: Vec<usize> = shuffled_scene
            .persons
            .iter()
            .map(|p| {
                original_roots
                    .iter()
                    .position(|r| {
                        (r[0] - p.root_pos[0][0]).abs() < 1e-9
                            && (r[2] - p.root_pos[0][2]).abs() < 1e-9
                    })
                    .expect("person identity")
            })
            .collect();

        let base_pos = quantized_distances(&base);
        let shuf_pos = quantized_distances(&shuffled);
        // Compare every pairwise inter-person distance.
        for i in 0..n {
            for j in (i + 1)..n {
                let d_base = {
                    let (a, b) = (base_pos[i], base_pos[j]);
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                };
                // Positions of the same two persons in the shuffled decode.
                let pi = mapping.iter().position(|&m| m == i).unwrap();
                let pj = mapping.iter().position(|&m| m == j).unwrap();
                let d_shuf = {
                    let (a, b) = (shuf_pos[pi], shuf_pos[pj]);
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                };
                worst = worst.max((d_base - d_shuf).abs());
            }
        }
    }
    conclude(
        10,
        "augmentation invariance",
        worst <= 2.0 * tolerance,
        &format!(
            "worst pairwise distance drift {worst:.4} m within bin tolerance {:.4} m",
            2.0 * tolerance
        ),
    );
}
