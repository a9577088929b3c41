//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use social_motion::ckpt;
use social_motion::data::{
    build_manifest as build_manifest_impl, read_scene, synth_scene, write_scene, Manifest,
    SceneFile, ScenePattern, Split, SynthSpec,
};
use social_motion::grammar::{
    build_vocabulary, parse_social, shuffle_persons, UnifiedVocabulary, TOKEN_EOS,
};
use social_motion::lm::{
    build_task_pair, generate as lm_generate, train_stage2, train_stage3, GenerateOutcome,
    ModelConfig, PipelineConfig, Sampling, Seq2SeqModel, SupervisedTask, TaskCorpus, TaskPair,
    TemplateRegistry, TokenizedScene,
};
use social_motion::metrics::{
    accel_error, diversity, fid, mpjpe, multimodality, pa_mpjpe, r_precision_mm_dist, Embedder,
    MetricsReport,
};
use social_motion::motion::forward_kinematics;
use social_motion::pipeline::{detokenize_scene, scene_to_ids, tokenize_scene};
use social_motion::relpose::RelPoseBins;
use social_motion::skeleton::SkeletonDef;
use social_motion::vq::{slice_windows, train_vq as train_vq_impl, VQConfig};
use social_motion::xh3d::{
    canonicalize_person, decode_social, encode_person_h3d, encode_social, ReferenceChoice,
    SocialFeatures,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Default data root when --out / --root are omitted.
pub const DATA_ROOT_ENV: &str = "SOCIAL_MOTION_DATA_ROOT";

fn resolve_root(explicit: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    match explicit {
        Some(p) => Ok(p.clone()),
        None => std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from).ok_or_else(|| {
            anyhow::anyhow!("{flag} not given and {DATA_ROOT_ENV} is unset")
        }),
    }
}

/// Every run leaves a sidecar with its full configuration.
fn write_sidecar(target: &Path, command: &str, seed: Option<u64>, args: impl Serialize) -> Result<()> {
    let sidecar = if target.is_dir() {
        target.join("run-meta.json")
    } else {
        let mut name = target.file_name().unwrap_or_default().to_os_string();
        name.push(".meta.json");
        target.with_file_name(name)
    };
    let meta = serde_json::json!({
        "command": command,
        "version": VERSION,
        "seed": seed,
        "args": serde_json::to_value(args)?,
    });
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)?)
        .with_context(|| format!("writing sidecar {}", sidecar.display()))?;
    Ok(())
}

fn load_skeleton(path: &Option<PathBuf>) -> Result<SkeletonDef> {
    match path {
        Some(p) => Ok(SkeletonDef::from_json_file(p)?),
        None => Ok(SkeletonDef::default_22()),
    }
}

fn emit(json: bool, payload: serde_json::Value, human: String) {
    if json {
        println!("{payload}");
    } else {
        println!("{human}");
    }
}

fn parse_patterns(raw: &str) -> Result<Vec<ScenePattern>> {
    raw.split(',')
        .map(|p| match p.trim() {
            "approach" => Ok(ScenePattern::Approach),
            "circle-walk" => Ok(ScenePattern::CircleWalk),
            "wave" => Ok(ScenePattern::Wave),
            "follow" => Ok(ScenePattern::Follow),
            "huddle" => Ok(ScenePattern::Huddle),
            other => bail!("unknown pattern {other:?}"),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// synth-data

#[derive(Args, Debug, Serialize)]
pub struct SynthDataArgs {
    /// Output directory; falls back to $SOCIAL_MOTION_DATA_ROOT.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    min_persons: usize,
    #[arg(long, default_value_t = 5)]
    max_persons: usize,
    #[arg(long, default_value_t = 8.0)]
    duration: f64,
    #[arg(long, default_value_t = 1.2)]
    walk_speed: f64,
    /// Comma-separated pattern list.
    #[arg(long, default_value = "approach,circle-walk,wave,follow,huddle")]
    patterns: String,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

pub fn synth_data(args: SynthDataArgs, json: bool) -> Result<()> {
    let out = resolve_root(&args.out, "--out")?;
    let skel = load_skeleton(&args.skeleton)?;
    let patterns = parse_patterns(&args.patterns)?;
    std::fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    for i in 0..args.scenes {
        let pattern = patterns[i % patterns.len()];
        let lo = args.min_persons.max(pattern.min_persons());
        let hi = args.max_persons.max(lo);
        let persons = lo + (i / patterns.len()) % (hi - lo + 1);
        let spec = SynthSpec {
            persons,
            pattern,
            duration_s: args.duration,
            walk_speed: args.walk_speed,
            seed: args.seed.wrapping_add(i as u64),
        };
        let file = synth_scene(&spec, &skel)?;
        let path = out.join(format!("scene_{i:04}.scene"));
        write_scene(&path, &file)?;
        written.push(path);
    }
    write_sidecar(&out, "synth-data", Some(args.seed), &args)?;
    emit(
        json,
        serde_json::json!({"status": "ok", "scenes": written.len(), "out": out}),
        format!("wrote {} scenes under {}", written.len(), out.display()),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// build-manifest

#[derive(Args, Debug, Serialize)]
pub struct BuildManifestArgs {
    /// Scene directory; falls back to $SOCIAL_MOTION_DATA_ROOT.
    #[arg(long)]
    root: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// train,val,test ratios.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    ratios: String,
    #[arg(long, default_value_t = 512)]
    bins: usize,
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

pub fn build_manifest(args: BuildManifestArgs, json: bool) -> Result<()> {
    let root = resolve_root(&args.root, "--root")?;
    let skel = load_skeleton(&args.skeleton)?;
    let parts: Vec<f64> = args
        .ratios
        .split(',')
        .map(|p| p.trim().parse::<f64>().context("ratio parse"))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("--ratios needs three comma-separated values");
    }
    let manifest = build_manifest_impl(
        &root,
        [parts[0], parts[1], parts[2]],
        args.bins,
        args.margin,
        args.seed,
        &skel,
    )?;
    let out = args.out.clone().unwrap_or_else(|| root.join("manifest.json"));
    manifest.save_json(&out)?;
    write_sidecar(&out, "build-manifest", Some(args.seed), &args)?;
    let (train, val, test) = (
        manifest.scenes_in(Split::Train).count(),
        manifest.scenes_in(Split::Val).count(),
        manifest.scenes_in(Split::Test).count(),
    );
    emit(
        json,
        serde_json::json!({"status": "ok", "out": out, "train": train, "val": val, "test": test}),
        format!("manifest {} (train {train} / val {val} / test {test})", out.display()),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// encode / decode

#[derive(Args, Debug, Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Person index, or "random".
    #[arg(long, default_value = "0")]
    reference: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

fn reference_choice(raw: &str, seed: u64) -> Result<ReferenceChoice> {
    if raw == "random" {
        Ok(ReferenceChoice::Random(seed))
    } else {
        Ok(ReferenceChoice::Index(raw.parse().context("--reference")?))
    }
}

pub fn encode(args: EncodeArgs, json: bool) -> Result<()> {
    let skel = load_skeleton(&args.skeleton)?;
    let file = read_scene(&args.scene)?;
    let features = encode_social(&file.scene, &skel, reference_choice(&args.reference, args.seed)?)?;
    std::fs::write(&args.out, serde_json::to_string(&features)?)?;
    write_sidecar(&args.out, "encode", Some(args.seed), &args)?;
    emit(
        json,
        serde_json::json!({
            "status": "ok", "out": args.out,
            "persons": features.persons.len(), "frames": features.persons[0].frames,
            "width": features.persons[0].width(),
        }),
        format!(
            "encoded {} persons x {} frames x {} features -> {}",
            features.persons.len(),
            features.persons[0].frames,
            features.persons[0].width(),
            args.out.display()
        ),
    );
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct DecodeArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

pub fn decode(args: DecodeArgs, json: bool) -> Result<()> {
    let skel = load_skeleton(&args.skeleton)?;
    let features: SocialFeatures = serde_json::from_str(&std::fs::read_to_string(&args.features)?)?;
    let decoded = decode_social(&features, &skel)?;
    let mut scene = decoded.motion;
    for p in scene.persons.iter_mut() {
        p.quantize_f32();
    }
    let file = SceneFile { skeleton_id: skel.name.clone(), scene, captions: vec![] };
    write_scene(&args.out, &file)?;
    write_sidecar(&args.out, "decode", None, &args)?;
    emit(
        json,
        serde_json::json!({"status": "ok", "out": args.out, "persons": file.scene.persons.len()}),
        format!("decoded scene -> {}", args.out.display()),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// tokenize / detokenize

#[derive(Serialize, serde::Deserialize)]
struct TokenDoc {
    caption: String,
    fps: f64,
    frames: usize,
    runs: Vec<Vec<u32>>,
    rel_bins: Vec<RelPoseBins>,
    /// Surface form of the serialized sequence, when a vocabulary is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    surface: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct TokenizeArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    vq: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "0")]
    reference: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

pub fn tokenize(args: TokenizeArgs, json: bool) -> Result<()> {
    let skel = load_skeleton(&args.skeleton)?;
    let manifest = Manifest::load_json(&args.manifest)?;
    let model = ckpt::load_vq(&args.vq)?;
    let file = read_scene(&args.scene)?;
    let caption = file.captions.first().cloned().unwrap_or_default();
    let tokens = tokenize_scene(
        &file.scene,
        &skel,
        &model,
        &manifest.bin_spec,
        reference_choice(&args.reference, args.seed)?,
        &caption,
    )?;
    let surface = match &args.vocab {
        Some(path) => {
            let vocab = UnifiedVocabulary::load_json(path)?;
            Some(vocab.ids_to_text(&scene_to_ids(&tokens, &vocab)?)?)
        }
        None => None,
    };
    let doc = TokenDoc {
        caption: tokens.caption.clone(),
        fps: tokens.fps,
        frames: tokens.frames,
        runs: tokens.runs.clone(),
        rel_bins: tokens.rel_bins.clone(),
        surface,
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&doc)?)?;
    write_sidecar(&args.out, "tokenize", Some(args.seed), &args)?;
    emit(
        json,
        serde_json::json!({
            "status": "ok", "out": args.out,
            "tokens_per_person": doc.runs.iter().map(Vec::len).collect::<Vec<_>>(),
        }),
        format!(
            "tokenized {} persons ({} tokens each) -> {}",
            doc.runs.len(),
            doc.runs.first().map_or(0, Vec::len),
            args.out.display()
        ),
    );
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct DetokenizeArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    vq: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

pub fn detokenize(args: DetokenizeArgs, json: bool) -> Result<()> {
    let skel = load_skeleton(&args.skeleton)?;
    let manifest = Manifest::load_json(&args.manifest)?;
    let model = ckpt::load_vq(&args.vq)?;
    let doc: TokenDoc = serde_json::from_str(&std::fs::read_to_string(&args.tokens)?)?;
    let decoded = detokenize_scene(
        &doc.runs,
        &doc.rel_bins,
        &model,
        &manifest.bin_spec,
        &skel,
        doc.fps,
        Some(doc.frames),
    )?;
    let mut scene = decoded.motion;
    for p in scene.persons.iter_mut() {
        p.quantize_f32();
    }
    let file = SceneFile {
        skeleton_id: skel.name.clone(),
        scene,
        captions: vec![doc.caption],
    };
    write_scene(&args.out, &file)?;
    write_sidecar(&args.out, "detokenize", None, &args)?;
    emit(
        json,
        serde_json::json!({"status": "ok", "out": args.out, "frames": file.scene.frames()}),
        format!("reconstructed {} frames -> {}", file.scene.frames(), args.out.display()),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-vq

#[derive(Args, Debug, Serialize)]
pub struct TrainVqArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Tokenizer config JSON; overrides the individual hyperparameter flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    codebook: usize,
    #[arg(long, default_value_t = 64)]
    latent: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 32)]
    window: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

pub fn train_vq(args: TrainVqArgs, json: bool) -> Result<()> {
    let skel = load_skeleton(&args.skeleton)?;
    let manifest = Manifest::load_json(&args.manifest)?;
    let mut features = Vec::new();
    for entry in manifest.scenes_in(Split::Train) {
        let file = read_scene(&manifest.scene_path(entry))?;
        for person in &file.scene.persons {
            let (canonical, _) = canonicalize_person(person, &skel)?;
            features.push(encode_person_h3d(&canonical, &skel)?);
        }
    }

    let cfg = match &args.config {
        Some(path) => {
            let mut cfg: VQConfig =
                serde_json::from_str(&std::fs::read_to_string(path)?)?;
            cfg.feature_dim = features[0].width();
            cfg
        }
        None => VQConfig {
            feature_dim: features[0].width(),
            codebook_size: args.codebook,
            latent_dim: args.latent,
            hidden_dim: args.hidden,
            window: args.window,
            batch_size: args.batch,
            iterations: args.iterations,
            learning_rate: args.lr,
            seed: args.seed,
            ..Default::default()
        },
    };
    let windows = slice_windows(&features, cfg.window);
    if windows.is_empty() {
        bail!("training split yields no {}-frame windows", cfg.window);
    }
    let (mut model, curve) = train_vq_impl(&windows, &cfg)?;
    ckpt::save_vq(&args.out, &mut model)?;
    let curve_path = args.out.with_extension("curve.json");
    std::fs::write(&curve_path, serde_json::to_string(&curve)?)?;
    write_sidecar(&args.out, "train-vq", Some(args.seed), &args)?;
    let first = curve.losses.first().map(|l| l.total).unwrap_or(f64::NAN);
    let last = curve.losses.last().map(|l| l.total).unwrap_or(f64::NAN);
    emit(
        json,
        serde_json::json!({
            "status": "ok", "out": args.out, "windows": windows.len(),
            "first_loss": first, "final_loss": last,
            "utilization": curve.final_utilization,
        }),
        format!(
            "trained tokenizer on {} windows: loss {first:.4} -> {last:.4}, codebook utilization {:.1}% -> {}",
            windows.len(),
            100.0 * curve.final_utilization,
            args.out.display()
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train-lm

#[derive(Args, Debug, Serialize)]
pub struct TrainLmArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    vq: PathBuf,
    #[arg(long, value_parser = ["pretrain", "instruct"])]
    stage: String,
    /// Stage-2 checkpoint; required for the instruction stage.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Vocabulary path: written during pretraining, read afterwards.
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 256)]
    max_len: usize,
    /// Learning rate: pretraining uses it as-is, instruction tuning halves it.
    #[arg(long, default_value_t = 2e-4)]
    lr: f64,
    /// Shuffled person-order variants per scene (reference augmentation).
    #[arg(long, default_value_t = 2)]
    augment: usize,
    /// Instruction template registry JSON; defaults to the built-in set.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

/// Tokenize the training split (with person-order shuffling) and assemble
/// the corpus both stages draw from.
fn build_corpus(
    manifest: &Manifest,
    skel: &SkeletonDef,
    model: &social_motion::vq::VQModel,
    vocab: &UnifiedVocabulary,
    registry: &TemplateRegistry,
    max_len: usize,
    augment: usize,
    seed: u64,
) -> Result<(TaskCorpus, Vec<TokenizedScene>)> {
    let mut scenes = Vec::new();
    for (i, entry) in manifest.scenes_in(Split::Train).enumerate() {
        let file = read_scene(&manifest.scene_path(entry))?;
        let caption = file.captions.first().cloned().unwrap_or_default();
        for k in 0..augment.max(1) {
            let shuffle_seed = seed.wrapping_add((i * 131 + k) as u64);
            let shuffled = shuffle_persons(&file.scene, shuffle_seed);
            let tokens = tokenize_scene(
                &shuffled,
                skel,
                model,
                &manifest.bin_spec,
                ReferenceChoice::Index(0),
                &caption,
            )?;
            scenes.push(tokens);
        }
    }

    let mut corpus = TaskCorpus::default();
    for (i, scene) in scenes.iter().enumerate() {
        let mut push = |pair: Result<TaskPair, social_motion::lm::LmError>| {
            if let Ok(p) = pair {
                if p.input.len() <= max_len && p.target.len() <= max_len {
                    corpus.supervised.push(p);
                }
            }
        };
        push(build_task_pair(SupervisedTask::TextToMotion, scene, vocab, i as u64));
        push(build_task_pair(SupervisedTask::MotionToText, scene, vocab, i as u64));
        push(build_task_pair(SupervisedTask::Forecast, scene, vocab, i as u64));
        push(build_task_pair(SupervisedTask::Reaction, scene, vocab, i as u64));
        push(build_task_pair(SupervisedTask::Inbetween, scene, vocab, i as u64));

        // Unsupervised stream: caption then the serialized scene.
        let mut stream = vocab.encode_text(&scene.caption);
        stream.extend(scene_to_ids(scene, vocab)?);
        if stream.len() <= max_len {
            corpus.unsupervised_streams.push(stream);
        }
    }

    // Instruction pairs from the template registry.
    for (i, scene) in scenes.iter().enumerate() {
        let ids = scene_to_ids(scene, vocab)?;
        let motion_surface = vocab.ids_to_text(&ids)?;
        let mut slots = BTreeMap::new();
        slots.insert("Caption".to_string(), scene.caption.clone());
        slots.insert("Motion".to_string(), motion_surface);
        slots.insert("Frame".to_string(), scene.frames.to_string());
        slots.insert(
            "Second".to_string(),
            format!("{:.0}", scene.frames as f64 / scene.fps),
        );
        slots.insert("Human".to_string(), scene.runs.len().to_string());
        for task in [
            "text_to_motion",
            "text_to_motion_frame",
            "text_to_motion_second",
            "text_to_motion_human",
            "motion_to_text",
            "motion_to_frame",
            "motion_to_second",
            "motion_to_human",
            "caption_to_frame",
            "caption_to_human",
        ] {
            let template_id = format!("{task}/{}", i % 2);
            let rendered =
                social_motion::lm::render_instruction(registry, &template_id, &slots)?;
            let input = vocab.encode_mixed(&rendered.input)?;
            let mut target = vocab.encode_mixed(&rendered.output)?;
            if !target.last().is_some_and(|&t| t == vocab.motion_end()) {
                target.push(TOKEN_EOS);
            }
            if input.len() <= max_len && target.len() <= max_len && !target.is_empty() {
                corpus.instruction.push(TaskPair {
                    task: task.to_string(),
                    input,
                    target,
                });
            }
        }
    }
    Ok((corpus, scenes))
}

pub fn train_lm(args: TrainLmArgs, json: bool) -> Result<()> {
    if args.stage == "instruct" && args.init.is_none() {
        bail!("instruction tuning requires --init with the pretraining checkpoint");
    }
    let skel = load_skeleton(&args.skeleton)?;
    let manifest = Manifest::load_json(&args.manifest)?;
    let vq_model = ckpt::load_vq(&args.vq)?;

    let registry = match &args.templates {
        Some(path) => TemplateRegistry::load_json(path)?,
        None => TemplateRegistry::default(),
    };
    let vocab = if args.stage == "pretrain" {
        // Corpus text: captions plus the template prompt text.
        let mut corpus_text: Vec<String> = manifest
            .scenes
            .iter()
            .flat_map(|s| s.captions.clone())
            .collect();
        for t in &registry.templates {
            corpus_text.push(t.input.clone());
            corpus_text.push(t.output.clone());
        }
        let vocab = build_vocabulary(
            &corpus_text,
            vq_model.cfg.codebook_size as u32,
            manifest.bin_spec.x.bins as u32,
        )?;
        vocab.save_json(&args.vocab)?;
        vocab
    } else {
        UnifiedVocabulary::load_json(&args.vocab)?
    };

    let (corpus, _) = build_corpus(
        &manifest,
        &skel,
        &vq_model,
        &vocab,
        &registry,
        args.max_len,
        args.augment,
        args.seed,
    )?;

    let pipeline_cfg = PipelineConfig {
        pretrain_steps: args.steps,
        instruct_steps: args.steps,
        batch_size: args.batch,
        pretrain_lr: args.lr,
        instruct_lr: args.lr / 2.0,
        seed: args.seed,
        ..Default::default()
    };

    let (mut model, report) = match args.stage.as_str() {
        "pretrain" => {
            let cfg = ModelConfig {
                vocab_size: vocab.size() as usize,
                dim: args.dim,
                enc_layers: args.layers,
                dec_layers: args.layers,
                heads: args.heads,
                ffn_dim: args.dim * 4,
                max_len: args.max_len,
                dropout: 0.0,
                seed: args.seed,
            };
            let mut model = Seq2SeqModel::new(cfg)?;
            let report = train_stage2(&mut model, &corpus, &vocab, &pipeline_cfg)?;
            (model, report)
        }
        _ => {
            let init = args.init.clone().ok_or_else(|| {
                anyhow::anyhow!(
                    "instruction tuning requires --init with the pretraining checkpoint"
                )
            })?;
            let model = ckpt::load_lm(&init)?;
            let (model, report) = train_stage3(model, &corpus, &pipeline_cfg)?;
            (model, report)
        }
    };

    ckpt::save_lm(&args.out, &mut model)?;
    let report_path = args.out.with_extension("report.json");
    std::fs::write(&report_path, serde_json::to_string(&report)?)?;
    write_sidecar(&args.out, "train-lm", Some(args.seed), &args)?;
    emit(
        json,
        serde_json::json!({
            "status": "ok", "out": args.out, "stage": args.stage,
            "final_loss": report.final_loss(),
            "supervised": report.supervised_samples,
            "unsupervised": report.unsupervised_samples,
        }),
        format!(
            "{} stage done: final loss {:.4} -> {}",
            args.stage,
            report.final_loss(),
            args.out.display()
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// generate

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    lm: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    prompt: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = ["greedy", "topk"], default_value = "greedy")]
    sampling: String,
    #[arg(long, default_value_t = 8)]
    top_k: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    max_new: usize,
    /// With --vq and --manifest, grammatical outputs also decode to a scene.
    #[arg(long)]
    vq: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

pub fn generate(args: GenerateArgs, json: bool) -> Result<()> {
    let vocab = UnifiedVocabulary::load_json(&args.vocab)?;
    let model = ckpt::load_lm(&args.lm)?;
    let prompt_ids = vocab.encode_mixed(&args.prompt)?;
    let sampling = match args.sampling.as_str() {
        "topk" => Sampling::TopK { k: args.top_k, temperature: args.temperature, seed: args.seed },
        _ => Sampling::Greedy,
    };
    let stops = [TOKEN_EOS, vocab.motion_end()];
    let outcome: GenerateOutcome =
        lm_generate(&model, &prompt_ids, sampling, args.max_new, &stops)?;
    // Motion outputs keep their closing delimiter so the surface parses.
    let mut ids = outcome.ids.clone();
    if outcome.stopped_at == Some(vocab.motion_end()) {
        ids.push(vocab.motion_end());
    }
    let surface = vocab.ids_to_text(&ids)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("tokens.txt"), &surface)?;

    let mut decoded_scene = None;
    if let (Some(vq_path), Some(manifest_path)) = (&args.vq, &args.manifest) {
        if let Ok(parsed) = parse_social(&ids, &vocab) {
            let skel = load_skeleton(&args.skeleton)?;
            let manifest = Manifest::load_json(manifest_path)?;
            let vq_model = ckpt::load_vq(vq_path)?;
            let decoded = detokenize_scene(
                &parsed.persons,
                &parsed.relposes,
                &vq_model,
                &manifest.bin_spec,
                &skel,
                20.0,
                None,
            )?;
            let mut scene = decoded.motion;
            for p in scene.persons.iter_mut() {
                p.quantize_f32();
            }
            let file = SceneFile {
                skeleton_id: skel.name.clone(),
                scene,
                captions: vec![args.prompt.clone()],
            };
            let scene_path = args.out.join("generated.scene");
            write_scene(&scene_path, &file)?;
            decoded_scene = Some(scene_path);
        }
    }
    write_sidecar(&args.out, "generate", Some(args.seed), &args)?;
    emit(
        json,
        serde_json::json!({
            "status": "ok", "out": args.out, "tokens": ids.len(),
            "truncated": outcome.truncated,
            "scene": decoded_scene,
            "surface": surface,
        }),
        format!(
            "generated {} tokens{}{}",
            ids.len(),
            if outcome.truncated { " (truncated)" } else { "" },
            decoded_scene
                .map(|p| format!(", decoded scene -> {}", p.display()))
                .unwrap_or_default()
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    /// Reference scene directory.
    #[arg(long)]
    real: PathBuf,
    /// Generated/compared scene directory.
    #[arg(long)]
    gen: PathBuf,
    /// Comma-separated subset of: mpjpe,pa_mpjpe,accel,fid,diversity,mmodality,r_precision.
    #[arg(long, default_value = "fid,diversity,mpjpe,pa_mpjpe,accel")]
    metrics: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pairs: usize,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

fn scene_files(dir: &Path) -> Result<Vec<(String, SceneFile)>> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "scene"))
        .collect();
    paths.sort();
    for p in paths {
        let name = p.file_name().unwrap_or_default().to_string_lossy().to_string();
        out.push((name, read_scene(&p)?));
    }
    if out.is_empty() {
        bail!("no scene files under {}", dir.display());
    }
    Ok(out)
}

fn scene_embedding(file: &SceneFile, skel: &SkeletonDef) -> Result<Vec<f64>> {
    let features = encode_social(&file.scene, skel, ReferenceChoice::Index(0))?;
    Ok(Embedder.embed_motion(&features))
}

pub fn evaluate(args: EvaluateArgs, json: bool) -> Result<()> {
    let skel = load_skeleton(&args.skeleton)?;
    let wanted: Vec<&str> = args.metrics.split(',').map(str::trim).collect();
    let real = scene_files(&args.real)?;
    let generated = scene_files(&args.gen)?;

    let mut report = MetricsReport::empty(args.seed);
    report.sample_count = generated.len();

    // Position metrics pair scenes by file name.
    if wanted.iter().any(|m| ["mpjpe", "pa_mpjpe", "accel"].contains(m)) {
        let mut pred = Vec::new();
        let mut gt = Vec::new();
        for (name, gen_scene) in &generated {
            if let Some((_, real_scene)) = real.iter().find(|(n, _)| n == name) {
                for (pg, pr) in gen_scene.scene.persons.iter().zip(&real_scene.scene.persons) {
                    pred.push(forward_kinematics(pg, &skel)?);
                    gt.push(forward_kinematics(pr, &skel)?);
                }
            }
        }
        if pred.is_empty() {
            bail!("position metrics need matching file names in --real and --gen");
        }
        if wanted.contains(&"mpjpe") {
            report.mpjpe_mm = Some(mpjpe(&pred, &gt)?);
        }
        if wanted.contains(&"pa_mpjpe") {
            report.pa_mpjpe_mm = Some(pa_mpjpe(&pred, &gt)?);
        }
        if wanted.contains(&"accel") {
            report.accel_mm_per_frame2 = Some(accel_error(&pred, &gt)?);
        }
    }

    if wanted.iter().any(|m| ["fid", "diversity", "mmodality", "r_precision"].contains(m)) {
        let real_feats: Vec<Vec<f64>> =
            real.iter().map(|(_, f)| scene_embedding(f, &skel)).collect::<Result<_>>()?;
        let gen_feats: Vec<Vec<f64>> =
            generated.iter().map(|(_, f)| scene_embedding(f, &skel)).collect::<Result<_>>()?;
        if wanted.contains(&"fid") {
            report.fid = Some(fid(&real_feats, &gen_feats)?);
        }
        if wanted.contains(&"diversity") {
            let pairs = args.pairs.min(gen_feats.len() / 2);
            report.diversity = Some(diversity(&gen_feats, pairs, args.seed)?);
        }
        if wanted.contains(&"mmodality") {
            let mut groups: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
            for ((_, file), feat) in generated.iter().zip(&gen_feats) {
                let caption = file.captions.first().cloned().unwrap_or_default();
                groups.entry(caption).or_default().push(feat.clone());
            }
            let groups: Vec<Vec<Vec<f64>>> =
                groups.into_values().filter(|g| g.len() >= 2).collect();
            if !groups.is_empty() {
                report.mmodality = Some(multimodality(&groups, args.pairs, args.seed)?);
            }
        }
        if wanted.contains(&"r_precision") {
            let text_feats: Vec<Vec<f64>> = generated
                .iter()
                .map(|(_, f)| Embedder.embed_text(f.captions.first().map(String::as_str).unwrap_or("")))
                .collect();
            let r = r_precision_mm_dist(&gen_feats, &text_feats, 32, args.seed)?;
            report.r_precision_top1 = Some(r.top1);
            report.r_precision_top2 = Some(r.top2);
            report.r_precision_top3 = Some(r.top3);
            report.mm_dist = Some(r.mm_dist);
        }
    }

    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
        write_sidecar(out, "evaluate", Some(args.seed), &args)?;
    }
    emit(json, serde_json::to_value(&report)?, report.to_table());
    Ok(())
}

// ---------------------------------------------------------------------------
// inspect

#[derive(Args, Debug, Serialize)]
pub struct InspectArgs {
    #[arg(long)]
    path: PathBuf,
}

pub fn inspect(args: InspectArgs, json: bool) -> Result<()> {
    let bytes = std::fs::read(&args.path)?;
    let payload = if bytes.starts_with(b"SCNE") {
        let file = read_scene(&args.path)?;
        serde_json::json!({
            "type": "scene",
            "persons": file.scene.persons.len(),
            "frames": file.scene.frames(),
            "fps": file.scene.fps,
            "skeleton": file.skeleton_id,
            "captions": file.captions,
        })
    } else if bytes.starts_with(b"SMCK") {
        match ckpt::load_vq(&args.path) {
            Ok(model) => serde_json::json!({
                "type": "tokenizer checkpoint",
                "codebook": model.cfg.codebook_size,
                "latent_dim": model.cfg.latent_dim,
                "feature_dim": model.cfg.feature_dim,
            }),
            Err(_) => {
                let model = ckpt::load_lm(&args.path)?;
                serde_json::json!({
                    "type": "language model checkpoint",
                    "vocab": model.cfg.vocab_size,
                    "dim": model.cfg.dim,
                    "enc_layers": model.cfg.enc_layers,
                    "dec_layers": model.cfg.dec_layers,
                })
            }
        }
    } else if let Ok(manifest) = Manifest::load_json(&args.path) {
        serde_json::json!({
            "type": "manifest",
            "scenes": manifest.scenes.len(),
            "train": manifest.scenes_in(Split::Train).count(),
            "val": manifest.scenes_in(Split::Val).count(),
            "test": manifest.scenes_in(Split::Test).count(),
        })
    } else if let Ok(vocab) = UnifiedVocabulary::load_json(&args.path) {
        serde_json::json!({
            "type": "vocabulary",
            "size": vocab.size(),
            "text_tokens": vocab.text_size(),
            "motion_tokens": vocab.motion_codes,
            "rel_bins": vocab.rel_bins,
        })
    } else {
        bail!("unrecognized file {}", args.path.display());
    };
    emit(json, payload.clone(), serde_json::to_string_pretty(&payload)?);
    Ok(())
}
