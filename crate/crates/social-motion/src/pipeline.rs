//! End-to-end glue: scene -> tokens and tokens -> scene, composing the
//! codec, the motion tokenizer, the relative-pose bins and the grammar.

use thiserror::Error;

use crate::grammar::{parse_social, serialize_social, ParseError, UnifiedVocabulary};
use crate::lm::TokenizedScene;
use crate::motion::SocialMotion;
use crate::relpose::{bin_decode, bin_encode, BinError, BinSpec, RelPoseBins};
use crate::skeleton::SkeletonDef;
use crate::vq::{vq_decode, vq_encode, VQError, VQModel};
use crate::xh3d::{decode_social, encode_social, CodecError, DecodedScene, ReferenceChoice, SocialFeatures};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Vq(#[from] VQError),
    #[error(transparent)]
    Bins(#[from] BinError),
    #[error(transparent)]
    Grammar(#[from] ParseError),
}

/// Tokenize a scene: canonicalize and encode every person, quantize each
/// feature matrix to motion tokens, and bin the relative poses.
pub fn tokenize_scene(
    scene: &SocialMotion,
    skel: &SkeletonDef,
    model: &VQModel,
    bins: &BinSpec,
    reference: ReferenceChoice,
    caption: &str,
) -> Result<TokenizedScene, PipelineError> {
    let features = encode_social(scene, skel, reference)?;
    tokenize_features(&features, model, bins, caption)
}

pub fn tokenize_features(
    features: &SocialFeatures,
    model: &VQModel,
    bins: &BinSpec,
    caption: &str,
) -> Result<TokenizedScene, PipelineError> {
    let mut runs = Vec::with_capacity(features.persons.len());
    for person in &features.persons {
        runs.push(vq_encode(person, model)?);
    }
    let rel_bins: Vec<RelPoseBins> = features
        .relposes
        .iter()
        .map(|p| bin_encode(p, bins))
        .collect::<Result<_, _>>()?;
    Ok(TokenizedScene {
        caption: caption.to_string(),
        runs,
        rel_bins,
        frames: features.persons.first().map_or(0, |p| p.frames),
        fps: features.fps,
    })
}

/// Reconstruct a scene from per-person token runs and binned relative poses.
/// Decoded features run through the motion decoder, relative poses through
/// the bin centers; extra frames introduced by window padding are trimmed to
/// `frames` when given.
pub fn detokenize_scene(
    runs: &[Vec<u32>],
    rel_bins: &[RelPoseBins],
    model: &VQModel,
    bins: &BinSpec,
    skel: &SkeletonDef,
    fps: f64,
    frames: Option<usize>,
) -> Result<DecodedScene, PipelineError> {
    let mut persons = Vec::with_capacity(runs.len());
    for run in runs {
        let mut features = vq_decode(run, model, fps)?;
        if let Some(want) = frames {
            if want < features.frames {
                let width = features.width();
                features.data.truncate(want * width);
                features.frames = want;
            }
        }
        persons.push(features);
    }
    let relposes = rel_bins
        .iter()
        .map(|b| bin_decode(b, bins))
        .collect::<Result<Vec<_>, _>>()?;
    let features = SocialFeatures { reference: 0, fps, persons, relposes };
    Ok(decode_social(&features, skel)?)
}

/// Serialize a tokenized scene into the unified id space.
pub fn scene_to_ids(
    scene: &TokenizedScene,
    vocab: &UnifiedVocabulary,
) -> Result<Vec<u32>, PipelineError> {
    Ok(serialize_social(&scene.runs, &scene.rel_bins, vocab)?)
}

/// Parse an id sequence and reconstruct the scene it encodes.
pub fn ids_to_scene(
    ids: &[u32],
    vocab: &UnifiedVocabulary,
    model: &VQModel,
    bins: &BinSpec,
    skel: &SkeletonDef,
    fps: f64,
) -> Result<DecodedScene, PipelineError> {
    let parsed = parse_social(ids, vocab)?;
    detokenize_scene(&parsed.persons, &parsed.relposes, model, bins, skel, fps, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_scene, ScenePattern, SynthSpec};
    use crate::grammar::build_vocabulary;
    use crate::relpose::AxisBins;
    use crate::vq::VQConfig;

    #[test]
    fn tokenize_detokenize_shapes_line_up() {
        let skel = SkeletonDef::default_22();
        let file = synth_scene(
            &SynthSpec {
                persons: 2,
                pattern: ScenePattern::Approach,
                duration_s: 4.0,
                walk_speed: 1.0,
                seed: 3,
            },
            &skel,
        )
        .unwrap();
        let model = VQModel::new(VQConfig {
            feature_dim: 263,
            codebook_size: 16,
            latent_dim: 8,
            hidden_dim: 12,
            window: 16,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let bins = BinSpec {
            x: AxisBins { min: -5.0, max: 5.0, bins: 64 },
            z: AxisBins { min: -5.0, max: 5.0, bins: 64 },
            theta: AxisBins { min: -std::f64::consts::PI, max: std::f64::consts::PI, bins: 64 },
        };
        let tokens = tokenize_scene(
            &file.scene,
            &skel,
            &model,
            &bins,
            ReferenceChoice::Index(0),
            &file.captions[0],
        )
        .unwrap();
        assert_eq!(tokens.runs.len(), 2);
        assert_eq!(tokens.rel_bins.len(), 1);
        assert_eq!(tokens.runs[0].len(), file.scene.frames() / 4);

        let vocab = build_vocabulary(&file.captions, 16, 64).unwrap();
        let ids = scene_to_ids(&tokens, &vocab).unwrap();
        let decoded = ids_to_scene(&ids, &vocab, &model, &bins, &skel, 20.0).unwrap();
        assert_eq!(decoded.motion.persons.len(), 2);
        assert_eq!(decoded.motion.frames(), file.scene.frames());
    }
}
