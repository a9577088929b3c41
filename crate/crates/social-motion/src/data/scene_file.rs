//! Versioned binary scene container. Layout, all little-endian:
//!
//! ```text
//! magic "SCNE" | version u32 | fps f32 | skeleton-id (len u16, utf8)
//! | joints u32 | persons u32 | frames u32
//! | per person: root positions (frames x 3 f32),
//!               rotations (frames x joints x 4 f32, w x y z)
//! | caption count u32 | per caption: len u32, utf8
//! | crc32 of everything above
//! ```

use std::path::Path;

use crate::motion::{RawMotion, SocialMotion};
use crate::rotation::Quaternion;

use super::DataError;

pub const SCENE_FILE_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SCNE";

/// A scene plus the metadata stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFile {
    pub skeleton_id: String,
    pub scene: SocialMotion,
    pub captions: Vec<String>,
}

impl SceneFile {
    pub fn validate(&self) -> Result<(), DataError> {
        self.scene.validate()?;
        Ok(())
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DataError> {
        if self.pos + n > self.data.len() {
            return Err(DataError::Truncated(what));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, DataError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, DataError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &'static str) -> Result<f32, DataError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn encode_scene(file: &SceneFile) -> Result<Vec<u8>, DataError> {
    file.validate()?;
    let scene = &file.scene;
    let frames = scene.frames() as u32;
    let joints = scene.persons[0].joints() as u32;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SCENE_FILE_VERSION.to_le_bytes());
    out.extend_from_slice(&(scene.fps as f32).to_le_bytes());
    let id = file.skeleton_id.as_bytes();
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    out.extend_from_slice(&joints.to_le_bytes());
    out.extend_from_slice(&(scene.persons.len() as u32).to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    for person in &scene.persons {
        if person.joints() as u32 != joints {
            return Err(DataError::Invalid("persons disagree on joint count".to_string()));
        }
        for p in &person.root_pos {
            for &v in p {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        for frame in &person.rotations {
            for q in frame {
                for v in [q.w, q.x, q.y, q.z] {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    out.extend_from_slice(&(file.captions.len() as u32).to_le_bytes());
    for caption in &file.captions {
        let bytes = caption.as_bytes();
        out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(bytes);
    }
    let checksum = crc32fast::hash(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    Ok(out)
}

pub fn decode_scene(bytes: &[u8]) -> Result<SceneFile, DataError> {
    if bytes.len() < 4 + 4 + 4 {
        return Err(DataError::Truncated("header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(DataError::BadMagic);
    }
    let body_len = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(DataError::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader { data: &bytes[..body_len], pos: 4 };
    let version = r.u32("version")?;
    if version != SCENE_FILE_VERSION {
        return Err(DataError::UnsupportedVersion {
            found: version,
            supported: SCENE_FILE_VERSION,
        });
    }
    let fps = r.f32("fps")? as f64;
    let id_len = r.u16("skeleton id length")? as usize;
    let skeleton_id = String::from_utf8(r.take(id_len, "skeleton id")?.to_vec())
        .map_err(|e| DataError::Invalid(format!("skeleton id utf8: {e}")))?;
    let joints = r.u32("joint count")? as usize;
    let persons = r.u32("person count")? as usize;
    let frames = r.u32("frame count")? as usize;
    if persons == 0 || frames == 0 || joints == 0 {
        return Err(DataError::Invalid(format!(
            "empty dimensions: {persons} persons, {frames} frames, {joints} joints"
        )));
    }

    let mut motions = Vec::with_capacity(persons);
    for _ in 0..persons {
        let mut root_pos = Vec::with_capacity(frames);
        for _ in 0..frames {
            let x = r.f32("root position")? as f64;
            let y = r.f32("root position")? as f64;
            let z = r.f32("root position")? as f64;
            root_pos.push([x, y, z]);
        }
        let mut rotations = Vec::with_capacity(frames);
        for _ in 0..frames {
            let mut frame = Vec::with_capacity(joints);
            for _ in 0..joints {
                let w = r.f32("rotation")? as f64;
                let x = r.f32("rotation")? as f64;
                let y = r.f32("rotation")? as f64;
                let z = r.f32("rotation")? as f64;
                frame.push(Quaternion::new(w, x, y, z));
            }
            rotations.push(frame);
        }
        motions.push(RawMotion { fps, root_pos, rotations });
    }
    let caption_count = r.u32("caption count")? as usize;
    let mut captions = Vec::with_capacity(caption_count);
    for _ in 0..caption_count {
        let len = r.u32("caption length")? as usize;
        let text = String::from_utf8(r.take(len, "caption")?.to_vec())
            .map_err(|e| DataError::Invalid(format!("caption utf8: {e}")))?;
        captions.push(text);
    }
    let file = SceneFile { skeleton_id, scene: SocialMotion { fps, persons: motions }, captions };
    file.validate()?;
    Ok(file)
}

pub fn write_scene(path: &Path, file: &SceneFile) -> Result<(), DataError> {
    Ok(std::fs::write(path, encode_scene(file)?)?)
}

pub fn read_scene(path: &Path) -> Result<SceneFile, DataError> {
    decode_scene(&std::fs::read(path)?)
}
