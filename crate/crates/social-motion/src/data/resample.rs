//! Frame-rate resampling and clip segmentation.

use crate::motion::RawMotion;
use crate::rotation::Quaternion;

use super::DataError;

/// Downsample to `target` fps. Integer ratios decimate (raw samples are
/// preserved); fractional ratios interpolate positions linearly and
/// rotations spherically. Upsampling is unsupported.
pub fn resample_fps(m: &RawMotion, target: f64) -> Result<RawMotion, DataError> {
    if target > m.fps {
        return Err(DataError::Upsample { src: m.fps, target });
    }
    if (m.fps - target).abs() < 1e-9 {
        return Ok(m.clone());
    }
    let ratio = m.fps / target;
    let frames = m.frames();
    if (ratio - ratio.round()).abs() < 1e-9 {
        let k = ratio.round() as usize;
        let root_pos: Vec<[f64; 3]> = m.root_pos.iter().step_by(k).copied().collect();
        let rotations: Vec<Vec<Quaternion>> = m.rotations.iter().step_by(k).cloned().collect();
        return Ok(RawMotion { fps: target, root_pos, rotations });
    }
    // Uniform output timestamps t = n / target within the source range.
    let duration = (frames - 1) as f64 / m.fps;
    let out_frames = (duration * target).floor() as usize + 1;
    let mut root_pos = Vec::with_capacity(out_frames);
    let mut rotations = Vec::with_capacity(out_frames);
    for n in 0..out_frames {
        let u = (n as f64 / target) * m.fps;
        let i0 = (u.floor() as usize).min(frames - 1);
        let i1 = (i0 + 1).min(frames - 1);
        let alpha = u - i0 as f64;
        let a = m.root_pos[i0];
        let b = m.root_pos[i1];
        root_pos.push([
            a[0] + alpha * (b[0] - a[0]),
            a[1] + alpha * (b[1] - a[1]),
            a[2] + alpha * (b[2] - a[2]),
        ]);
        let frame: Vec<Quaternion> = m.rotations[i0]
            .iter()
            .zip(&m.rotations[i1])
            .map(|(qa, qb)| qa.slerp(qb, alpha))
            .collect();
        rotations.push(frame);
    }
    Ok(RawMotion { fps: target, root_pos, rotations })
}

/// Cut into consecutive windows of at most `max_seconds`; a trailing
/// remainder is kept only when it reaches `min_frames`.
pub fn segment_clips(m: &RawMotion, max_seconds: f64, min_frames: usize) -> Vec<RawMotion> {
    let window = (max_seconds * m.fps).floor() as usize;
    let frames = m.frames();
    let mut out = Vec::new();
    let mut start = 0;
    while start < frames {
        let end = (start + window).min(frames);
        let len = end - start;
        if len < window && len < min_frames {
            break;
        }
        out.push(RawMotion {
            fps: m.fps,
            root_pos: m.root_pos[start..end].to_vec(),
            rotations: m.rotations[start..end].to_vec(),
        });
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motion(frames: usize, fps: f64) -> RawMotion {
        RawMotion {
            fps,
            root_pos: (0..frames).map(|t| [t as f64 * 0.1, 0.9, t as f64 * 0.05]).collect(),
            rotations: (0..frames)
                .map(|t| vec![Quaternion::from_yaw(t as f64 * 0.01); 3])
                .collect(),
        }
    }

    #[test]
    fn same_rate_is_identity() {
        let m = motion(40, 20.0);
        assert_eq!(resample_fps(&m, 20.0).unwrap(), m);
    }

    #[test]
    fn integer_decimation_keeps_every_kth_frame() {
        let m = motion(41, 40.0);
        let out = resample_fps(&m, 20.0).unwrap();
        assert_eq!(out.frames(), 21);
        for (i, p) in out.root_pos.iter().enumerate() {
            assert_eq!(*p, m.root_pos[2 * i], "raw samples must be preserved");
        }
    }

    #[test]
    fn fractional_ratio_matches_linear_oracle() {
        let m = motion(31, 30.0);
        let out = resample_fps(&m, 20.0).unwrap();
        // Timestamps are uniform at 0.05 s.
        assert_eq!(out.fps, 20.0);
        for (n, p) in out.root_pos.iter().enumerate() {
            let t = n as f64 / 20.0;
            let u = t * 30.0;
            let i0 = u.floor() as usize;
            let alpha = u - i0 as f64;
            let i1 = (i0 + 1).min(30);
            for axis in 0..3 {
                let want =
                    m.root_pos[i0][axis] + alpha * (m.root_pos[i1][axis] - m.root_pos[i0][axis]);
                assert!((p[axis] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn upsampling_rejected() {
        let m = motion(10, 20.0);
        assert!(matches!(resample_fps(&m, 30.0), Err(DataError::Upsample { .. })));
    }

    #[test]
    fn twenty_second_boundary_is_one_clip() {
        let m = motion(400, 20.0);
        let clips = segment_clips(&m, 20.0, 40);
        assert_eq!(clips.len(), 1);
        assert_eq!(clips[0].frames(), 400);
    }

    #[test]
    fn window_arithmetic() {
        let m = motion(1000, 20.0);
        let clips = segment_clips(&m, 20.0, 40);
        let lens: Vec<usize> = clips.iter().map(|c| c.frames()).collect();
        assert_eq!(lens, vec![400, 400, 200]);
    }

    #[test]
    fn short_tail_dropped() {
        let m = motion(430, 20.0);
        let clips = segment_clips(&m, 20.0, 40);
        let lens: Vec<usize> = clips.iter().map(|c| c.frames()).collect();
        assert_eq!(lens, vec![400]);
    }

    #[test]
    fn tail_at_threshold_kept() {
        let m = motion(440, 20.0);
        let clips = segment_clips(&m, 20.0, 40);
        let lens: Vec<usize> = clips.iter().map(|c| c.frames()).collect();
        assert_eq!(lens, vec![400, 40]);
    }
}
