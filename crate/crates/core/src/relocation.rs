//! Depth-based forward warping from the input view to the novel view.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, PinholeCamera};
use crate::image_io::{HdrImage, ImageError, LdrImage, Mask};
use crate::math::Vec3;

/// Diffusion sweeps used when filling holes.
pub const MAX_FILL_ITERATIONS: usize = 32;
const ROWS_PER_TASK: usize = 16;

#[derive(Debug, Error)]
pub enum RelocationError {
    #[error("cameras differ in resolution: {0}x{1} vs {2}x{3}")]
    Resolution(usize, usize, usize, usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("camera: {0}")]
    Camera(#[from] CameraError),
    #[error("image: {0}")]
    Image(#[from] ImageError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("pose file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = RelocationError> = std::result::Result<T, E>;

/// Input camera `c` and novel camera `c′` with equal intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPair {
    pub input: PinholeCamera,
    pub novel: PinholeCamera,
}

impl CameraPair {
    pub fn new(input: PinholeCamera, novel: PinholeCamera) -> Result<Self> {
        if (input.width(), input.height()) != (novel.width(), novel.height()) {
            return Err(RelocationError::Resolution(input.width(), input.height(), novel.width(), novel.height()));
        }
        Ok(Self { input, novel })
    }

    /// Novel camera translated by `offset` given in input-camera axes (right, up, backward).
    pub fn from_offset(input: PinholeCamera, offset: Vec3) -> Self {
        Self { input, novel: input.translated(input.camera_to_world_offset(offset)) }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PoseFile {
    Pair(CameraPair),
    Offset { camera: PinholeCamera, novel_offset: Vec3 },
}

/// Reads a pose file: either `{input, novel}` camera records or an example's `meta.json`.
pub fn load_pose(path: impl AsRef<Path>) -> Result<CameraPair> {
    let text = std::fs::read_to_string(path)?;
    match serde_json::from_str::<PoseFile>(&text)? {
        PoseFile::Pair(p) => CameraPair::new(p.input, p.novel),
        PoseFile::Offset { camera, novel_offset } => Ok(CameraPair::from_offset(camera, novel_offset)),
    }
}

/// World point at planar depth `depth` through continuous pixel `(u, v)`.
pub fn unproject(u: f32, v: f32, depth: f32, camera: &PinholeCamera) -> Vec3 {
    camera.unproject(u, v, depth)
}

/// Continuous pixel coordinates of `p`, or `None` behind the camera.
pub fn project(p: Vec3, camera: &PinholeCamera) -> Option<(f32, f32)> {
    camera.project(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub warped: HdrImage,
    /// Destination pixels no source pixel landed on (before any filling).
    pub holes: Mask,
}

/// Z-buffer entry: novel-view depth, then source index for exact ties.
type Splat = Option<(f32, usize)>;

#[inline]
fn nearer(a: Splat, b: Splat) -> Splat {
    match (a, b) {
        (Some(x), Some(y)) => {
            if (y.0, y.1) < (x.0, x.1) {
                Some(y)
            } else {
                Some(x)
            }
        }
        (x, None) => x,
        (None, y) => y,
    }
}

fn splat_target(pair: &CameraPair, x: usize, y: usize, z: f32) -> Option<(usize, f32)> {
    let (u, v) = (x as f32 + 0.5, y as f32 + 0.5);
    let (w, h) = (pair.novel.width(), pair.novel.height());
    let ((pu, pv), z_novel) = if z.is_finite() {
        let p = pair.input.unproject(u, v, z);
        (pair.novel.project(p)?, pair.novel.planar_depth(p))
    } else {
        let dir = pair.input.unproject(u, v, 1.0) - pair.input.position();
        (pair.novel.project_direction(dir)?, f32::INFINITY)
    };
    let (fx, fy) = (pu.floor(), pv.floor());
    if !(fx >= 0.0 && fy >= 0.0 && fx < w as f32 && fy < h as f32) {
        return None;
    }
    Some((fy as usize * w + fx as usize, z_novel))
}

/// Splats every source pixel into the novel view with a z-buffer
/// (nearest wins, lower source index on ties). With `fill`, holes are
/// filled by 4-neighbour diffusion.
pub fn forward_warp(image: &HdrImage, depth: &HdrImage, pair: &CameraPair, fill: bool) -> Result<WarpResult> {
    let (w, h) = (pair.input.width(), pair.input.height());
    if (image.width, image.height) != (w, h) || (depth.width, depth.height) != (w, h) || depth.channels != 1 {
        return Err(RelocationError::Shape(format!(
            "image {}x{}, depth {}x{}x{}, cameras {w}x{h}",
            image.width, image.height, depth.width, depth.height, depth.channels
        )));
    }
    let n = w * h;
    let zbuf: Vec<Splat> = (0..h)
        .into_par_iter()
        .step_by(ROWS_PER_TASK)
        .map(|y0| {
            let mut local: Vec<Splat> = vec![None; n];
            for y in y0..(y0 + ROWS_PER_TASK).min(h) {
                for x in 0..w {
                    let src = y * w + x;
                    let z = depth.data[src];
                    if !(z > 0.0) {
                        continue;
                    }
                    if let Some((dst, zn)) = splat_target(pair, x, y, z) {
                        local[dst] = nearer(local[dst], Some((zn, src)));
                    }
                }
            }
            local
        })
        .reduce(|| vec![None; n], |a, b| a.into_iter().zip(b).map(|(p, q)| nearer(p, q)).collect());

    let c = image.channels;
    let mut warped = HdrImage::new(w, h, c);
    let mut holes = Mask::filled(w, h, false);
    for (dst, s) in zbuf.iter().enumerate() {
        match s {
            Some((_, src)) => warped.data[dst * c..dst * c + c].copy_from_slice(&image.data[src * c..src * c + c]),
            None => holes.data[dst] = true,
        }
    }
    if fill {
        diffuse_fill(&mut warped, &holes);
    }
    Ok(WarpResult { warped, holes })
}

/// [`forward_warp`] for display-referred images.
pub fn forward_warp_ldr(image: &LdrImage, depth: &HdrImage, pair: &CameraPair, fill: bool) -> Result<(LdrImage, Mask)> {
    let hdr = HdrImage::from_data(image.width, image.height, image.channels, image.data().to_vec())?;
    let r = forward_warp(&hdr, depth, pair, fill)?;
    // Copies and neighbour means stay inside [0, 1].
    Ok((LdrImage::from_data(r.warped.width, r.warped.height, r.warped.channels, r.warped.data)?, r.holes))
}

/// Each sweep assigns every unfilled hole bordering a filled pixel the mean of
/// its filled 4-neighbours from the previous sweep.
fn diffuse_fill(img: &mut HdrImage, holes: &Mask) {
    let (w, h, c) = (img.width, img.height, img.channels);
    let mut known: Vec<bool> = holes.data.iter().map(|&hole| !hole).collect();
    for _ in 0..MAX_FILL_ITERATIONS {
        let snapshot = img.data.clone();
        let before = known.clone();
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if before[i] {
                    continue;
                }
                let mut sum = vec![0.0f32; c];
                let mut count = 0;
                let neighbours = [
                    (x > 0).then(|| i - 1),
                    (x + 1 < w).then(|| i + 1),
                    (y > 0).then(|| i - w),
                    (y + 1 < h).then(|| i + w),
                ];
                for j in neighbours.into_iter().flatten() {
                    if before[j] {
                        for (acc, v) in sum.iter_mut().zip(&snapshot[j * c..(j + 1) * c]) {
                            *acc += v;
                        }
                        count += 1;
                    }
                }
                if count > 0 {
                    for (out, s) in img.data[i * c..(i + 1) * c].iter_mut().zip(&sum) {
                        *out = s / count as f32;
                    }
                    known[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;
    use rand::Rng;

    fn camera(w: usize, h: usize) -> PinholeCamera {
        PinholeCamera::from_degrees(Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, -1.0), Vec3::Y, 50.0, w, h).unwrap()
    }

    fn ramp(w: usize, h: usize) -> HdrImage {
        let mut img = HdrImage::new(w, h, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = i as f32;
        }
        img
    }

    #[test]
    fn unproject_project_roundtrip() {
        let c = camera(64, 48);
        let mut rng = task_rng(&[1]);
        let mut worst = 0.0f32;
        for _ in 0..64 {
            let (u, v, z) = (rng.random::<f32>() * 64.0, rng.random::<f32>() * 48.0, 0.3 + rng.random::<f32>() * 20.0);
            let (pu, pv) = project(unproject(u, v, z, &c), &c).unwrap();
            worst = worst.max((pu - u).abs()).max((pv - v).abs());
        }
        assert!(worst < 1e-3, "{worst}");
        let (u, v) = project(unproject(10.25, 7.5, 3.0, &c), &c).unwrap();
        assert!((u - 10.25).abs() < 1e-4 && (v - 7.5).abs() < 1e-4);
    }

    #[test]
    fn fill_works_on_single_channel_images() {
        let c = camera(6, 4);
        let pair = CameraPair::from_offset(c, Vec3::new(0.3, 0.0, 0.0));
        let img = HdrImage::filled(6, 4, 1, 0.5);
        let r = forward_warp(&img, &HdrImage::filled(6, 4, 1, 1.0), &pair, true).unwrap();
        assert!(r.holes.count_true() > 0);
        assert!(r.warped.data.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn ldr_identity_warp() {
        let c = camera(6, 4);
        let img = LdrImage::from_data(6, 4, 1, (0..24).map(|i| i as f32 / 23.0).collect()).unwrap();
        let (out, holes) = forward_warp_ldr(&img, &HdrImage::filled(6, 4, 1, 1.5), &CameraPair { input: c, novel: c }, true)
            .unwrap();
        assert_eq!(out, img);
        assert_eq!(holes.count_true(), 0);
    }

    #[test]
    fn identity_warp() {
        let c = camera(20, 12);
        let img = ramp(20, 12);
        let mut depth = HdrImage::filled(20, 12, 1, 2.0);
        depth.data[5] = f32::INFINITY;
        let r = forward_warp(&img, &depth, &CameraPair { input: c, novel: c }, false).unwrap();
        assert_eq!(r.warped, img);
        assert_eq!(r.holes.count_true(), 0);
    }

    #[test]
    fn lateral_translation_shifts_by_focal_over_depth() {
        let (w, h) = (40, 10);
        let c = camera(w, h);
        let z = 3.0;
        let delta = 0.2;
        let shift = delta * c.focal_px() / z;
        let pair = CameraPair::from_offset(c, Vec3::new(delta, 0.0, 0.0));
        let img = ramp(w, h);
        let r = forward_warp(&img, &HdrImage::filled(w, h, 1, z), &pair, false).unwrap();
        // Source pixel x lands at floor(x + 0.5 − shift).
        let y = 5;
        for x in 0..w {
            let dst = (x as f32 + 0.5 - shift).floor();
            if dst >= 0.0 && (dst as usize) < w {
                let d = dst as usize;
                assert_eq!(r.warped.pixel(d, y), img.pixel(x, y));
                assert!(((d as f32 + 0.5) - (x as f32 + 0.5 - shift)).abs() <= 0.5);
            }
        }
        // The scene moves left, so the right edge opens up.
        assert!(r.holes.get(w - 1, y));
    }

    #[test]
    fn nearer_surfaces_move_farther() {
        let (w, h) = (64, 4);
        let c = camera(w, h);
        let pair = CameraPair::from_offset(c, Vec3::new(0.3, 0.0, 0.0));
        let mut depth = HdrImage::filled(w, h, 1, 8.0);
        let mut img = HdrImage::new(w, h, 1);
        // Near marker at x = 20, far marker at x = 44.
        depth.data[2 * w + 20] = 1.0;
        img.data[2 * w + 20] = 1.0;
        img.data[2 * w + 44] = 2.0;
        let r = forward_warp(&img, &depth, &pair, false).unwrap();
        let find = |v: f32| (0..w).find(|&x| r.warped.pixel(x, 2)[0] == v).unwrap();
        let near_shift = 20 - find(1.0) as i64;
        let far_shift = 44 - find(2.0) as i64;
        assert!(near_shift > far_shift && far_shift >= 0, "{near_shift} vs {far_shift}");
    }

    #[test]
    fn zbuffer_keeps_nearest_and_breaks_ties_by_source_order() {
        // Collisions built directly on the merge rule.
        assert_eq!(nearer(Some((2.0, 0)), Some((1.0, 5))), Some((1.0, 5)));
        assert_eq!(nearer(Some((1.0, 7)), Some((1.0, 3))), Some((1.0, 3)));
        assert_eq!(nearer(None, Some((1.0, 3))), Some((1.0, 3)));
        // A nearer source pixel occluding a farther one after translation.
        let (w, h) = (32, 1);
        let c = camera(w, h);
        let pair = CameraPair::from_offset(c, Vec3::new(0.5, 0.0, 0.0));
        let mut depth = HdrImage::filled(w, h, 1, 10.0);
        let mut img = HdrImage::new(w, h, 1);
        for x in 0..w {
            img.data[x] = x as f32;
        }
        depth.data[20] = 0.5;
        let near_dst = splat_target(&pair, 20, 0, 0.5).unwrap().0;
        let r = forward_warp(&img, &depth, &pair, false).unwrap();
        assert_eq!(r.warped.data[near_dst], 20.0);
    }

    #[test]
    fn fill_closes_holes_but_mask_keeps_them() {
        let (w, h) = (40, 10);
        let c = camera(w, h);
        let pair = CameraPair::from_offset(c, Vec3::new(0.2, 0.0, 0.0));
        let img = HdrImage::filled(w, h, 3, 0.7);
        let depth = HdrImage::filled(w, h, 1, 3.0);
        let open = forward_warp(&img, &depth, &pair, false).unwrap();
        let filled = forward_warp(&img, &depth, &pair, true).unwrap();
        assert!(open.holes.count_true() > 0);
        assert_eq!(open.holes, filled.holes);
        assert!(filled.warped.data.iter().all(|&v| (v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let (w, h) = (48, 40);
        let c = camera(w, h);
        let pair = CameraPair::from_offset(c, Vec3::new(0.1, -0.05, 0.1));
        let mut depth = HdrImage::new(w, h, 1);
        for (i, d) in depth.data.iter_mut().enumerate() {
            *d = 1.0 + (i % 5) as f32;
        }
        let img = ramp(w, h);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| forward_warp(&img, &depth, &pair, true).unwrap());
        let b = four.install(|| forward_warp(&img, &depth, &pair, true).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn pose_file_formats() {
        let dir = tempfile::tempdir().unwrap();
        let c = camera(8, 8);
        let pair = CameraPair::from_offset(c, Vec3::new(0.1, 0.0, 0.0));
        let a = dir.path().join("pair.json");
        std::fs::write(&a, serde_json::to_string(&pair).unwrap()).unwrap();
        assert_eq!(load_pose(&a).unwrap(), pair);
        let b = dir.path().join("meta.json");
        let meta = serde_json::json!({ "camera": c, "novel_offset": [0.1, 0.0, 0.0], "spp": 4, "seed": 1 });
        std::fs::write(&b, meta.to_string()).unwrap();
        assert_eq!(load_pose(&b).unwrap(), pair);
    }
}
