//! Dataset generation: scene randomization, camera placement, rendering, and
//! the on-disk layout.
//!
//! ```text
//! out/
//!   manifest.json                 array of meta records, sorted by example_id
//!   <scene_id>-<pair:04>/
//!     input.pfm reshaded.pfm depth.pfm validity.png meta.json
//! ```
//!
//! Every example is a pure function of the scene, the configuration and the
//! master seed, so a dataset is byte-identical regardless of worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, PinholeCamera};
use crate::image_io::{write_mask_png, write_pfm, ImageError};
use crate::math::{Vec3, PI};
use crate::rng::{hash_words, task_rng};
use crate::scene::{add_random_orbs, load_scene, randomize_materials, SceneDescription, SceneError};
use crate::tracer::{intersect, render, Ray, RenderSettings, DEFAULT_MAX_DEPTH};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const META_FILE: &str = "meta.json";
pub const INPUT_FILE: &str = "input.pfm";
pub const RESHADED_FILE: &str = "reshaded.pfm";
pub const DEPTH_FILE: &str = "depth.pfm";
pub const VALIDITY_FILE: &str = "validity.png";

/// Re-draws allowed when every pixel of an example is invalid.
pub const MAX_INVALID_RETRIES: u32 = 10;
/// Camera positions drawn before giving up on a placement box.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 16;
pub const FOV_RANGE_DEG: (f32, f32) = (40.0, 70.0);

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scene has no camera_box for camera placement")]
    MissingCameraBox,
    #[error("no camera position outside geometry after {0} attempts")]
    CameraPlacement(u32),
    #[error("every pixel was invalid in {0} attempts")]
    AllInvalid(u32),
    #[error("camera: {0}")]
    Camera(#[from] CameraError),
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("image: {0}")]
    Image(#[from] ImageError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub pairs_per_scene: u32,
    pub width: usize,
    pub height: usize,
    pub spp: u32,
    /// Novel-camera distance range `[lo, hi]` in meters.
    pub radius_range: [f32; 2],
    /// Inclusive range for the number of random orbs per example.
    pub orb_count_range: [u32; 2],
    pub seed: u64,
    pub max_depth: u32,
    /// Debug switch: render every example with a zero offset.
    pub identity_offset: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            pairs_per_scene: 200,
            width: 256,
            height: 256,
            spp: 256,
            radius_range: [0.1, 0.3],
            orb_count_range: [2, 5],
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            identity_offset: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(DatasetError::Config(m));
        if self.pairs_per_scene == 0 || self.width == 0 || self.height == 0 || self.spp == 0 || self.max_depth == 0 {
            return fail("pairs, resolution, spp and max depth must be positive".into());
        }
        let [lo, hi] = self.radius_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return fail(format!("radius range [{lo}, {hi}] must satisfy 0 < lo <= hi"));
        }
        if self.orb_count_range[0] > self.orb_count_range[1] {
            return fail(format!("orb count range {:?} has lo > hi", self.orb_count_range));
        }
        Ok(())
    }
}

/// Paths of the four render outputs, relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleFiles {
    pub input: String,
    pub reshaded: String,
    pub depth: String,
    pub validity: String,
}

impl ExampleFiles {
    fn for_id(id: &str) -> Self {
        let rel = |f: &str| format!("{id}/{f}");
        Self { input: rel(INPUT_FILE), reshaded: rel(RESHADED_FILE), depth: rel(DEPTH_FILE), validity: rel(VALIDITY_FILE) }
    }

    pub fn all(&self) -> [&str; 4] {
        [&self.input, &self.reshaded, &self.depth, &self.validity]
    }
}

/// One generated example; serialized verbatim as `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetExample {
    pub example_id: String,
    pub scene_id: String,
    pub camera: PinholeCamera,
    /// `c′ − c` in input-camera axes (right, up, backward).
    pub novel_offset: Vec3,
    pub spp: u32,
    pub seed: u64,
    pub files: ExampleFiles,
}

impl DatasetExample {
    /// World-space position of the novel camera.
    pub fn novel_position(&self) -> Vec3 {
        self.camera.position() + self.camera.camera_to_world_offset(self.novel_offset)
    }

    fn files_exist(&self, root: &Path) -> bool {
        self.files.all().iter().all(|f| root.join(f).is_file()) && root.join(&self.example_id).join(META_FILE).is_file()
    }
}

/// Direction uniform on the sphere, length uniform in `radius_range`.
pub fn sample_novel_offset<R: Rng + ?Sized>(rng: &mut R, radius_range: [f32; 2]) -> Vec3 {
    let z = 1.0 - 2.0 * rng.random::<f32>();
    let phi = 2.0 * PI * rng.random::<f32>();
    let r = (1.0 - z * z).max(0.0).sqrt();
    let [lo, hi] = radius_range;
    let length = lo + (hi - lo) * rng.random::<f32>();
    Vec3::new(r * phi.cos(), r * phi.sin(), z) * length.clamp(lo, hi)
}

fn visible_from(scene: &SceneDescription, from: Vec3, index: usize) -> bool {
    let target = scene.primitives[index].shape.centroid();
    let to = target - from;
    let dist = to.length();
    if !(dist > 1e-6) {
        return false;
    }
    match intersect(scene, &Ray::new(from, to * (1.0 / dist))) {
        Some(hit) => hit.primitive == index || hit.t >= dist * (1.0 - 1e-4),
        None => true,
    }
}

/// Input camera: position uniform in the scene's camera box, aimed at the
/// centroid of a uniformly chosen visible non-emissive primitive.
pub fn sample_input_camera<R: Rng + ?Sized>(
    scene: &SceneDescription,
    rng: &mut R,
    width: usize,
    height: usize,
) -> Result<PinholeCamera> {
    let bounds = scene.camera_box.ok_or(DatasetError::MissingCameraBox)?;
    let mut position = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let u = Vec3::new(rng.random(), rng.random(), rng.random());
        let p = bounds.min + bounds.extent().mul_elem(u);
        if !scene.primitives.iter().any(|prim| prim.shape.contains(p)) {
            position = Some(p);
            break;
        }
    }
    let position = position.ok_or(DatasetError::CameraPlacement(MAX_PLACEMENT_ATTEMPTS))?;

    let aimable = |i: &usize| {
        let c = scene.primitives[*i].shape.centroid();
        (c - position).length_squared() > 1e-12
    };
    let surfaces: Vec<usize> = (0..scene.primitives.len()).filter(|&i| !scene.primitives[i].is_emissive()).collect();
    let mut candidates: Vec<usize> =
        surfaces.iter().copied().filter(aimable).filter(|&i| visible_from(scene, position, i)).collect();
    if candidates.is_empty() {
        candidates = surfaces.into_iter().filter(aimable).collect();
    }
    if candidates.is_empty() {
        candidates = (0..scene.primitives.len()).filter(aimable).collect();
    }
    let pick: f32 = rng.random();
    let look_at = match candidates.len() {
        0 => position + Vec3::new(0.0, 0.0, -1.0),
        n => scene.primitives[candidates[((pick * n as f32) as usize).min(n - 1)]].shape.centroid(),
    };
    let (lo, hi) = FOV_RANGE_DEG;
    let fov = lo + (hi - lo) * rng.random::<f32>();
    let forward = (look_at - position).normalize();
    let up = if forward.dot(Vec3::Y).abs() > 0.999 { Vec3::Z } else { Vec3::Y };
    Ok(PinholeCamera::from_degrees(position, look_at, up, fov, width, height)?)
}

/// Stable 64-bit key of a scene identifier, used in example seeds.
fn scene_key(scene_id: &str) -> u64 {
    hash_words(&scene_id.bytes().map(u64::from).collect::<Vec<_>>())
}

pub fn example_id(scene_id: &str, pair: u32) -> String {
    format!("{scene_id}-{pair:04}")
}

pub fn example_seed(master: u64, scene_id: &str, pair: u32) -> u64 {
    hash_words(&[master, scene_key(scene_id), pair as u64])
}

/// Randomizes, places cameras, renders, and writes one example under `root`.
pub fn generate_example(
    scene: &SceneDescription,
    scene_id: &str,
    pair: u32,
    cfg: &GenConfig,
    root: &Path,
) -> Result<DatasetExample> {
    cfg.validate()?;
    let id = example_id(scene_id, pair);
    let seed = example_seed(cfg.seed, scene_id, pair);
    for attempt in 0..=MAX_INVALID_RETRIES {
        let mut rng = task_rng(&[seed, attempt as u64]);
        let randomized = randomize_materials(scene, rng.random());
        let world = add_random_orbs(&randomized, rng.random(), cfg.orb_count_range);
        let camera = match sample_input_camera(&world, &mut rng, cfg.width, cfg.height) {
            Ok(c) => c,
            // Orbs can swallow the whole box; a fresh attempt redraws them.
            Err(DatasetError::CameraPlacement(_)) if attempt < MAX_INVALID_RETRIES => continue,
            Err(e) => return Err(e),
        };
        let offset = sample_novel_offset(&mut rng, cfg.radius_range);
        let offset = if cfg.identity_offset { Vec3::ZERO } else { offset };
        let settings = RenderSettings { spp: cfg.spp, seed: rng.random(), max_depth: cfg.max_depth };
        let novel = camera.position() + camera.camera_to_world_offset(offset);
        let out = render(&world, &camera, novel, &settings);
        if out.validity.count_true() == 0 {
            continue;
        }

        let example = DatasetExample {
            example_id: id.clone(),
            scene_id: scene_id.to_string(),
            camera,
            novel_offset: offset,
            spp: cfg.spp,
            seed,
            files: ExampleFiles::for_id(&id),
        };
        let dir = root.join(&id);
        fs::create_dir_all(&dir)?;
        write_pfm(&out.input, root.join(&example.files.input))?;
        write_pfm(&out.reshaded, root.join(&example.files.reshaded))?;
        write_pfm(&out.depth, root.join(&example.files.depth))?;
        write_mask_png(&out.validity, root.join(&example.files.validity))?;
        write_atomic(&dir.join(META_FILE), serde_json::to_string_pretty(&example)?.as_bytes())?;
        return Ok(example);
    }
    Err(DatasetError::AllInvalid(MAX_INVALID_RETRIES + 1))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSummary {
    /// Examples listed in the manifest, in manifest order.
    pub examples: Vec<DatasetExample>,
    pub generated: Vec<String>,
    pub skipped: Vec<String>,
    /// `(example_id, error message)` for examples that could not be produced.
    pub failed: Vec<(String, String)>,
}

/// Reads `manifest.json` under `root`, or an empty list if absent.
pub fn read_manifest(root: &Path) -> Result<Vec<DatasetExample>> {
    let path = root.join(MANIFEST_FILE);
    if !path.is_file() {
        return Ok(Vec::new());
    }
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Generates every `(scene, pair)` example, skipping those already listed in
/// the manifest whose files are present, and rewrites the manifest.
///
/// Runs on the current rayon pool; use `ThreadPool::install` to bound workers.
pub fn generate_dataset(scenes: &[(String, SceneDescription)], cfg: &GenConfig, root: &Path) -> Result<DatasetSummary> {
    cfg.validate()?;
    fs::create_dir_all(root)?;
    let existing: BTreeMap<String, DatasetExample> =
        read_manifest(root)?.into_iter().map(|e| (e.example_id.clone(), e)).collect();

    let mut sorted: Vec<&(String, SceneDescription)> = scenes.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let jobs: Vec<(&str, &SceneDescription, u32)> = sorted
        .iter()
        .flat_map(|(id, scene)| (0..cfg.pairs_per_scene).map(move |pair| (id.as_str(), scene, pair)))
        .collect();

    enum Outcome {
        Reused(DatasetExample),
        Fresh(DatasetExample),
        Failed(String, String),
    }
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(scene_id, scene, pair)| {
            let id = example_id(scene_id, pair);
            if let Some(done) = existing.get(&id) {
                if done.files_exist(root) {
                    return Outcome::Reused(done.clone());
                }
            }
            match generate_example(scene, scene_id, pair, cfg, root) {
                Ok(e) => Outcome::Fresh(e),
                Err(err) => Outcome::Failed(id, err.to_string()),
            }
        })
        .collect();

    let mut summary = DatasetSummary::default();
    for outcome in outcomes {
        match outcome {
            Outcome::Reused(e) => {
                summary.skipped.push(e.example_id.clone());
                summary.examples.push(e);
            }
            Outcome::Fresh(e) => {
                summary.generated.push(e.example_id.clone());
                summary.examples.push(e);
            }
            Outcome::Failed(id, msg) => summary.failed.push((id, msg)),
        }
    }
    write_atomic(&root.join(MANIFEST_FILE), serde_json::to_string_pretty(&summary.examples)?.as_bytes())?;
    Ok(summary)
}

/// Loads every `*.json` scene in `dir`, keyed by file stem and sorted.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<(String, SceneDescription)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, load_scene(&p)?))
        })
        .collect()
}
