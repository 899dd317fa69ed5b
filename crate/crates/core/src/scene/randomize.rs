//! Per-example scene diversity: material re-draws and random emissive orbs.
//!
//! Distributions:
//! - kind: lambertian 50 %, GGX conductor 35 %, mirror 15 %
//! - albedo / reflectance: uniform in `[0.05, 0.95]` per channel
//! - roughness: log-uniform in `[0.01, 1]`
//! - texture: present with probability 0.5, checker or value noise,
//!   frequency log-uniform in `[1, 16]` cycles/m, colors drawn like albedo
//! - orbs: radius `[0.02, 0.10]` × scene bounding radius, uniform hue,
//!   luminance uniform in `[5, 50]`

use rand::Rng;

use super::{Material, MaterialKind, Primitive, SceneDescription, Shape, Texture, TexturePattern};
use crate::math::Vec3;
use crate::rng::task_rng;

const COLOR_RANGE: (f32, f32) = (0.05, 0.95);
const ROUGHNESS_RANGE: (f32, f32) = (0.01, 1.0);
const TEXTURE_SCALE_RANGE: (f32, f32) = (1.0, 16.0);
pub const ORB_RADIUS_FRACTION: (f32, f32) = (0.02, 0.10);
pub const ORB_LUMINANCE: (f32, f32) = (5.0, 50.0);

const MATERIAL_SALT: u64 = 0x6D61_7465_7269_616C;
const ORB_SALT: u64 = 0x6F72_6273;

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f32, f32)) -> f32 {
    (lo.ln() + rng.random::<f32>() * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
}

fn color<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let (lo, hi) = COLOR_RANGE;
    let mut c = || lo + rng.random::<f32>() * (hi - lo);
    Vec3::new(c(), c(), c())
}

fn random_material<R: Rng + ?Sized>(rng: &mut R) -> Material {
    let pick: f32 = rng.random();
    let base = color(rng);
    let roughness = log_uniform(rng, ROUGHNESS_RANGE);
    let kind = if pick < 0.5 {
        MaterialKind::Lambertian { albedo: base }
    } else if pick < 0.85 {
        MaterialKind::GgxConductor { reflectance: base, roughness }
    } else {
        MaterialKind::Mirror { reflectance: base }
    };
    let texture = if rng.random::<f32>() < 0.5 {
        let pattern = if rng.random::<bool>() { TexturePattern::Checker } else { TexturePattern::ValueNoise };
        let scale = log_uniform(rng, TEXTURE_SCALE_RANGE);
        Some(Texture { pattern, scale, color_a: color(rng), color_b: color(rng) })
    } else {
        None
    };
    Material { kind, texture }
}

/// Re-draws every material not used by an emitter. Geometry and emission are untouched.
pub fn randomize_materials(scene: &SceneDescription, seed: u64) -> SceneDescription {
    let mut rng = task_rng(&[seed, MATERIAL_SALT]);
    let locked = scene.emissive_materials();
    let mut out = scene.clone();
    for (material, &locked) in out.materials.iter_mut().zip(&locked) {
        // Draw even for locked slots so each slot's stream is position-stable.
        let fresh = random_material(&mut rng);
        if !locked {
            *material = fresh;
        }
    }
    out
}

/// Fully saturated color of the given hue in `[0, 1)`.
fn hue_to_rgb(h: f32) -> Vec3 {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h6 % 2.0 - 1.0).abs();
    match h6 as u32 {
        0 => Vec3::new(1.0, x, 0.0),
        1 => Vec3::new(x, 1.0, 0.0),
        2 => Vec3::new(0.0, 1.0, x),
        3 => Vec3::new(0.0, x, 1.0),
        4 => Vec3::new(x, 0.0, 1.0),
        _ => Vec3::new(1.0, 0.0, x),
    }
}

/// Appends `k ~ U{lo..=hi}` emissive spheres placed uniformly in the scene bounds.
pub fn add_random_orbs(scene: &SceneDescription, seed: u64, count_range: [u32; 2]) -> SceneDescription {
    let (lo, hi) = (count_range[0].min(count_range[1]), count_range[0].max(count_range[1]));
    let mut rng = task_rng(&[seed, ORB_SALT]);
    let count = rng.random_range(lo..=hi);
    let mut out = scene.clone();
    if count == 0 {
        return out;
    }
    let bounds = scene.bounds();
    let radius_scale = bounds.bounding_radius().max(1e-3);
    let material = out.materials.len();
    out.materials.push(Material::lambertian(Vec3::ZERO));
    for _ in 0..count {
        let extent = bounds.extent();
        let u = Vec3::new(rng.random(), rng.random(), rng.random());
        let center = bounds.min + extent.mul_elem(u);
        let (rlo, rhi) = ORB_RADIUS_FRACTION;
        let radius = radius_scale * (rlo + rng.random::<f32>() * (rhi - rlo));
        let rgb = hue_to_rgb(rng.random());
        let (llo, lhi) = ORB_LUMINANCE;
        let luminance = llo + rng.random::<f32>() * (lhi - llo);
        out.primitives.push(Primitive {
            shape: Shape::Sphere { center, radius },
            material,
            emission: rgb * (luminance / rgb.luminance()),
        });
    }
    out
}
