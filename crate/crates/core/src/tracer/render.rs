use rand::Rng;
use rayon::prelude::*;

use crate::camera::PinholeCamera;
use crate::image_io::{HdrImage, Mask};
use crate::math::Vec3;
use crate::rng::{sample_rng, STREAM_CAMERA, STREAM_SHADING};
use crate::scene::SceneDescription;

use super::geometry::{Hit, Ray};
use super::integrator::{shade_first_hit, ReshadedSample, TraceScene, DEFAULT_MAX_DEPTH};
use super::lights::environment_radiance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub spp: u32,
    pub seed: u64,
    pub max_depth: u32,
}

impl RenderSettings {
    pub fn new(spp: u32, seed: u64) -> Self {
        Self { spp, seed, max_depth: DEFAULT_MAX_DEPTH }
    }
}

/// The four per-pixel outputs of one render.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutputs {
    /// RGB radiance toward the input camera.
    pub input: HdrImage,
    /// RGB radiance leaving the same surface points toward the novel position.
    pub reshaded: HdrImage,
    /// Planar depth of the pixel-center ray; `+∞` where it escapes.
    pub depth: HdrImage,
    /// True where every sample's first hit faces the novel position.
    pub validity: Mask,
}

/// First surface point of one primary sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstHit {
    pub point: Vec3,
    /// Unoriented geometric normal.
    pub normal: Vec3,
}

struct PixelResult {
    input: [f32; 3],
    reshaded: [f32; 3],
    depth: f32,
    valid: bool,
    hits: Vec<Option<FirstHit>>,
}

fn render_pixel(
    scene: &TraceScene,
    camera: &PinholeCamera,
    novel_position: Vec3,
    settings: &RenderSettings,
    x: usize,
    y: usize,
    record_hits: bool,
) -> PixelResult {
    let pixel = (y * camera.width() + x) as u64;
    let mut sum_in = [0.0f64; 3];
    let mut sum_re = [0.0f64; 3];
    let mut valid = true;
    let mut hits = Vec::new();
    for s in 0..settings.spp as u64 {
        let mut cam_rng = sample_rng(settings.seed, pixel, s, STREAM_CAMERA);
        let (jx, jy): (f32, f32) = (cam_rng.random(), cam_rng.random());
        let ray = camera.generate_ray(x as f32 + jx, y as f32 + jy);
        let (l_in, l_re) = match scene.intersect(&ray) {
            None => {
                if record_hits {
                    hits.push(None);
                }
                let l = environment_radiance(&scene.description.environment, ray.direction);
                (l, l)
            }
            Some(hit) => {
                if record_hits {
                    hits.push(Some(FirstHit { point: hit.point, normal: hit.normal }));
                }
                let (a, b) = shade_both(scene, &ray, &hit, camera.position(), novel_position, settings, pixel, s);
                valid &= b.valid;
                (a, b.radiance)
            }
        };
        for c in 0..3 {
            sum_in[c] += sanitize(l_in[c]) as f64;
            sum_re[c] += sanitize(l_re[c]) as f64;
        }
    }
    let inv = 1.0 / settings.spp.max(1) as f64;
    let center = camera.generate_ray(x as f32 + 0.5, y as f32 + 0.5);
    let depth = match scene.intersect(&center) {
        Some(h) => camera.planar_depth(h.point),
        None => f32::INFINITY,
    };
    PixelResult {
        input: sum_in.map(|v| (v * inv) as f32),
        reshaded: sum_re.map(|v| (v * inv) as f32),
        depth,
        valid,
        hits,
    }
}

/// Shades one sample twice with the same shading stream: once toward the
/// input camera and once toward the novel position.
#[allow(clippy::too_many_arguments)]
fn shade_both(
    scene: &TraceScene,
    ray: &Ray,
    hit: &Hit,
    input_position: Vec3,
    novel_position: Vec3,
    settings: &RenderSettings,
    pixel: u64,
    s: u64,
) -> (Vec3, ReshadedSample) {
    let mut rng = sample_rng(settings.seed, pixel, s, STREAM_SHADING);
    let a = shade_first_hit(scene, ray, hit, input_position, &mut rng, settings.max_depth);
    let mut rng = sample_rng(settings.seed, pixel, s, STREAM_SHADING);
    let b = shade_first_hit(scene, ray, hit, novel_position, &mut rng, settings.max_depth);
    (a.radiance, b)
}

#[inline]
fn sanitize(v: f32) -> f32 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

fn render_impl(
    scene: &SceneDescription,
    camera: &PinholeCamera,
    novel_position: Vec3,
    settings: &RenderSettings,
    record_hits: bool,
) -> (RenderOutputs, Vec<Vec<Option<FirstHit>>>) {
    let ts = TraceScene::new(scene);
    let (w, h) = (camera.width(), camera.height());
    let rows: Vec<Vec<PixelResult>> = (0..h)
        .into_par_iter()
        .map(|y| (0..w).map(|x| render_pixel(&ts, camera, novel_position, settings, x, y, record_hits)).collect())
        .collect();

    let mut input = HdrImage::new(w, h, 3);
    let mut reshaded = HdrImage::new(w, h, 3);
    let mut depth = HdrImage::new(w, h, 1);
    let mut validity = Mask::filled(w, h, true);
    let mut hits = Vec::with_capacity(if record_hits { w * h } else { 0 });
    for (y, row) in rows.into_iter().enumerate() {
        for (x, p) in row.into_iter().enumerate() {
            input.pixel_mut(x, y).copy_from_slice(&p.input);
            reshaded.pixel_mut(x, y).copy_from_slice(&p.reshaded);
            depth.pixel_mut(x, y)[0] = p.depth;
            validity.data[y * w + x] = p.valid;
            if record_hits {
                hits.push(p.hits);
            }
        }
    }
    (RenderOutputs { input, reshaded, depth, validity }, hits)
}

/// Renders the input view and its reshaded counterpart for a camera moved to `novel_position`.
pub fn render(
    scene: &SceneDescription,
    camera: &PinholeCamera,
    novel_position: Vec3,
    settings: &RenderSettings,
) -> RenderOutputs {
    render_impl(scene, camera, novel_position, settings, false).0
}

/// Like [`render`], also returning every sample's first hit per pixel (row-major).
pub fn render_with_first_hits(
    scene: &SceneDescription,
    camera: &PinholeCamera,
    novel_position: Vec3,
    settings: &RenderSettings,
) -> (RenderOutputs, Vec<Vec<Option<FirstHit>>>) {
    render_impl(scene, camera, novel_position, settings, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{EnvironmentLight, Material, Primitive, Shape};

    fn scene() -> SceneDescription {
        SceneDescription {
            materials: vec![Material::lambertian(Vec3::splat(0.5)), Material::ggx(Vec3::splat(0.8), 0.2)],
            primitives: vec![
                Primitive { shape: Shape::Plane { point: Vec3::ZERO, normal: Vec3::Y }, material: 0, emission: Vec3::ZERO },
                Primitive {
                    shape: Shape::Sphere { center: Vec3::new(0.0, 0.5, -2.0), radius: 0.5 },
                    material: 1,
                    emission: Vec3::ZERO,
                },
            ],
            environment: EnvironmentLight::Constant { radiance: Vec3::splat(0.8) },
            camera_box: None,
        }
    }

    fn camera() -> PinholeCamera {
        PinholeCamera::from_degrees(Vec3::new(0.0, 1.0, 1.0), Vec3::new(0.0, 0.3, -2.0), Vec3::Y, 50.0, 24, 16).unwrap()
    }

    #[test]
    fn identity_offset_reproduces_input() {
        let c = camera();
        let out = render(&scene(), &c, c.position(), &RenderSettings::new(4, 9));
        assert_eq!(out.input, out.reshaded);
        assert!(out.validity.data.iter().all(|&v| v));
    }

    #[test]
    fn depth_of_plane_pixels_is_finite_and_sky_is_infinite() {
        let c = PinholeCamera::from_degrees(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 1.0, -1.0), Vec3::Y, 60.0, 8, 8)
            .unwrap();
        let out = render(&scene(), &c, c.position(), &RenderSettings::new(1, 0));
        assert_eq!(out.depth.pixel(0, 0)[0], f32::INFINITY);
        let bottom = out.depth.pixel(4, 7)[0];
        assert!(bottom.is_finite() && bottom > 0.0);
    }

    /// Camera at z = 0.5 facing the plane z = −2 head-on: planar depth 2.5 at the center.
    #[test]
    fn center_depth_matches_plane_distance() {
        let s = SceneDescription {
            materials: vec![Material::lambertian(Vec3::splat(0.5))],
            primitives: vec![Primitive {
                shape: Shape::Plane { point: Vec3::new(0.0, 0.0, -2.0), normal: Vec3::Z },
                material: 0,
                emission: Vec3::ZERO,
            }],
            environment: EnvironmentLight::Constant { radiance: Vec3::ONE },
            camera_box: None,
        };
        let c = PinholeCamera::from_degrees(Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.0, 0.0, -1.0), Vec3::Y, 90.0, 9, 9)
            .unwrap();
        let out = render(&s, &c, c.position(), &RenderSettings::new(1, 0));
        assert!((out.depth.pixel(4, 4)[0] - 2.5).abs() < 1e-5);
        // Planar depth is constant across a fronto-parallel plane.
        assert!((out.depth.pixel(0, 0)[0] - 2.5).abs() < 1e-4);
    }

    #[test]
    fn result_is_independent_of_thread_count() {
        let c = camera();
        let s = scene();
        let settings = RenderSettings::new(3, 21);
        let novel = c.position() + Vec3::new(0.2, 0.0, 0.0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| render(&s, &c, novel, &settings));
        let b = three.install(|| render(&s, &c, novel, &settings));
        assert_eq!(a, b);
    }

    #[test]
    fn first_hits_are_recorded_per_sample() {
        let c = camera();
        let (_, hits) = render_with_first_hits(&scene(), &c, c.position(), &RenderSettings::new(2, 0));
        assert_eq!(hits.len(), 24 * 16);
        assert!(hits.iter().all(|h| h.len() == 2));
    }
}
