//! Unidirectional path tracing with next-event estimation and MIS.
//!
//! The first vertex is shaded *from a viewpoint*: the outgoing direction is
//! `normalize(viewpoint − x)` rather than the reversed ray direction. With the
//! viewpoint equal to the ray origin this is ordinary path tracing; with a
//! displaced viewpoint it yields the reshaded estimate for that point.

use rand::Rng;

use crate::math::Vec3;
use crate::scene::SceneDescription;

use super::bsdf::Bsdf;
use super::geometry::{intersect, offset_origin, Hit, Ray};
use super::lights::{environment_radiance, LightSet};

pub const DEFAULT_MAX_DEPTH: u32 = 8;
/// Vertex index from which Russian roulette may end a path.
const ROULETTE_START: u32 = 3;

/// A scene prepared for rendering.
#[derive(Debug, Clone)]
pub struct TraceScene<'a> {
    pub description: &'a SceneDescription,
    pub lights: LightSet,
}

impl<'a> TraceScene<'a> {
    pub fn new(description: &'a SceneDescription) -> Self {
        Self { description, lights: LightSet::new(description) }
    }

    #[inline]
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        intersect(self.description, ray)
    }
}

/// Result of shading one primary sample for a displaced viewpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReshadedSample {
    pub radiance: Vec3,
    /// False when the viewpoint lies behind the surface at the first hit.
    pub valid: bool,
}

/// Normal at `hit` flipped to face `toward`.
#[inline]
pub fn oriented_normal(hit: &Hit, toward: Vec3) -> Vec3 {
    if hit.normal.dot(toward) < 0.0 {
        -hit.normal
    } else {
        hit.normal
    }
}

/// Unbiased estimate of radiance arriving at `ray.origin` along `ray`.
pub fn estimate_radiance<R: Rng + ?Sized>(scene: &TraceScene, ray: &Ray, rng: &mut R, max_depth: u32) -> Vec3 {
    match scene.intersect(ray) {
        None => environment_radiance(&scene.description.environment, ray.direction),
        Some(hit) => shade_first_hit(scene, ray, &hit, ray.origin, rng, max_depth).radiance,
    }
}

/// Radiance leaving the first hit of `input_ray` toward `novel_position`.
pub fn estimate_reshaded<R: Rng + ?Sized>(
    scene: &TraceScene,
    input_ray: &Ray,
    novel_position: Vec3,
    rng: &mut R,
    max_depth: u32,
) -> ReshadedSample {
    match scene.intersect(input_ray) {
        None => ReshadedSample {
            radiance: environment_radiance(&scene.description.environment, input_ray.direction),
            valid: true,
        },
        Some(hit) => shade_first_hit(scene, input_ray, &hit, novel_position, rng, max_depth),
    }
}

/// Shades the path vertex `hit` reached by `ray`, with outgoing direction toward `viewpoint`.
pub fn shade_first_hit<R: Rng + ?Sized>(
    scene: &TraceScene,
    ray: &Ray,
    hit: &Hit,
    viewpoint: Vec3,
    rng: &mut R,
    max_depth: u32,
) -> ReshadedSample {
    let x = hit.point;
    let n = oriented_normal(hit, (ray.origin - x).normalize());
    let w_out = (viewpoint - x).normalize();
    let valid = n.dot(w_out) > 0.0;
    let radiance = trace_path(scene, *hit, n, w_out, rng, max_depth);
    ReshadedSample { radiance, valid }
}

fn trace_path<R: Rng + ?Sized>(
    scene: &TraceScene,
    first: Hit,
    first_normal: Vec3,
    first_out: Vec3,
    rng: &mut R,
    max_depth: u32,
) -> Vec3 {
    let desc = scene.description;
    let lights = &scene.lights;
    let mut radiance = first.emitted;
    let mut throughput = Vec3::ONE;
    let (mut hit, mut n, mut w_out) = (first, first_normal, first_out);

    for depth in 0.. {
        if depth >= max_depth {
            break;
        }
        let x = hit.point;
        let bsdf = Bsdf::new(&desc.materials[hit.material], x, n);
        let origin = offset_origin(x, n);

        if !bsdf.is_delta() {
            let u_pick: f32 = rng.random();
            let u_light = [rng.random(), rng.random()];
            if let Some(ls) = lights.sample(x, u_pick, u_light) {
                let cos = n.dot(ls.direction);
                if cos > 0.0 {
                    let f = bsdf.eval(w_out, ls.direction);
                    if !f.is_black() {
                        let le = light_arrival(scene, origin, ls.direction, ls.primitive);
                        if !le.is_black() {
                            let pb = bsdf.pdf(w_out, ls.direction);
                            let mis = ls.pdf / (ls.pdf + pb);
                            radiance += throughput.mul_elem(f.mul_elem(le)) * (cos * mis / ls.pdf);
                        }
                    }
                }
            }
        }

        let Some(s) = bsdf.sample(w_out, [rng.random(), rng.random()]) else { break };
        throughput = throughput.mul_elem(s.weight);
        if throughput.is_black() {
            break;
        }
        let next_ray = Ray::new(origin, s.w_in);
        match scene.intersect(&next_ray) {
            None => {
                let le = environment_radiance(&desc.environment, s.w_in);
                if !le.is_black() {
                    let w = if s.delta { 1.0 } else { balance(s.pdf, lights.pdf_environment(s.w_in)) };
                    radiance += throughput.mul_elem(le) * w;
                }
                break;
            }
            Some(next) => {
                if !next.emitted.is_black() {
                    let w = if s.delta { 1.0 } else { balance(s.pdf, lights.pdf_hit(x, s.w_in, &next)) };
                    radiance += throughput.mul_elem(next.emitted) * w;
                }
                w_out = -s.w_in;
                n = oriented_normal(&next, w_out);
                hit = next;
            }
        }

        if depth + 1 >= ROULETTE_START {
            let survive = throughput.max_component().clamp(0.1, 0.95);
            if rng.random::<f32>() >= survive {
                break;
            }
            throughput *= 1.0 / survive;
        }
    }
    radiance
}

#[inline]
fn balance(pdf_a: f32, pdf_b: f32) -> f32 {
    pdf_a / (pdf_a + pdf_b)
}

/// Emission reaching `origin` from direction `d` if the sampled light is unoccluded.
fn light_arrival(scene: &TraceScene, origin: Vec3, d: Vec3, target: Option<usize>) -> Vec3 {
    let hit = scene.intersect(&Ray::new(origin, d));
    match (target, hit) {
        (None, None) => environment_radiance(&scene.description.environment, d),
        (Some(p), Some(h)) if h.primitive == p => h.emitted,
        _ => Vec3::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{sample_rng, STREAM_SHADING};
    use crate::scene::{EnvironmentLight, Material, Primitive, Shape};

    fn one_sphere(material: Material, emission: Vec3, env: Vec3) -> SceneDescription {
        SceneDescription {
            materials: vec![material],
            primitives: vec![Primitive {
                shape: Shape::Sphere { center: Vec3::new(0.0, 0.0, -3.0), radius: 1.0 },
                material: 0,
                emission,
            }],
            environment: EnvironmentLight::Constant { radiance: env },
            camera_box: None,
        }
    }

    fn mean_radiance(scene: &SceneDescription, ray: Ray, n: u64) -> Vec3 {
        let ts = TraceScene::new(scene);
        let mut acc = [0.0f64; 3];
        for s in 0..n {
            let mut rng = sample_rng(1, 0, s, STREAM_SHADING);
            let l = estimate_radiance(&ts, &ray, &mut rng, DEFAULT_MAX_DEPTH);
            for c in 0..3 {
                acc[c] += l[c] as f64;
            }
        }
        Vec3::new((acc[0] / n as f64) as f32, (acc[1] / n as f64) as f32, (acc[2] / n as f64) as f32)
    }

    #[test]
    fn black_emitter_returns_emission() {
        let s = one_sphere(Material::lambertian(Vec3::ZERO), Vec3::splat(2.0), Vec3::ZERO);
        let l = mean_radiance(&s, Ray::new(Vec3::ZERO, -Vec3::Z), 64);
        assert!((l - Vec3::splat(2.0)).length() < 1e-5);
    }

    #[test]
    fn no_light_gives_zero() {
        let s = one_sphere(Material::lambertian(Vec3::splat(0.5)), Vec3::ZERO, Vec3::ZERO);
        assert_eq!(mean_radiance(&s, Ray::new(Vec3::ZERO, -Vec3::Z), 64), Vec3::ZERO);
    }

    #[test]
    fn furnace_single_sphere() {
        let s = one_sphere(Material::lambertian(Vec3::splat(0.4)), Vec3::ZERO, Vec3::ONE);
        let l = mean_radiance(&s, Ray::new(Vec3::ZERO, -Vec3::Z), 4096);
        assert!((l.x - 0.4).abs() < 0.01, "{l:?}");
    }

    #[test]
    fn miss_returns_environment() {
        let s = one_sphere(Material::lambertian(Vec3::splat(0.4)), Vec3::ZERO, Vec3::new(0.1, 0.2, 0.3));
        let l = mean_radiance(&s, Ray::new(Vec3::ZERO, Vec3::Z), 4);
        assert_eq!(l, Vec3::new(0.1, 0.2, 0.3));
    }

    #[test]
    fn reshaded_with_same_viewpoint_is_bitwise_identical() {
        let s = one_sphere(Material::ggx(Vec3::splat(0.7), 0.3), Vec3::ZERO, Vec3::ONE);
        let ts = TraceScene::new(&s);
        let ray = Ray::new(Vec3::new(0.1, 0.2, 0.0), Vec3::new(0.0, -0.05, -1.0).normalize());
        for k in 0..32 {
            let a = estimate_radiance(&ts, &ray, &mut sample_rng(3, 0, k, STREAM_SHADING), 8);
            let b = estimate_reshaded(&ts, &ray, ray.origin, &mut sample_rng(3, 0, k, STREAM_SHADING), 8);
            assert!(b.valid);
            assert_eq!(a.x.to_bits(), b.radiance.x.to_bits());
            assert_eq!(a.z.to_bits(), b.radiance.z.to_bits());
        }
    }

    #[test]
    fn viewpoint_behind_plane_is_invalid() {
        let s = SceneDescription {
            materials: vec![Material::lambertian(Vec3::splat(0.5))],
            primitives: vec![Primitive { shape: Shape::Plane { point: Vec3::ZERO, normal: Vec3::Y }, material: 0, emission: Vec3::ZERO }],
            environment: EnvironmentLight::Constant { radiance: Vec3::ONE },
            camera_box: None,
        };
        let ts = TraceScene::new(&s);
        let ray = Ray::new(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, -1.0, -1.0).normalize());
        let below = estimate_reshaded(&ts, &ray, Vec3::new(0.0, -0.5, 0.0), &mut sample_rng(0, 0, 0, 1), 8);
        assert!(!below.valid);
        assert_eq!(below.radiance, Vec3::ZERO);
        let above = estimate_reshaded(&ts, &ray, Vec3::new(0.3, 0.5, 0.0), &mut sample_rng(0, 0, 0, 1), 8);
        assert!(above.valid);
    }

    /// Direct lighting of a diffuse plane from a small sphere light, against
    /// the closed-form irradiance of a sphere: E = L·π·(r/d)² at normal incidence.
    #[test]
    fn small_sphere_irradiance() {
        let albedo = 0.5;
        let le = 10.0;
        let (r, d) = (0.2f32, 2.0f32);
        let s = SceneDescription {
            materials: vec![Material::lambertian(Vec3::splat(albedo)), Material::lambertian(Vec3::ZERO)],
            primitives: vec![
                Primitive { shape: Shape::Plane { point: Vec3::ZERO, normal: Vec3::Y }, material: 0, emission: Vec3::ZERO },
                Primitive {
                    shape: Shape::Sphere { center: Vec3::new(0.0, d, 0.0), radius: r },
                    material: 1,
                    emission: Vec3::splat(le),
                },
            ],
            environment: EnvironmentLight::Constant { radiance: Vec3::ZERO },
            camera_box: None,
        };
        let ray = Ray::new(Vec3::new(0.0, 1.0, 1.0), Vec3::new(0.0, -1.0, -1.0).normalize());
        // Depth 1 isolates direct lighting.
        let ts = TraceScene::new(&s);
        let mut acc = 0.0f64;
        let n = 20_000;
        for k in 0..n {
            acc += estimate_radiance(&ts, &ray, &mut sample_rng(5, 0, k, STREAM_SHADING), 1).x as f64;
        }
        let expected = albedo / std::f32::consts::PI * le * std::f32::consts::PI * (r / d).powi(2);
        let got = (acc / n as f64) as f32;
        assert!((got - expected).abs() < 0.02 * expected, "{got} vs {expected}");
    }
}
