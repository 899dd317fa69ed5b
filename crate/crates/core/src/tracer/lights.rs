use crate::image_io::HdrImage;
use crate::math::{Frame, Vec3, PI};
use crate::scene::{EnvironmentLight, SceneDescription, Shape};

use super::bsdf::uniform_sphere;
use super::geometry::Hit;

/// Equirectangular direction mapping. `u` follows azimuth, `v` runs from +y (0) to −y (1).
pub fn direction_to_latlong(d: Vec3, rotation: f32) -> (f32, f32) {
    let phi = d.x.atan2(-d.z) - rotation;
    let u = (phi / (2.0 * PI)).rem_euclid(1.0);
    let v = d.y.clamp(-1.0, 1.0).acos() / PI;
    (u, v)
}

pub fn latlong_to_direction(u: f32, v: f32, rotation: f32) -> Vec3 {
    let theta = v * PI;
    let phi = 2.0 * PI * u + rotation;
    let s = theta.sin();
    Vec3::new(s * phi.sin(), theta.cos(), -s * phi.cos())
}

fn texel(image: &HdrImage, u: f32, v: f32) -> (usize, usize) {
    let x = ((u * image.width as f32) as usize).min(image.width - 1);
    let y = ((v * image.height as f32) as usize).min(image.height - 1);
    (x, y)
}

fn texel_rgb(image: &HdrImage, x: usize, y: usize) -> Vec3 {
    let p = image.pixel(x, y);
    if image.channels == 1 {
        Vec3::splat(p[0])
    } else {
        Vec3::new(p[0], p[1], p[2])
    }
}

/// Radiance arriving from direction `d` (unit) with no geometry in the way.
pub fn environment_radiance(env: &EnvironmentLight, d: Vec3) -> Vec3 {
    match env {
        EnvironmentLight::Constant { radiance } => *radiance,
        EnvironmentLight::LatLong { image, rotation, .. } => {
            let (u, v) = direction_to_latlong(d, *rotation);
            let (x, y) = texel(image, u, v);
            texel_rgb(image, x, y)
        }
    }
}

/// Piecewise-constant 2D density over the texels of a lat-long map.
#[derive(Debug, Clone)]
struct Distribution2d {
    width: usize,
    height: usize,
    /// Per-row conditional CDFs, each `width + 1` long and ending at 1.
    conditional: Vec<f32>,
    /// Marginal CDF over rows, `height + 1` long.
    marginal: Vec<f32>,
    /// Normalized texel weights: `w / Σw`.
    prob: Vec<f32>,
}

fn cdf_of(weights: &[f64]) -> (Vec<f32>, f64) {
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len() + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cdf.push(if total > 0.0 { (acc / total) as f32 } else { 0.0 });
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    (cdf, total)
}

/// Index `i` with `cdf[i] <= u < cdf[i + 1]`, skipping empty bins, and the offset within it.
fn sample_cdf(cdf: &[f32], u: f32) -> (usize, f32) {
    let n = cdf.len() - 1;
    let i = cdf.partition_point(|&c| c <= u).saturating_sub(1).min(n - 1);
    let width = cdf[i + 1] - cdf[i];
    let frac = if width > 0.0 { ((u - cdf[i]) / width).clamp(0.0, 1.0 - f32::EPSILON) } else { 0.5 };
    (i, frac)
}

impl Distribution2d {
    fn new(weights: &[f64], width: usize, height: usize) -> Self {
        let mut conditional = Vec::with_capacity(height * (width + 1));
        let mut row_sums = Vec::with_capacity(height);
        for row in weights.chunks(width) {
            let (cdf, total) = cdf_of(row);
            conditional.extend(cdf);
            row_sums.push(total);
        }
        let (marginal, total) = cdf_of(&row_sums);
        let prob = weights.iter().map(|&w| (w / total) as f32).collect();
        Self { width, height, conditional, marginal, prob }
    }

    /// Returns `(u, v, density over [0,1]²)`.
    fn sample(&self, u: [f32; 2]) -> (f32, f32, f32) {
        let (row, fv) = sample_cdf(&self.marginal, u[0]);
        let start = row * (self.width + 1);
        let (col, fu) = sample_cdf(&self.conditional[start..start + self.width + 1], u[1]);
        let pdf = self.prob[row * self.width + col] * (self.width * self.height) as f32;
        ((col as f32 + fu) / self.width as f32, (row as f32 + fv) / self.height as f32, pdf)
    }

    fn pdf(&self, x: usize, y: usize) -> f32 {
        self.prob[y * self.width + x] * (self.width * self.height) as f32
    }
}

#[derive(Debug, Clone)]
enum Light {
    Sphere { primitive: usize, center: Vec3, radius: f32 },
    Quad { primitive: usize, corner: Vec3, edge_u: Vec3, edge_v: Vec3, normal: Vec3, area: f32 },
    Environment,
}

/// A light sample as seen from a shading point.
#[derive(Debug, Clone, Copy)]
pub struct LightSample {
    pub direction: Vec3,
    /// Solid-angle density including the light-selection probability.
    pub pdf: f32,
    /// Primitive the shadow ray must reach first, or `None` for the environment.
    pub primitive: Option<usize>,
}

/// Everything needed for next-event estimation.
#[derive(Debug, Clone)]
pub struct LightSet {
    lights: Vec<Light>,
    by_primitive: Vec<Option<usize>>,
    environment_index: Option<usize>,
    env_distribution: Option<(Distribution2d, f32)>,
}

impl LightSet {
    /// Emissive spheres and quads plus a non-black environment. Emissive planes
    /// are only reachable through BSDF sampling.
    pub fn new(scene: &SceneDescription) -> Self {
        let mut lights = Vec::new();
        let mut by_primitive = vec![None; scene.primitives.len()];
        for (i, p) in scene.primitives.iter().enumerate() {
            if !p.is_emissive() {
                continue;
            }
            let light = match p.shape {
                Shape::Sphere { center, radius } => Light::Sphere { primitive: i, center, radius },
                Shape::Quad { corner, edge_u, edge_v } => {
                    let n = edge_u.cross(edge_v);
                    Light::Quad { primitive: i, corner, edge_u, edge_v, normal: n.normalize(), area: n.length() }
                }
                Shape::Plane { .. } => continue,
            };
            by_primitive[i] = Some(lights.len());
            lights.push(light);
        }
        let mut environment_index = None;
        let mut env_distribution = None;
        if !scene.environment.is_black() {
            environment_index = Some(lights.len());
            lights.push(Light::Environment);
            if let EnvironmentLight::LatLong { image, rotation, .. } = &scene.environment {
                let (w, h) = (image.width, image.height);
                let mut weights = Vec::with_capacity(w * h);
                for y in 0..h {
                    let sin = (PI * (y as f32 + 0.5) / h as f32).sin();
                    for x in 0..w {
                        weights.push((texel_rgb(image, x, y).luminance().max(0.0) * sin) as f64);
                    }
                }
                env_distribution = Some((Distribution2d::new(&weights, w, h), *rotation));
            }
        }
        Self { lights, by_primitive, environment_index, env_distribution }
    }

    pub fn len(&self) -> usize {
        self.lights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lights.is_empty()
    }

    /// Picks a light uniformly with `u_pick`, then a direction with `u`.
    pub fn sample(&self, x: Vec3, u_pick: f32, u: [f32; 2]) -> Option<LightSample> {
        let n = self.lights.len();
        if n == 0 {
            return None;
        }
        let index = ((u_pick * n as f32) as usize).min(n - 1);
        let select = 1.0 / n as f32;
        let (direction, pdf, primitive) = match self.lights[index] {
            Light::Sphere { primitive, center, radius } => {
                let (d, pdf) = sample_sphere(x, center, radius, u)?;
                (d, pdf, Some(primitive))
            }
            Light::Quad { primitive, corner, edge_u, edge_v, normal, area } => {
                let p = corner + edge_u * u[0] + edge_v * u[1];
                let to = p - x;
                let dist2 = to.length_squared();
                let d = to * (1.0 / dist2.sqrt());
                let cos = normal.dot(d).abs();
                if !(cos > 1e-6) {
                    return None;
                }
                (d, dist2 / (area * cos), Some(primitive))
            }
            Light::Environment => match &self.env_distribution {
                None => (uniform_sphere(u), 1.0 / (4.0 * PI), None),
                Some((dist, rotation)) => {
                    let (su, sv, pdf_uv) = dist.sample(u);
                    let sin = (sv * PI).sin();
                    if !(pdf_uv > 0.0 && sin > 0.0) {
                        return None;
                    }
                    (latlong_to_direction(su, sv, *rotation), pdf_uv / (2.0 * PI * PI * sin), None)
                }
            },
        };
        if !(pdf > 0.0 && pdf.is_finite()) {
            return None;
        }
        Some(LightSample { direction, pdf: pdf * select, primitive })
    }

    /// Density of [`Self::sample`] producing a BSDF ray from `x` that hit emitter `hit`.
    pub fn pdf_hit(&self, x: Vec3, direction: Vec3, hit: &Hit) -> f32 {
        let Some(index) = self.by_primitive.get(hit.primitive).copied().flatten() else {
            return 0.0;
        };
        let select = 1.0 / self.lights.len() as f32;
        let pdf = match self.lights[index] {
            Light::Sphere { center, radius, .. } => sphere_pdf(x, center, radius, direction, hit),
            Light::Quad { normal, area, .. } => {
                let cos = normal.dot(direction).abs();
                if cos > 0.0 {
                    hit.t * hit.t / (area * cos)
                } else {
                    0.0
                }
            }
            Light::Environment => 0.0,
        };
        pdf * select
    }

    /// Density of sampling the environment in `direction`.
    pub fn pdf_environment(&self, direction: Vec3) -> f32 {
        if self.environment_index.is_none() {
            return 0.0;
        }
        let select = 1.0 / self.lights.len() as f32;
        let pdf = match &self.env_distribution {
            None => 1.0 / (4.0 * PI),
            Some((dist, rotation)) => {
                let (u, v) = direction_to_latlong(direction, *rotation);
                let (x, y) = texel_dims(dist, u, v);
                // Density is constant across a texel in (u, v); evaluate sinθ at the direction itself.
                let sin = (v * PI).sin();
                if sin > 0.0 {
                    dist.pdf(x, y) / (2.0 * PI * PI * sin)
                } else {
                    0.0
                }
            }
        };
        pdf * select
    }
}

fn texel_dims(dist: &Distribution2d, u: f32, v: f32) -> (usize, usize) {
    let x = ((u * dist.width as f32) as usize).min(dist.width - 1);
    let y = ((v * dist.height as f32) as usize).min(dist.height - 1);
    (x, y)
}

/// `1 − cos θmax` for the cone subtended by a sphere, or `None` from inside.
fn cone_extent(x: Vec3, center: Vec3, radius: f32) -> Option<(f32, f32)> {
    let d2 = (center - x).length_squared();
    let r2 = radius * radius;
    if d2 <= r2 * 1.0001 {
        return None;
    }
    let sin2 = r2 / d2;
    let cos = (1.0 - sin2).max(0.0).sqrt();
    Some((sin2 / (1.0 + cos), d2))
}

fn sample_sphere(x: Vec3, center: Vec3, radius: f32, u: [f32; 2]) -> Option<(Vec3, f32)> {
    match cone_extent(x, center, radius) {
        Some((one_minus_cos, d2)) => {
            let cos = 1.0 - u[0] * one_minus_cos;
            let sin = (u[0] * one_minus_cos * (2.0 - u[0] * one_minus_cos)).max(0.0).sqrt();
            let phi = 2.0 * PI * u[1];
            let axis = (center - x) * (1.0 / d2.sqrt());
            let local = Vec3::new(sin * phi.cos(), sin * phi.sin(), cos);
            let d = Frame::from_normal(axis).to_world(local).normalize();
            Some((d, 1.0 / (2.0 * PI * one_minus_cos)))
        }
        None => {
            let n = uniform_sphere(u);
            let p = center + n * radius;
            let to = p - x;
            let dist2 = to.length_squared();
            let d = to * (1.0 / dist2.sqrt());
            let cos = n.dot(d).abs();
            if !(cos > 1e-6) {
                return None;
            }
            Some((d, dist2 / (4.0 * PI * radius * radius * cos)))
        }
    }
}

fn sphere_pdf(x: Vec3, center: Vec3, radius: f32, direction: Vec3, hit: &Hit) -> f32 {
    match cone_extent(x, center, radius) {
        Some((one_minus_cos, _)) => 1.0 / (2.0 * PI * one_minus_cos),
        None => {
            let cos = hit.normal.dot(direction).abs();
            if cos > 0.0 {
                hit.t * hit.t / (4.0 * PI * radius * radius * cos)
            } else {
                0.0
            }
        }
    }
}
