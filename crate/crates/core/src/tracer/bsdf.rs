//! Reflection models resolved at a surface point.
//!
//! All directions point away from the surface. `normal` must already be
//! oriented toward the side being shaded; directions below it get zero.

use crate::math::{Frame, Vec3, INV_PI, PI};
use crate::scene::{Material, MaterialKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdfSample {
    pub w_in: Vec3,
    /// Solid-angle density; 1 for delta lobes by convention.
    pub pdf: f32,
    /// `f · cos / pdf`.
    pub weight: Vec3,
    pub delta: bool,
}

#[derive(Debug, Clone, Copy)]
enum Lobe {
    Diffuse { albedo: Vec3 },
    Mirror { reflectance: Vec3 },
    Ggx { f0: Vec3, alpha: f32 },
}

/// A material evaluated at one point, in the local shading frame.
#[derive(Debug, Clone, Copy)]
pub struct Bsdf {
    lobe: Lobe,
    frame: Frame,
}

impl Bsdf {
    pub fn new(material: &Material, position: Vec3, normal: Vec3) -> Self {
        let color = material.base_color(position);
        let lobe = match material.kind {
            MaterialKind::Lambertian { .. } => Lobe::Diffuse { albedo: color },
            MaterialKind::Mirror { .. } => Lobe::Mirror { reflectance: color },
            MaterialKind::GgxConductor { roughness, .. } => Lobe::Ggx { f0: color, alpha: roughness * roughness },
        };
        Self { lobe, frame: Frame::from_normal(normal) }
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.lobe, Lobe::Mirror { .. })
    }

    /// BSDF value `f(w_out, w_in)` (without the cosine).
    pub fn eval(&self, w_out: Vec3, w_in: Vec3) -> Vec3 {
        let (wo, wi) = (self.frame.to_local(w_out), self.frame.to_local(w_in));
        if wo.z <= 0.0 || wi.z <= 0.0 {
            return Vec3::ZERO;
        }
        match self.lobe {
            Lobe::Diffuse { albedo } => albedo * INV_PI,
            Lobe::Mirror { .. } => Vec3::ZERO,
            Lobe::Ggx { f0, alpha } => {
                let h = (wo + wi).normalize();
                let d = ggx_d(h.z, alpha);
                let g = smith_g1(wo.z, alpha) * smith_g1(wi.z, alpha);
                schlick(f0, wi.dot(h)) * (d * g / (4.0 * wo.z * wi.z))
            }
        }
    }

    /// Density with which [`Self::sample`] produces `w_in`; zero for delta lobes.
    pub fn pdf(&self, w_out: Vec3, w_in: Vec3) -> f32 {
        let (wo, wi) = (self.frame.to_local(w_out), self.frame.to_local(w_in));
        if wo.z <= 0.0 || wi.z <= 0.0 {
            return 0.0;
        }
        match self.lobe {
            Lobe::Diffuse { .. } => wi.z * INV_PI,
            Lobe::Mirror { .. } => 0.0,
            Lobe::Ggx { alpha, .. } => {
                let h = (wo + wi).normalize();
                ggx_d(h.z, alpha) * h.z / (4.0 * wo.dot(h))
            }
        }
    }

    /// Draws an incident direction from two uniforms in `[0, 1)`.
    pub fn sample(&self, w_out: Vec3, u: [f32; 2]) -> Option<BsdfSample> {
        let wo = self.frame.to_local(w_out);
        if wo.z <= 0.0 {
            return None;
        }
        match self.lobe {
            Lobe::Diffuse { albedo } => {
                let wi = cosine_hemisphere(u);
                if wi.z <= 0.0 {
                    return None;
                }
                Some(BsdfSample {
                    w_in: self.frame.to_world(wi),
                    pdf: wi.z * INV_PI,
                    weight: albedo,
                    delta: false,
                })
            }
            Lobe::Mirror { reflectance } => {
                let wi = Vec3::new(-wo.x, -wo.y, wo.z);
                Some(BsdfSample { w_in: self.frame.to_world(wi), pdf: 1.0, weight: reflectance, delta: true })
            }
            Lobe::Ggx { f0, alpha } => {
                let h = sample_ggx_half(u, alpha);
                let wo_h = wo.dot(h);
                if wo_h <= 0.0 {
                    return None;
                }
                let wi = wo.reflect(h);
                if wi.z <= 0.0 {
                    return None;
                }
                let pdf = ggx_d(h.z, alpha) * h.z / (4.0 * wo_h);
                let g = smith_g1(wo.z, alpha) * smith_g1(wi.z, alpha);
                let weight = schlick(f0, wo_h) * (g * wo_h / (wo.z * h.z));
                if !(pdf > 0.0) || !weight.is_finite() {
                    return None;
                }
                Some(BsdfSample { w_in: self.frame.to_world(wi), pdf, weight, delta: false })
            }
        }
    }
}

/// `f(w_out, w_in)` for `material` at `position` with oriented `normal`.
pub fn eval_bsdf(material: &Material, position: Vec3, w_out: Vec3, w_in: Vec3, normal: Vec3) -> Vec3 {
    Bsdf::new(material, position, normal).eval(w_out, w_in)
}

/// Importance-samples `material` at `position` with oriented `normal`.
pub fn sample_bsdf(material: &Material, position: Vec3, w_out: Vec3, normal: Vec3, u: [f32; 2]) -> Option<BsdfSample> {
    Bsdf::new(material, position, normal).sample(w_out, u)
}

#[inline]
fn ggx_d(cos_h: f32, alpha: f32) -> f32 {
    if cos_h <= 0.0 {
        return 0.0;
    }
    let a2 = alpha * alpha;
    let c2 = cos_h * cos_h;
    let k = c2 * (a2 - 1.0) + 1.0;
    a2 / (PI * k * k)
}

/// Smith masking term for GGX, written as `2 / (1 + sqrt(1 + α² tan²θ))`.
#[inline]
fn smith_g1(cos: f32, alpha: f32) -> f32 {
    let c2 = cos * cos;
    let a2 = alpha * alpha;
    2.0 * cos / (cos + (a2 + (1.0 - a2) * c2).sqrt())
}

#[inline]
fn schlick(f0: Vec3, cos: f32) -> Vec3 {
    let m = (1.0 - cos.clamp(0.0, 1.0)).powi(5);
    f0 + (Vec3::ONE - f0) * m
}

fn sample_ggx_half(u: [f32; 2], alpha: f32) -> Vec3 {
    let a2 = alpha * alpha;
    let cos2 = (1.0 - u[0]) / (1.0 + (a2 - 1.0) * u[0]);
    let cos = cos2.clamp(0.0, 1.0).sqrt();
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let phi = 2.0 * PI * u[1];
    Vec3::new(sin * phi.cos(), sin * phi.sin(), cos)
}

pub(crate) fn cosine_hemisphere(u: [f32; 2]) -> Vec3 {
    let r = u[0].sqrt();
    let phi = 2.0 * PI * u[1];
    Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u[0]).max(0.0).sqrt())
}

pub(crate) fn uniform_sphere(u: [f32; 2]) -> Vec3 {
    let z = 1.0 - 2.0 * u[0];
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * u[1];
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg32;

    fn uv(rng: &mut Pcg32) -> [f32; 2] {
        [rng.random(), rng.random()]
    }

    #[test]
    fn lambertian_value() {
        let m = Material::lambertian(Vec3::splat(0.6));
        let f = eval_bsdf(&m, Vec3::ZERO, Vec3::Z, Vec3::new(0.6, 0.0, 0.8), Vec3::Z);
        // 0.6 / π
        assert!((f.x - 0.190_985_93).abs() < 1e-6);
        let below = eval_bsdf(&m, Vec3::ZERO, Vec3::Z, -Vec3::Z, Vec3::Z);
        assert_eq!(below, Vec3::ZERO);
    }

    #[test]
    fn cosine_sampling_mean_cosine() {
        let m = Material::lambertian(Vec3::splat(0.5));
        let n = Vec3::new(0.3, 0.4, -0.5).normalize();
        let mut rng = Pcg32::seed_from_u64(1);
        let count = 100_000;
        let mut acc = 0.0f64;
        for _ in 0..count {
            let s = sample_bsdf(&m, Vec3::ZERO, n, n, uv(&mut rng)).unwrap();
            acc += s.w_in.dot(n) as f64;
        }
        // ∫ cos · cos/π dω = 2/3
        assert!((acc / count as f64 - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn smooth_ggx_concentrates_on_mirror_direction() {
        let m = Material::ggx(Vec3::splat(0.9), 0.01);
        let n = Vec3::Z;
        let wo = Vec3::new(0.5, 0.2, 0.8).normalize();
        let mirror = wo.reflect(n);
        let mut rng = Pcg32::seed_from_u64(2);
        let count = 20_000;
        let cos5 = 5f32.to_radians().cos();
        let close = (0..count)
            .filter(|_| sample_bsdf(&m, Vec3::ZERO, wo, n, uv(&mut rng)).is_some_and(|s| s.w_in.dot(mirror) >= cos5))
            .count();
        assert!(close as f64 >= 0.99 * count as f64, "{close}/{count}");
    }

    #[test]
    fn mirror_reflects_exactly() {
        let m = Material::mirror(Vec3::splat(0.8));
        let n = Vec3::new(0.0, 1.0, 0.0);
        let wo = Vec3::new(1.0, 1.0, 0.0).normalize();
        let s = sample_bsdf(&m, Vec3::ZERO, wo, n, [0.3, 0.7]).unwrap();
        assert!((s.w_in - Vec3::new(-1.0, 1.0, 0.0).normalize()).length() < 1e-6);
        assert!(s.delta);
        assert_eq!(s.weight, Vec3::splat(0.8));
        assert_eq!(eval_bsdf(&m, Vec3::ZERO, wo, s.w_in, n), Vec3::ZERO);
    }

    #[test]
    fn below_horizon_outgoing_gives_nothing() {
        for m in [Material::lambertian(Vec3::ONE), Material::mirror(Vec3::ONE), Material::ggx(Vec3::ONE, 0.3)] {
            assert!(sample_bsdf(&m, Vec3::ZERO, -Vec3::Z, Vec3::Z, [0.2, 0.2]).is_none());
        }
    }

    /// Sample weights must equal f·cos/pdf computed through eval and pdf.
    #[test]
    fn ggx_sample_weight_matches_eval() {
        let m = Material::ggx(Vec3::new(0.9, 0.5, 0.2), 0.5);
        let n = Vec3::Z;
        let wo = Vec3::new(-0.3, 0.1, 0.9).normalize();
        let bsdf = Bsdf::new(&m, Vec3::ZERO, n);
        let mut rng = Pcg32::seed_from_u64(3);
        for _ in 0..1000 {
            if let Some(s) = bsdf.sample(wo, uv(&mut rng)) {
                let expect = bsdf.eval(wo, s.w_in) * (s.w_in.z / bsdf.pdf(wo, s.w_in));
                assert!((expect - s.weight).length() < 1e-3 * expect.length().max(1.0));
                assert!((bsdf.pdf(wo, s.w_in) - s.pdf).abs() < 1e-3 * s.pdf.max(1.0));
            }
        }
    }

    /// White-ish furnace: a GGX lobe with F0 = 1 reflects at most all energy.
    #[test]
    fn ggx_albedo_is_bounded() {
        let bsdf = Bsdf::new(&Material::ggx(Vec3::ONE, 0.7), Vec3::ZERO, Vec3::Z);
        let wo = Vec3::new(0.4, 0.0, 0.9).normalize();
        let mut rng = Pcg32::seed_from_u64(4);
        let count = 50_000;
        let mut acc = 0.0f64;
        for _ in 0..count {
            if let Some(s) = bsdf.sample(wo, uv(&mut rng)) {
                acc += s.weight.x as f64;
            }
        }
        let albedo = acc / count as f64;
        assert!(albedo > 0.5 && albedo <= 1.01, "{albedo}");
    }

    #[test]
    fn lambertian_pdf_integrates_to_one() {
        let bsdf = Bsdf::new(&Material::lambertian(Vec3::ONE), Vec3::ZERO, Vec3::Z);
        let mut rng = Pcg32::seed_from_u64(5);
        let count = 200_000;
        let mut acc = 0.0f64;
        for _ in 0..count {
            let w = uniform_sphere(uv(&mut rng));
            acc += (bsdf.pdf(Vec3::Z, w) * 4.0 * PI) as f64;
        }
        assert!((acc / count as f64 - 1.0).abs() < 0.01);
    }
}
