//! Scene description: primitives, materials, environment lighting, and the
//! camera-placement box used by the dataset generator.

mod format;
mod randomize;
mod texture;

use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::image_io::{HdrImage, ImageError};
use crate::math::{Aabb, Vec3};

pub use format::{load_scene, parse_scene, parse_scene_in, serialize_scene};
pub use randomize::{add_random_orbs, randomize_materials, ORB_LUMINANCE, ORB_RADIUS_FRACTION};
pub use texture::{Texture, TexturePattern};

/// Lower roughness bound; smaller values are clamped.
pub const MIN_ROUGHNESS: f32 = 0.01;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown material kind {0:?}")]
    UnknownMaterialKind(String),
    #[error("unknown {what} {name:?}")]
    UnknownKind { what: &'static str, name: String },
    #[error("missing field {field:?} for {what}")]
    MissingField { what: String, field: &'static str },
    #[error("primitive {primitive} references material {index}, but only {count} materials exist")]
    DanglingMaterial { primitive: usize, index: usize, count: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },
    #[error("scene has no light source (no emissive primitive and a black environment)")]
    NoLight,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("environment image: {0}")]
    Image(#[from] ImageError),
}

pub type Result<T, E = SceneError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f32 },
    /// Parallelogram spanned by `edge_u` and `edge_v` from `corner`.
    Quad { corner: Vec3, edge_u: Vec3, edge_v: Vec3 },
    /// Infinite plane.
    Plane { point: Vec3, normal: Vec3 },
}

impl Shape {
    /// Bounding box, or `None` for unbounded shapes.
    pub fn bounds(&self) -> Option<Aabb> {
        match *self {
            Shape::Sphere { center, radius } => Some(Aabb {
                min: center - Vec3::splat(radius),
                max: center + Vec3::splat(radius),
            }),
            Shape::Quad { corner, edge_u, edge_v } => {
                let mut b = Aabb::empty();
                for p in [corner, corner + edge_u, corner + edge_v, corner + edge_u + edge_v] {
                    b.grow(p);
                }
                Some(b)
            }
            Shape::Plane { .. } => None,
        }
    }

    pub fn centroid(&self) -> Vec3 {
        match *self {
            Shape::Sphere { center, .. } => center,
            Shape::Quad { corner, edge_u, edge_v } => corner + (edge_u + edge_v) * 0.5,
            Shape::Plane { point, .. } => point,
        }
    }

    /// True when `p` lies strictly inside a closed shape.
    pub fn contains(&self, p: Vec3) -> bool {
        match *self {
            Shape::Sphere { center, radius } => (p - center).length_squared() < radius * radius,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub material: usize,
    /// Radiance emitted from both sides of the surface; zero for non-emitters.
    pub emission: Vec3,
}

impl Primitive {
    pub fn is_emissive(&self) -> bool {
        !self.emission.is_black()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialKind {
    Lambertian { albedo: Vec3 },
    Mirror { reflectance: Vec3 },
    /// Microfacet conductor. GGX width is `roughness²`.
    GgxConductor { reflectance: Vec3, roughness: f32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub kind: MaterialKind,
    /// Replaces the albedo/reflectance with a procedural pattern when present.
    pub texture: Option<Texture>,
}

impl Material {
    pub fn lambertian(albedo: Vec3) -> Self {
        Self { kind: MaterialKind::Lambertian { albedo }, texture: None }
    }

    pub fn mirror(reflectance: Vec3) -> Self {
        Self { kind: MaterialKind::Mirror { reflectance }, texture: None }
    }

    pub fn ggx(reflectance: Vec3, roughness: f32) -> Self {
        Self {
            kind: MaterialKind::GgxConductor {
                reflectance,
                roughness: roughness.clamp(MIN_ROUGHNESS, 1.0),
            },
            texture: None,
        }
    }

    pub fn with_texture(mut self, texture: Texture) -> Self {
        self.texture = Some(texture);
        self
    }

    /// Albedo or reflectance at world position `p`.
    #[inline]
    pub fn base_color(&self, p: Vec3) -> Vec3 {
        if let Some(tex) = &self.texture {
            return tex.eval(p);
        }
        match self.kind {
            MaterialKind::Lambertian { albedo } => albedo,
            MaterialKind::Mirror { reflectance } => reflectance,
            MaterialKind::GgxConductor { reflectance, .. } => reflectance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentLight {
    Constant { radiance: Vec3 },
    /// Equirectangular map; `rotation` turns it about +y (radians).
    LatLong { image: Arc<HdrImage>, source: PathBuf, rotation: f32 },
}

impl EnvironmentLight {
    pub fn is_black(&self) -> bool {
        match self {
            EnvironmentLight::Constant { radiance } => radiance.is_black(),
            EnvironmentLight::LatLong { image, .. } => image.data.iter().all(|&v| v == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescription {
    pub materials: Vec<Material>,
    pub primitives: Vec<Primitive>,
    pub environment: EnvironmentLight,
    /// Region in which the dataset generator may place input cameras.
    pub camera_box: Option<Aabb>,
}

fn check_finite(v: Vec3, what: impl FnOnce() -> String) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SceneError::NonFinite(what()))
    }
}

fn check_unit_range(v: Vec3, what: impl Fn() -> String) -> Result<()> {
    check_finite(v, &what)?;
    if v.min_component() < 0.0 || v.max_component() > 1.0 {
        return Err(SceneError::Invalid { what: what(), reason: format!("{v:?} outside [0, 1]") });
    }
    Ok(())
}

impl SceneDescription {
    /// Builds a scene and checks every invariant.
    pub fn new(
        materials: Vec<Material>,
        primitives: Vec<Primitive>,
        environment: EnvironmentLight,
        camera_box: Option<Aabb>,
    ) -> Result<Self> {
        let scene = Self { materials, primitives, environment, camera_box };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.materials.iter().enumerate() {
            let what = || format!("material {i}");
            match m.kind {
                MaterialKind::Lambertian { albedo } => check_unit_range(albedo, what)?,
                MaterialKind::Mirror { reflectance } => check_unit_range(reflectance, what)?,
                MaterialKind::GgxConductor { reflectance, roughness } => {
                    check_unit_range(reflectance, what)?;
                    if !roughness.is_finite() {
                        return Err(SceneError::NonFinite(what()));
                    }
                    if !(MIN_ROUGHNESS..=1.0).contains(&roughness) {
                        return Err(SceneError::Invalid {
                            what: what(),
                            reason: format!("roughness {roughness} outside [{MIN_ROUGHNESS}, 1]"),
                        });
                    }
                }
            }
            if let Some(t) = &m.texture {
                let what = || format!("material {i} texture");
                check_unit_range(t.color_a, what)?;
                check_unit_range(t.color_b, what)?;
                if !(t.scale.is_finite() && t.scale > 0.0) {
                    return Err(SceneError::Invalid { what: what(), reason: format!("scale {}", t.scale) });
                }
            }
        }

        for (i, p) in self.primitives.iter().enumerate() {
            let what = || format!("primitive {i}");
            if p.material >= self.materials.len() {
                return Err(SceneError::DanglingMaterial {
                    primitive: i,
                    index: p.material,
                    count: self.materials.len(),
                });
            }
            check_finite(p.emission, what)?;
            if p.emission.min_component() < 0.0 {
                return Err(SceneError::Invalid { what: what(), reason: "negative emission".into() });
            }
            match p.shape {
                Shape::Sphere { center, radius } => {
                    check_finite(center, what)?;
                    if !(radius.is_finite() && radius > 0.0) {
                        return Err(SceneError::Invalid { what: what(), reason: format!("radius {radius}") });
                    }
                }
                Shape::Quad { corner, edge_u, edge_v } => {
                    check_finite(corner, what)?;
                    check_finite(edge_u, what)?;
                    check_finite(edge_v, what)?;
                    let area = edge_u.cross(edge_v).length();
                    if !(area > 1e-6 * edge_u.length() * edge_v.length()) {
                        return Err(SceneError::Invalid {
                            what: what(),
                            reason: "quad edges are linearly dependent".into(),
                        });
                    }
                }
                Shape::Plane { point, normal } => {
                    check_finite(point, what)?;
                    check_finite(normal, what)?;
                    if (normal.length() - 1.0).abs() > 1e-6 {
                        return Err(SceneError::Invalid {
                            what: what(),
                            reason: format!("normal length {} is not 1", normal.length()),
                        });
                    }
                }
            }
        }

        match &self.environment {
            EnvironmentLight::Constant { radiance } => {
                check_finite(*radiance, || "environment".into())?;
                if radiance.min_component() < 0.0 {
                    return Err(SceneError::Invalid {
                        what: "environment".into(),
                        reason: "negative radiance".into(),
                    });
                }
            }
            EnvironmentLight::LatLong { image, rotation, .. } => {
                if !rotation.is_finite() {
                    return Err(SceneError::NonFinite("environment rotation".into()));
                }
                if image.width == 0 || image.height == 0 {
                    return Err(SceneError::Invalid { what: "environment".into(), reason: "empty image".into() });
                }
                if image.data.iter().any(|v| !v.is_finite()) {
                    return Err(SceneError::NonFinite("environment image".into()));
                }
                if image.data.iter().any(|&v| v < 0.0) {
                    return Err(SceneError::Invalid {
                        what: "environment".into(),
                        reason: "negative radiance".into(),
                    });
                }
            }
        }

        if let Some(b) = &self.camera_box {
            check_finite(b.min, || "camera_box".into())?;
            check_finite(b.max, || "camera_box".into())?;
            if b.is_empty() {
                return Err(SceneError::Invalid { what: "camera_box".into(), reason: "min > max".into() });
            }
        }

        if !self.has_light() {
            return Err(SceneError::NoLight);
        }
        Ok(())
    }

    pub fn has_light(&self) -> bool {
        self.primitives.iter().any(Primitive::is_emissive) || !self.environment.is_black()
    }

    /// Bounds of all bounded primitives, falling back to the camera box and
    /// then to the unit cube.
    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for p in &self.primitives {
            if let Some(pb) = p.shape.bounds() {
                b.union(&pb);
            }
        }
        if b.is_empty() {
            if let Some(cb) = self.camera_box {
                return cb;
            }
            return Aabb { min: Vec3::splat(-1.0), max: Vec3::splat(1.0) };
        }
        b
    }

    /// Indices of materials referenced by at least one emissive primitive.
    pub fn emissive_materials(&self) -> Vec<bool> {
        let mut out = vec![false; self.materials.len()];
        for p in &self.primitives {
            if p.is_emissive() {
                if let Some(slot) = out.get_mut(p.material) {
                    *slot = true;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(radius: f32, material: usize) -> Primitive {
        Primitive { shape: Shape::Sphere { center: Vec3::ZERO, radius }, material, emission: Vec3::ZERO }
    }

    fn env() -> EnvironmentLight {
        EnvironmentLight::Constant { radiance: Vec3::splat(1.0) }
    }

    #[test]
    fn valid_scene_builds() {
        let s = SceneDescription::new(vec![Material::lambertian(Vec3::splat(0.5))], vec![sphere(1.0, 0)], env(), None);
        assert!(s.is_ok());
    }

    #[test]
    fn dangling_material_rejected() {
        let err = SceneDescription::new(
            vec![Material::lambertian(Vec3::splat(0.5)); 2],
            vec![sphere(1.0, 5)],
            env(),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, SceneError::DanglingMaterial { index: 5, count: 2, .. }));
    }

    #[test]
    fn negative_radius_rejected() {
        let err = SceneDescription::new(vec![Material::lambertian(Vec3::ONE)], vec![sphere(-1.0, 0)], env(), None)
            .unwrap_err();
        assert!(matches!(err, SceneError::Invalid { .. }));
    }

    #[test]
    fn sceneless_light_rejected() {
        let err = SceneDescription::new(
            vec![Material::lambertian(Vec3::ONE)],
            vec![sphere(1.0, 0)],
            EnvironmentLight::Constant { radiance: Vec3::ZERO },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, SceneError::NoLight));
    }

    #[test]
    fn degenerate_quad_and_plane_rejected() {
        let quad = Primitive {
            shape: Shape::Quad { corner: Vec3::ZERO, edge_u: Vec3::X, edge_v: Vec3::X * 2.0 },
            material: 0,
            emission: Vec3::ZERO,
        };
        assert!(SceneDescription::new(vec![Material::lambertian(Vec3::ONE)], vec![quad], env(), None).is_err());
        let plane = Primitive {
            shape: Shape::Plane { point: Vec3::ZERO, normal: Vec3::new(0.0, 2.0, 0.0) },
            material: 0,
            emission: Vec3::ZERO,
        };
        assert!(SceneDescription::new(vec![Material::lambertian(Vec3::ONE)], vec![plane], env(), None).is_err());
    }

    #[test]
    fn albedo_out_of_range_rejected() {
        let err = SceneDescription::new(vec![Material::lambertian(Vec3::splat(1.5))], vec![sphere(1.0, 0)], env(), None)
            .unwrap_err();
        assert!(matches!(err, SceneError::Invalid { .. }));
    }

    #[test]
    fn roughness_is_clamped() {
        match Material::ggx(Vec3::ONE, 0.0).kind {
            MaterialKind::GgxConductor { roughness, .. } => assert_eq!(roughness, MIN_ROUGHNESS),
            _ => unreachable!(),
        }
    }
}
