//! JSON scene format.
//!
//! ```json
//! {
//!   "materials": [
//!     { "type": "lambertian", "albedo": [0.8, 0.8, 0.8] },
//!     { "type": "ggx_conductor", "reflectance": [0.9, 0.6, 0.3], "roughness": 0.2,
//!       "texture": { "type": "checker", "scale": 4.0, "color_a": [0.1, 0.1, 0.1], "color_b": [0.9, 0.9, 0.9] } },
//!     { "type": "mirror", "reflectance": [0.95, 0.95, 0.95] }
//!   ],
//!   "primitives": [
//!     { "type": "sphere", "center": [0, 1, -3], "radius": 1, "material": 0 },
//!     { "type": "quad", "corner": [-1, 3, -4], "edge_u": [2, 0, 0], "edge_v": [0, 0, 2],
//!       "material": 0, "emission": [10, 10, 10] },
//!     { "type": "plane", "point": [0, 0, 0], "normal": [0, 1, 0], "material": 1 }
//!   ],
//!   "environment": { "type": "constant", "radiance": [0.2, 0.2, 0.25] },
//!   "camera_box": { "min": [-1, 0.5, 0], "max": [1, 2, 2] }
//! }
//! ```
//!
//! `environment` may instead be `{ "type": "latlong", "image": "sky.pfm", "rotation": 0.0 }`,
//! with the image path resolved against the scene file's directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    EnvironmentLight, Material, MaterialKind, Primitive, Result, SceneDescription, SceneError, Shape, Texture,
    TexturePattern, MIN_ROUGHNESS,
};
use crate::image_io::read_pfm;
use crate::math::{Aabb, Vec3};

type Arr = [f32; 3];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    materials: Vec<MaterialDoc>,
    primitives: Vec<PrimitiveDoc>,
    environment: EnvironmentDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    camera_box: Option<BoxDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialDoc {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    albedo: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reflectance: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roughness: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    texture: Option<TextureDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextureDoc {
    #[serde(rename = "type")]
    kind: String,
    scale: f32,
    color_a: Arr,
    color_b: Arr,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimitiveDoc {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    corner: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_u: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_v: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normal: Option<Arr>,
    material: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emission: Option<Arr>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentDoc {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radiance: Option<Arr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxDoc {
    min: Arr,
    max: Arr,
}

fn need<T>(v: Option<T>, what: impl Into<String>, field: &'static str) -> Result<T> {
    v.ok_or_else(|| SceneError::MissingField { what: what.into(), field })
}

/// Reads and parses a scene file; relative image paths resolve against its directory.
pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneDescription> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_scene_in(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses a scene document, resolving relative image paths against the working directory.
pub fn parse_scene(text: &str) -> Result<SceneDescription> {
    parse_scene_in(text, Path::new("."))
}

pub fn parse_scene_in(text: &str, base_dir: &Path) -> Result<SceneDescription> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| SceneError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut materials = Vec::with_capacity(doc.materials.len());
    for (i, m) in doc.materials.into_iter().enumerate() {
        let what = format!("material {i}");
        let kind = match m.kind.as_str() {
            "lambertian" => MaterialKind::Lambertian { albedo: need(m.albedo, &what, "albedo")?.into() },
            "mirror" => MaterialKind::Mirror { reflectance: need(m.reflectance, &what, "reflectance")?.into() },
            "ggx_conductor" => {
                let roughness = need(m.roughness, &what, "roughness")?;
                if !roughness.is_finite() {
                    return Err(SceneError::NonFinite(what));
                }
                MaterialKind::GgxConductor {
                    reflectance: need(m.reflectance, &what, "reflectance")?.into(),
                    roughness: roughness.clamp(MIN_ROUGHNESS, 1.0),
                }
            }
            _ => return Err(SceneError::UnknownMaterialKind(m.kind)),
        };
        let texture = match m.texture {
            None => None,
            Some(t) => {
                let pattern = match t.kind.as_str() {
                    "checker" => TexturePattern::Checker,
                    "value_noise" => TexturePattern::ValueNoise,
                    _ => return Err(SceneError::UnknownKind { what: "texture", name: t.kind }),
                };
                if !t.scale.is_finite() {
                    return Err(SceneError::NonFinite(format!("{what} texture")));
                }
                Some(Texture { pattern, scale: t.scale, color_a: t.color_a.into(), color_b: t.color_b.into() })
            }
        };
        materials.push(Material { kind, texture });
    }

    let mut primitives = Vec::with_capacity(doc.primitives.len());
    for (i, p) in doc.primitives.into_iter().enumerate() {
        let what = format!("primitive {i}");
        let shape = match p.kind.as_str() {
            "sphere" => Shape::Sphere {
                center: need(p.center, &what, "center")?.into(),
                radius: need(p.radius, &what, "radius")?,
            },
            "quad" => Shape::Quad {
                corner: need(p.corner, &what, "corner")?.into(),
                edge_u: need(p.edge_u, &what, "edge_u")?.into(),
                edge_v: need(p.edge_v, &what, "edge_v")?.into(),
            },
            "plane" => Shape::Plane {
                point: need(p.point, &what, "point")?.into(),
                normal: need(p.normal, &what, "normal")?.into(),
            },
            _ => return Err(SceneError::UnknownKind { what: "primitive", name: p.kind }),
        };
        if let Shape::Sphere { radius, .. } = shape {
            if !radius.is_finite() {
                return Err(SceneError::NonFinite(what));
            }
        }
        primitives.push(Primitive {
            shape,
            material: p.material,
            emission: p.emission.map(Vec3::from).unwrap_or(Vec3::ZERO),
        });
    }

    let environment = match doc.environment.kind.as_str() {
        "constant" => EnvironmentLight::Constant {
            radiance: need(doc.environment.radiance, "environment", "radiance")?.into(),
        },
        "latlong" => {
            let source = PathBuf::from(need(doc.environment.image, "environment", "image")?);
            let resolved = if source.is_absolute() { source.clone() } else { base_dir.join(&source) };
            let image = read_pfm(&resolved)?;
            if image.channels != 3 {
                return Err(SceneError::Invalid {
                    what: "environment".into(),
                    reason: "latlong image must have 3 channels".into(),
                });
            }
            EnvironmentLight::LatLong {
                image: Arc::new(image),
                source,
                rotation: doc.environment.rotation.unwrap_or(0.0),
            }
        }
        _ => return Err(SceneError::UnknownKind { what: "environment", name: doc.environment.kind }),
    };

    let camera_box = doc.camera_box.map(|b| Aabb { min: b.min.into(), max: b.max.into() });
    SceneDescription::new(materials, primitives, environment, camera_box)
}

/// Canonical pretty-printed JSON for a scene.
pub fn serialize_scene(scene: &SceneDescription) -> String {
    let materials = scene
        .materials
        .iter()
        .map(|m| {
            let (kind, albedo, reflectance, roughness) = match m.kind {
                MaterialKind::Lambertian { albedo } => ("lambertian", Some(albedo.into()), None, None),
                MaterialKind::Mirror { reflectance } => ("mirror", None, Some(reflectance.into()), None),
                MaterialKind::GgxConductor { reflectance, roughness } => {
                    ("ggx_conductor", None, Some(reflectance.into()), Some(roughness))
                }
            };
            MaterialDoc {
                kind: kind.into(),
                albedo,
                reflectance,
                roughness,
                texture: m.texture.as_ref().map(|t| TextureDoc {
                    kind: match t.pattern {
                        TexturePattern::Checker => "checker".into(),
                        TexturePattern::ValueNoise => "value_noise".into(),
                    },
                    scale: t.scale,
                    color_a: t.color_a.into(),
                    color_b: t.color_b.into(),
                }),
            }
        })
        .collect();

    let primitives = scene
        .primitives
        .iter()
        .map(|p| {
            let mut doc = PrimitiveDoc {
                kind: String::new(),
                center: None,
                radius: None,
                corner: None,
                edge_u: None,
                edge_v: None,
                point: None,
                normal: None,
                material: p.material,
                emission: p.is_emissive().then(|| p.emission.into()),
            };
            match p.shape {
                Shape::Sphere { center, radius } => {
                    doc.kind = "sphere".into();
                    doc.center = Some(center.into());
                    doc.radius = Some(radius);
                }
                Shape::Quad { corner, edge_u, edge_v } => {
                    doc.kind = "quad".into();
                    doc.corner = Some(corner.into());
                    doc.edge_u = Some(edge_u.into());
                    doc.edge_v = Some(edge_v.into());
                }
                Shape::Plane { point, normal } => {
                    doc.kind = "plane".into();
                    doc.point = Some(point.into());
                    doc.normal = Some(normal.into());
                }
            }
            doc
        })
        .collect();

    let environment = match &scene.environment {
        EnvironmentLight::Constant { radiance } => EnvironmentDoc {
            kind: "constant".into(),
            radiance: Some((*radiance).into()),
            image: None,
            rotation: None,
        },
        EnvironmentLight::LatLong { source, rotation, .. } => EnvironmentDoc {
            kind: "latlong".into(),
            radiance: None,
            image: Some(source.to_string_lossy().into_owned()),
            rotation: Some(*rotation),
        },
    };

    let doc = SceneDoc {
        materials,
        primitives,
        environment,
        camera_box: scene.camera_box.map(|b| BoxDoc { min: b.min.into(), max: b.max.into() }),
    };
    serde_json::to_string_pretty(&doc).expect("scene documents always serialize")
}
