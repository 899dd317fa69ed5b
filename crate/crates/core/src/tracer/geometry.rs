use crate::math::Vec3;
use crate::scene::{SceneDescription, Shape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
    pub t_min: f32,
    pub t_max: f32,
}

impl Ray {
    #[inline]
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Self { origin, direction, t_min: 0.0, t_max: f32::INFINITY }
    }

    #[inline]
    pub fn at(&self, t: f32) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f32,
    pub point: Vec3,
    /// Geometric normal, unit length, not oriented toward the ray.
    pub normal: Vec3,
    pub primitive: usize,
    pub material: usize,
    pub emitted: Vec3,
}

/// Distance to the nearest intersection of `shape` with `ray` inside `(t_min, t_max)`.
#[inline]
fn intersect_shape(shape: &Shape, ray: &Ray, t_max: f32) -> Option<(f32, Vec3)> {
    match *shape {
        Shape::Sphere { center, radius } => {
            let oc = ray.origin - center;
            let b = oc.dot(ray.direction);
            // r² − |oc − b·d|² avoids cancellation in b² − c for distant spheres.
            let perp = oc - ray.direction * b;
            let disc = radius * radius - perp.length_squared();
            if disc < 0.0 {
                return None;
            }
            let s = disc.sqrt();
            let c = oc.length_squared() - radius * radius;
            // Stable root pair: q = −b − sign(b)·s, roots q and c/q.
            let q = if b > 0.0 { -b - s } else { -b + s };
            let (mut t0, mut t1) = (q, if q != 0.0 { c / q } else { 0.0 });
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            let t = if t0 > ray.t_min && t0 < t_max {
                t0
            } else if t1 > ray.t_min && t1 < t_max {
                t1
            } else {
                return None;
            };
            let normal = (ray.at(t) - center) * (1.0 / radius);
            Some((t, normal))
        }
        Shape::Quad { corner, edge_u, edge_v } => {
            let n = edge_u.cross(edge_v);
            let denom = n.dot(ray.direction);
            if denom == 0.0 {
                return None;
            }
            let t = n.dot(corner - ray.origin) / denom;
            if !(t > ray.t_min && t < t_max) {
                return None;
            }
            let rel = ray.at(t) - corner;
            let inv = 1.0 / n.length_squared();
            let a = n.dot(rel.cross(edge_v)) * inv;
            let b = n.dot(edge_u.cross(rel)) * inv;
            if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
                return None;
            }
            Some((t, n * inv.sqrt()))
        }
        Shape::Plane { point, normal } => {
            let denom = normal.dot(ray.direction);
            if denom == 0.0 {
                return None;
            }
            let t = normal.dot(point - ray.origin) / denom;
            if !(t > ray.t_min && t < t_max) {
                return None;
            }
            Some((t, normal))
        }
    }
}

/// Nearest hit along `ray`, by brute force over every primitive.
pub fn intersect(scene: &SceneDescription, ray: &Ray) -> Option<Hit> {
    let mut best: Option<(usize, f32, Vec3)> = None;
    let mut t_max = ray.t_max;
    for (i, prim) in scene.primitives.iter().enumerate() {
        if let Some((t, n)) = intersect_shape(&prim.shape, ray, t_max) {
            t_max = t;
            best = Some((i, t, n));
        }
    }
    best.map(|(i, t, normal)| {
        let prim = &scene.primitives[i];
        Hit {
            t,
            point: ray.at(t),
            normal,
            primitive: i,
            material: prim.material,
            emitted: prim.emission,
        }
    })
}

/// Offsets a surface point along `n` (which must face the side the new ray leaves from).
#[inline]
pub(crate) fn offset_origin(p: Vec3, n: Vec3) -> Vec3 {
    let scale = 1e-4 * p.x.abs().max(p.y.abs()).max(p.z.abs()).max(1.0);
    p + n * scale
}
