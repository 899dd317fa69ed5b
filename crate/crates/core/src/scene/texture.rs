use crate::math::Vec3;
use crate::rng::splitmix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TexturePattern {
    Checker,
    ValueNoise,
}

/// Solid (world-space) procedural texture blending two colors.
#[derive(Debug, Clone, PartialEq)]
pub struct Texture {
    pub pattern: TexturePattern,
    /// Pattern frequency in cycles per meter.
    pub scale: f32,
    pub color_a: Vec3,
    pub color_b: Vec3,
}

impl Texture {
    #[inline]
    pub fn eval(&self, p: Vec3) -> Vec3 {
        let q = p * self.scale;
        let t = match self.pattern {
            TexturePattern::Checker => checker(q),
            TexturePattern::ValueNoise => value_noise(q),
        };
        self.color_a.lerp(self.color_b, t)
    }
}

fn checker(q: Vec3) -> f32 {
    let s = q.x.floor() as i64 + q.y.floor() as i64 + q.z.floor() as i64;
    (s.rem_euclid(2)) as f32
}

fn lattice(x: i64, y: i64, z: i64) -> f32 {
    let h = splitmix64((x as u64).wrapping_mul(0x8CB9_2BA7_2F3D_8DD7) ^ splitmix64((y as u64) ^ splitmix64(z as u64)));
    (h >> 40) as f32 / (1u64 << 24) as f32
}

fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Trilinearly interpolated lattice noise in `[0, 1]`.
fn value_noise(q: Vec3) -> f32 {
    let (fx, fy, fz) = (q.x.floor(), q.y.floor(), q.z.floor());
    let (ix, iy, iz) = (fx as i64, fy as i64, fz as i64);
    let (tx, ty, tz) = (smooth(q.x - fx), smooth(q.y - fy), smooth(q.z - fz));
    let lerp = |a: f32, b: f32, t: f32| a + (b - a) * t;
    let mut c = [0.0f32; 4];
    for (k, slot) in c.iter_mut().enumerate() {
        let dy = (k & 1) as i64;
        let dz = (k >> 1) as i64;
        *slot = lerp(lattice(ix, iy + dy, iz + dz), lattice(ix + 1, iy + dy, iz + dz), tx);
    }
    let y0 = lerp(c[0], c[1], ty);
    let y1 = lerp(c[2], c[3], ty);
    lerp(y0, y1, tz).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checker_alternates() {
        let t = Texture { pattern: TexturePattern::Checker, scale: 1.0, color_a: Vec3::ZERO, color_b: Vec3::ONE };
        assert_eq!(t.eval(Vec3::new(0.5, 0.5, 0.5)), Vec3::ZERO);
        assert_eq!(t.eval(Vec3::new(1.5, 0.5, 0.5)), Vec3::ONE);
        assert_eq!(t.eval(Vec3::new(-0.5, 0.5, 0.5)), Vec3::ONE);
    }

    #[test]
    fn noise_stays_between_colors() {
        let a = Vec3::splat(0.1);
        let b = Vec3::splat(0.9);
        let t = Texture { pattern: TexturePattern::ValueNoise, scale: 3.7, color_a: a, color_b: b };
        for i in 0..500 {
            let p = Vec3::new(i as f32 * 0.137, (i as f32 * 0.71).sin(), -(i as f32) * 0.05);
            let c = t.eval(p);
            assert!(c.x >= 0.1 - 1e-6 && c.x <= 0.9 + 1e-6);
        }
    }
}
