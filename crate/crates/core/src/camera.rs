//! Pinhole camera model.
//!
//! Pixel coordinates are continuous: pixel `(i, j)` covers `[i, i+1) × [j, j+1)`,
//! `u` grows to the right and `v` grows downward. The optical axis passes through
//! `(width/2, height/2)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;
use crate::tracer::Ray;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("vertical field of view {0} rad is outside (0, π)")]
    FieldOfView(f32),
    #[error("image size {0}x{1} must be at least 1x1")]
    Size(usize, usize),
    #[error("camera position coincides with look_at")]
    Degenerate,
    #[error("up vector is parallel to the viewing direction")]
    UpParallel,
    #[error("non-finite camera parameter")]
    NonFinite,
}

/// On-disk camera record (`meta.json`, `--camera` files).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_deg: f32,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRecord", into = "CameraRecord")]
pub struct PinholeCamera {
    position: Vec3,
    look_at: Vec3,
    up: Vec3,
    // Degrees are canonical so records roundtrip bit-exactly.
    fov_deg: f32,
    width: usize,
    height: usize,
    // Derived orthonormal basis.
    right: Vec3,
    true_up: Vec3,
    forward: Vec3,
    focal_px: f32,
}

impl PinholeCamera {
    /// `vertical_fov` in radians.
    pub fn new(
        position: Vec3,
        look_at: Vec3,
        up: Vec3,
        vertical_fov: f32,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        if !(vertical_fov > 0.0 && vertical_fov < std::f32::consts::PI) {
            return Err(CameraError::FieldOfView(vertical_fov));
        }
        Self::from_degrees(position, look_at, up, vertical_fov.to_degrees(), width, height)
    }

    pub fn from_degrees(
        position: Vec3,
        look_at: Vec3,
        up: Vec3,
        fov_deg: f32,
        width: usize,
        height: usize,
    ) -> Result<Self, CameraError> {
        if !(position.is_finite() && look_at.is_finite() && up.is_finite() && fov_deg.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        let vertical_fov = fov_deg.to_radians();
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(CameraError::FieldOfView(vertical_fov));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::Size(width, height));
        }
        let dir = look_at - position;
        if dir.length_squared() == 0.0 {
            return Err(CameraError::Degenerate);
        }
        let forward = dir.normalize();
        let side = forward.cross(up);
        if !(side.length() > 1e-6 * up.length()) {
            return Err(CameraError::UpParallel);
        }
        let right = side.normalize();
        let true_up = right.cross(forward);
        let focal_px = 0.5 * height as f32 / (0.5 * vertical_fov).tan();
        Ok(Self {
            position,
            look_at,
            up,
            fov_deg,
            width,
            height,
            right,
            true_up,
            forward,
            focal_px,
        })
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }
    pub fn look_at(&self) -> Vec3 {
        self.look_at
    }
    pub fn up(&self) -> Vec3 {
        self.up
    }
    /// Radians.
    pub fn vertical_fov(&self) -> f32 {
        self.fov_deg.to_radians()
    }
    pub fn fov_deg(&self) -> f32 {
        self.fov_deg
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn right_axis(&self) -> Vec3 {
        self.right
    }
    pub fn up_axis(&self) -> Vec3 {
        self.true_up
    }
    pub fn forward_axis(&self) -> Vec3 {
        self.forward
    }
    /// Focal length in pixels.
    pub fn focal_px(&self) -> f32 {
        self.focal_px
    }

    /// Same orientation and intrinsics, moved by `delta` (world space).
    pub fn translated(&self, delta: Vec3) -> Self {
        Self::from_degrees(self.position + delta, self.look_at + delta, self.up, self.fov_deg, self.width, self.height)
            .expect("translation preserves camera validity")
    }

    /// Converts an offset in camera axes (right, up, backward) to world space.
    pub fn camera_to_world_offset(&self, offset: Vec3) -> Vec3 {
        self.right * offset.x + self.true_up * offset.y - self.forward * offset.z
    }

    /// Inverse of [`Self::camera_to_world_offset`].
    pub fn world_to_camera_offset(&self, delta: Vec3) -> Vec3 {
        Vec3::new(delta.dot(self.right), delta.dot(self.true_up), -delta.dot(self.forward))
    }

    /// Unnormalized direction through continuous pixel `(u, v)` with unit forward component.
    #[inline]
    fn pixel_direction(&self, u: f32, v: f32) -> Vec3 {
        let x = (u - 0.5 * self.width as f32) / self.focal_px;
        let y = (v - 0.5 * self.height as f32) / self.focal_px;
        self.forward + self.right * x - self.true_up * y
    }

    /// Primary ray through continuous pixel coordinates `(u, v)`.
    #[inline]
    pub fn generate_ray(&self, u: f32, v: f32) -> Ray {
        Ray::new(self.position, self.pixel_direction(u, v).normalize())
    }

    /// Point at planar depth `depth` along the ray through `(u, v)`.
    pub fn unproject(&self, u: f32, v: f32, depth: f32) -> Vec3 {
        self.position + self.pixel_direction(u, v) * depth
    }

    /// Depth of `p` along the optical axis.
    #[inline]
    pub fn planar_depth(&self, p: Vec3) -> f32 {
        (p - self.position).dot(self.forward)
    }

    /// Continuous pixel coordinates of `p`, or `None` when `p` is not in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<(f32, f32)> {
        let d = p - self.position;
        let z = d.dot(self.forward);
        if !(z > 0.0) {
            return None;
        }
        Some(self.project_direction_scaled(d, z))
    }

    /// Pixel coordinates of the vanishing point of direction `dir`.
    pub fn project_direction(&self, dir: Vec3) -> Option<(f32, f32)> {
        let z = dir.dot(self.forward);
        if !(z > 0.0) {
            return None;
        }
        Some(self.project_direction_scaled(dir, z))
    }

    #[inline]
    fn project_direction_scaled(&self, d: Vec3, z: f32) -> (f32, f32) {
        let u = 0.5 * self.width as f32 + self.focal_px * d.dot(self.right) / z;
        let v = 0.5 * self.height as f32 - self.focal_px * d.dot(self.true_up) / z;
        (u, v)
    }
}

impl TryFrom<CameraRecord> for PinholeCamera {
    type Error = CameraError;
    fn try_from(r: CameraRecord) -> Result<Self, CameraError> {
        PinholeCamera::from_degrees(r.position, r.look_at, r.up, r.fov_deg, r.width, r.height)
    }
}

impl From<PinholeCamera> for CameraRecord {
    fn from(c: PinholeCamera) -> Self {
        CameraRecord {
            position: c.position,
            look_at: c.look_at,
            up: c.up,
            fov_deg: c.fov_deg,
            width: c.width,
            height: c.height,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> PinholeCamera {
        PinholeCamera::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0), Vec3::Y, 60f32.to_radians(), 64, 48)
            .unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = Vec3::ZERO;
        let t = -Vec3::Z;
        assert_eq!(PinholeCamera::new(p, t, Vec3::Y, 0.0, 4, 4), Err(CameraError::FieldOfView(0.0)));
        assert!(PinholeCamera::new(p, t, Vec3::Y, std::f32::consts::PI, 4, 4).is_err());
        assert_eq!(PinholeCamera::new(p, t, Vec3::Y, 1.0, 0, 4), Err(CameraError::Size(0, 4)));
        assert_eq!(PinholeCamera::new(p, p, Vec3::Y, 1.0, 4, 4), Err(CameraError::Degenerate));
        assert_eq!(PinholeCamera::new(p, t, Vec3::Z, 1.0, 4, 4), Err(CameraError::UpParallel));
    }

    #[test]
    fn center_pixel_is_on_axis() {
        let c = cam();
        let p = c.unproject(32.0, 24.0, 3.0);
        assert!((p - Vec3::new(0.0, 0.0, -2.0)).length() < 1e-6);
        let (u, v) = c.project(c.look_at()).unwrap();
        assert!((u - 32.0).abs() < 1e-4 && (v - 24.0).abs() < 1e-4);
    }

    #[test]
    fn behind_camera_projects_to_none() {
        assert_eq!(cam().project(Vec3::new(0.0, 0.0, 5.0)), None);
    }

    #[test]
    fn lateral_shift_follows_similar_triangles() {
        let c = cam();
        let z = 2.5;
        let delta = 0.3;
        let p = c.unproject(20.0, 10.0, z);
        let (u0, v0) = c.project(p).unwrap();
        let (u1, v1) = c.project(p + c.right_axis() * delta).unwrap();
        assert!((u1 - u0 - delta * c.focal_px() / z).abs() < 1e-3);
        assert!((v1 - v0).abs() < 1e-4);
    }

    #[test]
    fn image_y_points_down() {
        let c = cam();
        let (_, v) = c.project(Vec3::new(0.0, 0.5, -1.0)).unwrap();
        assert!(v < 24.0);
    }

    #[test]
    fn record_roundtrip() {
        let c = cam();
        let json = serde_json::to_string(&c).unwrap();
        let back: PinholeCamera = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn offset_axes_roundtrip() {
        let c = PinholeCamera::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 0.0), Vec3::Y, 1.0, 8, 8).unwrap();
        let off = Vec3::new(0.1, -0.2, 0.05);
        let back = c.world_to_camera_offset(c.camera_to_world_offset(off));
        assert!((back - off).length() < 1e-6);
        // +z in camera axes points backward.
        assert!(c.camera_to_world_offset(Vec3::Z).dot(c.forward_axis()) < -0.999);
    }
}
