//! Orthographic cameras and the ring-plus-elevated camera rig.

use serde::{Deserialize, Serialize};

use super::mesh::Vec3;

/// Orthographic camera. `half_extent` is half the side length of the square
/// image plane, in object units.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub center: Vec3,
    pub view_dir: Vec3,
    pub up: Vec3,
    pub half_extent: f64,
    pub resolution: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Camera {
    /// Orthographic camera at `center` looking at `target`. `up` is
    /// orthonormalized against the viewing direction.
    pub fn look_at(center: Vec3, target: Vec3, up: Vec3, half_extent: f64, resolution: usize) -> Self {
        assert!(resolution > 0, "camera resolution must be positive");
        let view_dir = (target - center).normalize();
        let mut up = up - view_dir * up.dot(&view_dir);
        if up.norm() < 1e-9 {
            // looking straight along the supplied up vector
            let alt = if view_dir.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
            up = alt - view_dir * alt.dot(&view_dir);
        }
        let up = up.normalize();
        let (azimuth_deg, elevation_deg) = spherical_angles(-view_dir);
        Self {
            center,
            view_dir,
            up,
            half_extent,
            resolution,
            azimuth_deg,
            elevation_deg,
        }
    }

    pub fn right(&self) -> Vec3 {
        self.view_dir.cross(&self.up)
    }

    /// Projects a world point to continuous pixel coordinates (x right,
    /// y down, pixel centers at half-integers) and depth along the view.
    pub fn project(&self, p: &Vec3) -> [f64; 3] {
        let rel = p - self.center;
        let res = self.resolution as f64;
        let sx = rel.dot(&self.right()) / self.half_extent;
        let sy = rel.dot(&self.up) / self.half_extent;
        [(sx + 1.0) * 0.5 * res, (1.0 - sy) * 0.5 * res, rel.dot(&self.view_dir)]
    }

    /// World-space point on the image plane at the center of pixel (px, py).
    pub fn pixel_origin(&self, px: usize, py: usize) -> Vec3 {
        let res = self.resolution as f64;
        let sx = (px as f64 + 0.5) / res * 2.0 - 1.0;
        let sy = 1.0 - (py as f64 + 0.5) / res * 2.0;
        self.center + (self.right() * sx + self.up * sy) * self.half_extent
    }
}

/// Azimuth (degrees in [0, 360), 0 = +z, 90 = +x) and elevation of a
/// direction from the origin.
fn spherical_angles(dir: Vec3) -> (f64, f64) {
    let horizontal = (dir.x * dir.x + dir.z * dir.z).sqrt();
    let elevation = dir.y.atan2(horizontal).to_degrees();
    let mut azimuth = dir.x.atan2(dir.z).to_degrees();
    if azimuth < 0.0 {
        azimuth += 360.0;
    }
    if azimuth >= 360.0 - 1e-9 {
        azimuth = 0.0;
    }
    (azimuth, elevation)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigConfig {
    pub equatorial_count: usize,
    pub elevated_count: usize,
    pub elevation_deg: f64,
    /// Distance of each camera from the origin.
    pub radius: f64,
    pub half_extent: f64,
    pub resolution: usize,
}

impl RigConfig {
    /// Default ring of 8 + 2 cameras framing a mesh of the given bounding
    /// radius, with the image plane at 1.1x that radius.
    pub fn for_bounding_radius(bounding_radius: f64, resolution: usize) -> Self {
        Self {
            equatorial_count: 8,
            elevated_count: 2,
            elevation_deg: 45.0,
            radius: 2.0 * bounding_radius.max(1e-6),
            half_extent: 1.1 * bounding_radius.max(1e-6),
            resolution,
        }
    }
}

/// Equatorial cameras by increasing azimuth from the front (+z), then the
/// elevated cameras, also by azimuth. Every camera looks at the origin.
pub fn build_camera_rig(cfg: &RigConfig) -> Vec<Camera> {
    let mut rig = Vec::with_capacity(cfg.equatorial_count + cfg.elevated_count);
    let ring = |count: usize, elevation: f64, rig: &mut Vec<Camera>| {
        for k in 0..count {
            let azimuth = (k as f64 * 360.0 / count as f64).to_radians();
            let elevation = elevation.to_radians();
            let dir = Vec3::new(
                azimuth.sin() * elevation.cos(),
                elevation.sin(),
                azimuth.cos() * elevation.cos(),
            );
            let mut cam = Camera::look_at(
                dir * cfg.radius,
                Vec3::zeros(),
                Vec3::y(),
                cfg.half_extent,
                cfg.resolution,
            );
            // keep the exact grid angles rather than the round-tripped ones
            cam.azimuth_deg = k as f64 * 360.0 / count as f64;
            rig.push(cam);
        }
    };
    ring(cfg.equatorial_count, 0.0, &mut rig);
    ring(cfg.elevated_count, cfg.elevation_deg, &mut rig);
    rig
}

/// First index and size of the ring (equatorial or elevated) holding view
/// `i`, following the [`build_camera_rig`] layout.
fn ring_of(i: usize, rig: &[Camera]) -> (usize, usize) {
    assert!(i < rig.len(), "view index {i} out of range");
    let equatorial = rig
        .iter()
        .take_while(|c| c.elevation_deg.abs() < 1e-6)
        .count();
    if i < equatorial {
        (0, equatorial)
    } else {
        (equatorial, rig.len() - equatorial)
    }
}

/// Index of the camera mirrored across the front-view (x = 0) plane.
///
/// Each ring is evenly spaced from azimuth 0, so azimuth `a` maps to
/// `360 - a` within the same ring.
pub fn mirror_view_index(i: usize, rig: &[Camera]) -> usize {
    let (start, count) = ring_of(i, rig);
    start + (count - (i - start)) % count
}

/// Previous view in rig order, wrapping around within the view's ring.
pub fn previous_view_index(i: usize, rig: &[Camera]) -> usize {
    let (start, count) = ring_of(i, rig);
    start + (i - start + count - 1) % count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rig(eq: usize, el: usize) -> Vec<Camera> {
        let mut cfg = RigConfig::for_bounding_radius(1.0, 32);
        cfg.radius = 2.0;
        cfg.equatorial_count = eq;
        cfg.elevated_count = el;
        build_camera_rig(&cfg)
    }

    fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
        a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn default_rig_layout() {
        let rig = rig(8, 2);
        assert_eq!(rig.len(), 10);
        for k in 0..8 {
            let next = &rig[(k + 1) % 8];
            assert!((angle_between(&rig[k].view_dir, &next.view_dir) - 45.0).abs() < 1e-9);
            assert_eq!(rig[k].azimuth_deg, 45.0 * k as f64);
            assert!(rig[k].elevation_deg.abs() < 1e-9);
        }
        assert_eq!(rig[8].azimuth_deg, 0.0);
        assert_eq!(rig[9].azimuth_deg, 180.0);
        assert!((rig[8].elevation_deg - 45.0).abs() < 1e-9);
        // elevated cameras look down
        assert!(rig[8].view_dir.y < 0.0 && rig[9].view_dir.y < 0.0);
    }

    #[test]
    fn four_camera_ring_is_ninety_degrees_apart() {
        let rig = rig(4, 0);
        for k in 0..4 {
            let d = angle_between(&rig[k].view_dir, &rig[(k + 1) % 4].view_dir);
            assert!((d - 90.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cameras_look_at_origin_with_orthonormal_basis() {
        for cam in rig(8, 2) {
            let to_origin = (-cam.center).normalize();
            assert!((to_origin - cam.view_dir).norm() < 1e-6);
            assert!(cam.view_dir.dot(&cam.up).abs() < 1e-6);
            assert!((cam.up.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_examples() {
        let rig = rig(8, 2);
        assert_eq!(mirror_view_index(1, &rig), 7); // 45 -> 315
        assert_eq!(mirror_view_index(0, &rig), 0);
        assert_eq!(mirror_view_index(4, &rig), 4);
        assert_eq!(mirror_view_index(8, &rig), 8);
        assert_eq!(mirror_view_index(9, &rig), 9);
        assert_eq!(previous_view_index(0, &rig), 7);
        assert_eq!(previous_view_index(3, &rig), 2);
        assert_eq!(previous_view_index(8, &rig), 9);
        assert_eq!(previous_view_index(9, &rig), 8);
        for i in 0..rig.len() {
            let m = mirror_view_index(i, &rig);
            assert_eq!(mirror_view_index(m, &rig), i);
            let expected = (360.0 - rig[i].azimuth_deg) % 360.0;
            assert!((rig[m].azimuth_deg - expected).abs() < 1e-9);
            assert_eq!(rig[m].elevation_deg, rig[i].elevation_deg);
        }
    }

    #[test]
    fn projection_round_trip() {
        let cam = &rig(8, 2)[3];
        let p = cam.pixel_origin(5, 17);
        let [x, y, depth] = cam.project(&p);
        assert!((x - 5.5).abs() < 1e-9 && (y - 17.5).abs() < 1e-9);
        assert!(depth.abs() < 1e-12);
    }
}
