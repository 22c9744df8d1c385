//! Planar geometry shared across stages: angle wrapping and rigid 2D poses.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Mean Earth radius used by the local projection (m).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const METERS_PER_NM: f64 = 1852.0;
pub const METERS_PER_FOOT: f64 = 0.3048;
pub const MPS_PER_KNOT: f64 = 1852.0 / 3600.0;

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Signed shortest angular difference `to - from`, in (-π, π].
pub fn angle_diff(from: f64, to: f64) -> f64 {
    wrap_angle(to - from)
}

/// Compass heading (degrees clockwise from north) to a planar yaw
/// (radians counter-clockwise from +x = east).
pub fn heading_deg_to_yaw(heading_deg: f64) -> f64 {
    wrap_angle(PI / 2.0 - heading_deg.to_radians())
}

/// Inverse of [`heading_deg_to_yaw`], in [0, 360).
pub fn yaw_to_heading_deg(yaw: f64) -> f64 {
    (90.0 - yaw.to_degrees()).rem_euclid(360.0)
}

/// A rigid planar pose: position (m) and yaw (rad, CCW from +x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    /// Expresses a world point in this pose's frame.
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = x - self.x;
        let dy = y - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Maps a point in this pose's frame back to the world.
    pub fn to_world(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * x - s * y, self.y + s * x + c * y)
    }

    /// Rotates a direction vector into this pose's frame.
    pub fn rotate_to_local(&self, dx: f64, dy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn yaw_to_local(&self, yaw: f64) -> f64 {
        wrap_angle(yaw - self.theta)
    }

    pub fn yaw_to_world(&self, yaw: f64) -> f64 {
        wrap_angle(yaw + self.theta)
    }

    /// The pose of `other` (a world pose) expressed in this frame.
    pub fn relative(&self, other: &Pose2) -> Pose2 {
        let (x, y) = self.to_local(other.x, other.y);
        Pose2::new(x, y, self.yaw_to_local(other.theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((angle_diff(350f64.to_radians(), 10f64.to_radians()) - 20f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn heading_yaw_roundtrip() {
        assert!((heading_deg_to_yaw(90.0)).abs() < 1e-12); // east
        assert!((heading_deg_to_yaw(0.0) - PI / 2.0).abs() < 1e-12); // north
        for h in [0.0, 45.0, 181.0, 359.5] {
            assert!((yaw_to_heading_deg(heading_deg_to_yaw(h)) - h).abs() < 1e-9);
        }
    }

    #[test]
    fn pose_roundtrip() {
        let p = Pose2::new(12.0, -3.0, 0.7);
        let (lx, ly) = p.to_local(40.0, 5.0);
        let (wx, wy) = p.to_world(lx, ly);
        assert!((wx - 40.0).abs() < 1e-12 && (wy - 5.0).abs() < 1e-12);
        let (ox, oy) = p.to_local(12.0, -3.0);
        assert!(ox.abs() < 1e-15 && oy.abs() < 1e-15);
    }
}
