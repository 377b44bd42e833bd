//! Axis-aligned box geometry: the entire world model is built from AABBs,
//! rays, and floor rectangles.

use serde::{Deserialize, Serialize};

/// Boxes closer than this gap (meters) count as contacting.
pub const CONTACT_EPS: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[allow(clippy::should_implement_trait)]
impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        self.sub(o).norm()
    }

    /// Horizontal (x-y) distance, ignoring z.
    pub fn dist_xy(self, o: Vec3) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Axis-aligned box given by center and half extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub center: Vec3,
    pub half: Vec3,
}

impl Aabb {
    pub fn new(center: Vec3, half: Vec3) -> Self {
        Aabb { center, half }
    }

    pub fn min(&self) -> Vec3 {
        self.center.sub(self.half)
    }

    pub fn max(&self) -> Vec3 {
        self.center.add(self.half)
    }

    pub fn top_z(&self) -> f64 {
        self.center.z + self.half.z
    }

    pub fn bottom_z(&self) -> f64 {
        self.center.z - self.half.z
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        let lo = self.min();
        let hi = self.max();
        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        let lo = self.min();
        let hi = self.max();
        let olo = other.min();
        let ohi = other.max();
        olo.x >= lo.x
            && ohi.x <= hi.x
            && olo.y >= lo.y
            && ohi.y <= hi.y
            && olo.z >= lo.z
            && ohi.z <= hi.z
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        let d = self.center.sub(other.center);
        d.x.abs() < self.half.x + other.half.x
            && d.y.abs() < self.half.y + other.half.y
            && d.z.abs() < self.half.z + other.half.z
    }

    /// Per-axis separation gap; zero on axes where the intervals overlap.
    fn gaps(&self, other: &Aabb) -> Vec3 {
        let d = self.center.sub(other.center);
        Vec3::new(
            (d.x.abs() - (self.half.x + other.half.x)).max(0.0),
            (d.y.abs() - (self.half.y + other.half.y)).max(0.0),
            (d.z.abs() - (self.half.z + other.half.z)).max(0.0),
        )
    }

    /// Distance between the closest points of two boxes (0 when overlapping).
    pub fn distance(&self, other: &Aabb) -> f64 {
        self.gaps(other).norm()
    }

    pub fn contacts(&self, other: &Aabb) -> bool {
        self.distance(other) <= CONTACT_EPS
    }

    /// Distance from a point to the box surface (0 inside).
    pub fn distance_to_point(&self, p: Vec3) -> f64 {
        let lo = self.min();
        let hi = self.max();
        let gx = (lo.x - p.x).max(p.x - hi.x).max(0.0);
        let gy = (lo.y - p.y).max(p.y - hi.y).max(0.0);
        let gz = (lo.z - p.z).max(p.z - hi.z).max(0.0);
        Vec3::new(gx, gy, gz).norm()
    }

    /// Full diagonal length of the box.
    pub fn diagonal(&self) -> f64 {
        self.half.scale(2.0).norm()
    }

    /// Slab-method ray intersection. Returns the entry distance along the
    /// (normalized) direction, or None. A ray starting inside returns 0.
    pub fn ray_hit(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let lo = self.min();
        let hi = self.max();
        let mut tmin = 0.0f64;
        let mut tmax = f64::INFINITY;
        for (o, d, l, h) in [
            (origin.x, dir.x, lo.x, hi.x),
            (origin.y, dir.y, lo.y, hi.y),
            (origin.z, dir.z, lo.z, hi.z),
        ] {
            if d.abs() < 1e-12 {
                if o < l || o > h {
                    return None;
                }
            } else {
                let t1 = (l - o) / d;
                let t2 = (h - o) / d;
                tmin = tmin.max(t1.min(t2));
                tmax = tmax.min(t1.max(t2));
            }
        }
        if tmin <= tmax {
            Some(tmin)
        } else {
            None
        }
    }
}

/// Axis-aligned rectangle in the x-y plane (room floors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        self.min_x < o.max_x && o.min_x < self.max_x && self.min_y < o.max_y && o.min_y < self.max_y
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_hits_box_ahead() {
        let b = Aabb::new(Vec3::new(5.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        let t = b.ray_hit(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert!(b.ray_hit(Vec3::ZERO, Vec3::new(-1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn ray_from_inside_hits_at_zero() {
        let b = Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(b.ray_hit(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)), Some(0.0));
    }

    #[test]
    fn diagonal_ray() {
        let b = Aabb::new(Vec3::new(2.0, 2.0, 0.0), Vec3::new(0.5, 0.5, 0.5));
        let inv = 1.0 / 2f64.sqrt();
        assert!(b.ray_hit(Vec3::ZERO, Vec3::new(inv, inv, 0.0)).is_some());
        assert!(b.ray_hit(Vec3::ZERO, Vec3::new(inv, -inv, 0.0)).is_none());
    }

    #[test]
    fn box_distance_and_contact() {
        let a = Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0));
        let b = Aabb::new(Vec3::new(2.004, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        assert!((a.distance(&b) - 0.004).abs() < 1e-12);
        assert!(a.contacts(&b));
        let c = Aabb::new(Vec3::new(2.1, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0));
        assert!(!a.contacts(&c));
    }

    #[test]
    fn rect_overlap_is_open() {
        let a = Rect { min_x: 0.0, min_y: 0.0, max_x: 1.0, max_y: 1.0 };
        let b = Rect { min_x: 1.0, min_y: 0.0, max_x: 2.0, max_y: 1.0 };
        assert!(!a.overlaps(&b));
    }
}
