//! Planar geometry: poses, polylines, polygons and oriented rectangles.

use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = libm::fmod(a + PI, 2.0 * PI);
    if r < 0.0 {
        r += 2.0 * PI;
    }
    let w = r - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }
    pub fn dist(self, o: Vec2) -> f64 {
        self.sub(o).norm()
    }
    /// Unit vector at heading `psi`.
    pub fn from_heading(psi: f64) -> Vec2 {
        Vec2::new(libm::cos(psi), libm::sin(psi))
    }
    /// Expresses `self` in a frame rotated by `psi`.
    pub fn rotate_into(self, psi: f64) -> Vec2 {
        let (s, c) = (libm::sin(psi), libm::cos(psi));
        Vec2::new(c * self.x + s * self.y, -s * self.x + c * self.y)
    }
}

/// A position with heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi: wrap_angle(psi) }
    }
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Ordered list of points with arc-length parametrisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct Polyline {
    pub points: Vec<Vec2>,
    cum: Vec<f64>,
}

impl From<Vec<Vec2>> for Polyline {
    fn from(points: Vec<Vec2>) -> Self {
        Polyline::new(points)
    }
}

impl From<Polyline> for Vec<Vec2> {
    fn from(p: Polyline) -> Self {
        p.points
    }
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Self {
        let mut p = Polyline { points, cum: Vec::new() };
        p.rebuild();
        p
    }

    fn rebuild(&mut self) {
        self.cum.clear();
        let mut acc = 0.0;
        self.cum.push(0.0);
        for w in self.points.windows(2) {
            acc += w[0].dist(w[1]);
            self.cum.push(acc);
        }
    }

    fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn length(&self) -> f64 {
        self.cum().last().copied().unwrap_or(0.0)
    }

    fn segment_at(&self, s: f64) -> usize {
        let cum = self.cum();
        let n = self.points.len();
        if n < 2 {
            return 0;
        }
        match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap_or(core::cmp::Ordering::Less)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Pose at arc length `s`, extrapolating linearly past either end.
    pub fn pose_at(&self, s: f64) -> Pose {
        let n = self.points.len();
        if n == 0 {
            return Pose::default();
        }
        if n == 1 {
            return Pose::new(self.points[0].x, self.points[0].y, 0.0);
        }
        let i = self.segment_at(s);
        let a = self.points[i];
        let b = self.points[i + 1];
        let seg = b.sub(a);
        let len = seg.norm().max(1e-12);
        let t = (s - self.cum()[i]) / len;
        let p = a.add(seg.scale(t));
        Pose::new(p.x, p.y, libm::atan2(seg.y, seg.x))
    }

    /// Projects `p` onto the polyline: returns (arc length, signed lateral offset; left positive).
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let n = self.points.len();
        if n < 2 {
            return (0.0, self.points.first().map(|q| p.dist(*q)).unwrap_or(0.0));
        }
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..n - 1 {
            let a = self.points[i];
            let b = self.points[i + 1];
            let seg = b.sub(a);
            let len2 = seg.dot(seg).max(1e-12);
            let mut t = p.sub(a).dot(seg) / len2;
            // allow extrapolation only off the two ends
            if i > 0 {
                t = t.max(0.0);
            }
            if i + 2 < n {
                t = t.min(1.0);
            }
            let q = a.add(seg.scale(t));
            let d = p.dist(q);
            if d < best.0 {
                let lat = seg.cross(p.sub(a)) / libm::sqrt(len2);
                best = (d, self.cum()[i] + t * libm::sqrt(len2), lat);
            }
        }
        (best.1, best.2)
    }

    /// Distance from `p` to the nearest point of the polyline.
    pub fn distance(&self, p: Vec2) -> f64 {
        let n = self.points.len();
        if n == 0 {
            return f64::INFINITY;
        }
        if n == 1 {
            return p.dist(self.points[0]);
        }
        let mut best = f64::INFINITY;
        for w in self.points.windows(2) {
            let seg = w[1].sub(w[0]);
            let len2 = seg.dot(seg).max(1e-12);
            let t = (p.sub(w[0]).dot(seg) / len2).clamp(0.0, 1.0);
            best = best.min(p.dist(w[0].add(seg.scale(t))));
        }
        best
    }
}

/// Simple polygon given by its vertices in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon { vertices: alloc::vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)] }
    }

    /// Even-odd point containment.
    pub fn contains(&self, p: Vec2) -> bool {
        let v = &self.vertices;
        let n = v.len();
        let mut inside = false;
        let mut j = n.wrapping_sub(1);
        for i in 0..n {
            let (a, b) = (v[i], v[j]);
            if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

/// Rectangle aligned with a body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl OrientedRect {
    pub fn corners(&self) -> [Vec2; 4] {
        let f = Vec2::from_heading(self.heading);
        let l = Vec2::new(-f.y, f.x);
        let a = f.scale(self.half_length);
        let b = l.scale(self.half_width);
        let c = self.center;
        [c.add(a).add(b), c.add(a).sub(b), c.sub(a).sub(b), c.sub(a).add(b)]
    }

    /// Separating-axis overlap test. Touching edges count as overlap.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        let ca = self.corners();
        let cb = other.corners();
        let axes = [
            Vec2::from_heading(self.heading),
            Vec2::from_heading(self.heading + PI / 2.0),
            Vec2::from_heading(other.heading),
            Vec2::from_heading(other.heading + PI / 2.0),
        ];
        for ax in axes {
            let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
            for c in ca {
                let d = c.dot(ax);
                amin = amin.min(d);
                amax = amax.max(d);
            }
            let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for c in cb {
                let d = c.dot(ax);
                bmin = bmin.min(d);
                bmax = bmax.max(d);
            }
            if amax < bmin || bmax < amin {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-9);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-0.5 - 4.0 * PI) + 0.5).abs() < 1e-9);
        for k in -50..50 {
            let w = wrap_angle(k as f64 * 0.37);
            assert!(w > -PI && w <= PI);
        }
    }

    #[test]
    fn polyline_pose_and_projection() {
        let p = Polyline::new(alloc::vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)]);
        assert!((p.length() - 20.0).abs() < 1e-12);
        let q = p.pose_at(15.0);
        assert!((q.x - 10.0).abs() < 1e-12 && (q.y - 5.0).abs() < 1e-12);
        assert!((q.psi - PI / 2.0).abs() < 1e-12);
        let (s, lat) = p.project(Vec2::new(5.0, 1.0));
        assert!((s - 5.0).abs() < 1e-12 && (lat - 1.0).abs() < 1e-12);
        let (s, _) = p.project(Vec2::new(-3.0, 0.0));
        assert!((s + 3.0).abs() < 1e-12);
    }

    #[test]
    fn polygon_contains() {
        let r = Polygon::rect(0.0, 0.0, 2.0, 1.0);
        assert!(r.contains(Vec2::new(1.0, 0.5)));
        assert!(!r.contains(Vec2::new(3.0, 0.5)));
    }

    #[test]
    fn rect_overlap() {
        let a = OrientedRect { center: Vec2::new(0.0, 0.0), heading: 0.0, half_length: 2.0, half_width: 1.0 };
        let mut b = a;
        b.center = Vec2::new(3.9, 0.0);
        assert!(a.overlaps(&b));
        b.center = Vec2::new(4.1, 0.0);
        assert!(!a.overlaps(&b));
        // rotated box near a corner but separated along the rotated axis
        let c = OrientedRect { center: Vec2::new(3.3, 2.3), heading: PI / 4.0, half_length: 1.0, half_width: 0.2 };
        assert!(!a.overlaps(&c));
    }
}
