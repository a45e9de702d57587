//! Support polygon geometry: sole rectangles, their convex hull, and ZMP
//! saturation onto the hull.

use nalgebra::Vector2;

use crate::gait::Pose2;
use crate::model::SoleGeometry;

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Vector2<f64>>,
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

impl ConvexPolygon {
    /// Convex hull of a point set (monotone chain).
    pub fn hull(points: &[Vector2<f64>]) -> Self {
        let mut pts: Vec<Vector2<f64>> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Self { vertices: pts };
        }
        let mut lower: Vec<Vector2<f64>> = Vec::new();
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Vector2<f64>> = Vec::new();
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self { vertices: lower }
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    /// Inside or on the boundary, up to `tol` metres.
    pub fn contains(&self, p: &Vector2<f64>, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            let edge = b - a;
            cross(a, b, p) / edge.norm() >= -tol
        })
    }

    /// Nearest point of the polygon to `p` (`p` itself when inside).
    pub fn saturate(&self, p: &Vector2<f64>) -> Vector2<f64> {
        if self.contains(p, 0.0) {
            return *p;
        }
        let n = self.vertices.len();
        let mut best = self.vertices.first().copied().unwrap_or(*p);
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let ab = b - a;
            let len2 = ab.norm_squared();
            let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = a + ab * t;
            let d = (p - q).norm_squared();
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }
}

/// Corners of a sole rectangle centred on a foot pose.
pub fn sole_corners(foot: &Pose2, sole: &SoleGeometry) -> [Vector2<f64>; 4] {
    let (s, c) = foot.yaw.sin_cos();
    let hl = sole.length / 2.0;
    let hw = sole.width / 2.0;
    let centre = Vector2::new(foot.x, foot.y);
    let corner = |dx: f64, dy: f64| centre + Vector2::new(c * dx - s * dy, s * dx + c * dy);
    [corner(hl, hw), corner(-hl, hw), corner(-hl, -hw), corner(hl, -hw)]
}

pub fn single_support(foot: &Pose2, sole: &SoleGeometry) -> ConvexPolygon {
    ConvexPolygon::hull(&sole_corners(foot, sole))
}

pub fn double_support(a: &Pose2, b: &Pose2, sole: &SoleGeometry) -> ConvexPolygon {
    let mut pts = sole_corners(a, sole).to_vec();
    pts.extend(sole_corners(b, sole));
    ConvexPolygon::hull(&pts)
}
