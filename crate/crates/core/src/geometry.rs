//! Planar polygons and segment helpers in a local metric frame.

use serde::{Deserialize, Serialize};

use crate::geodesy::{EnuPoint, GeoError};

/// Tolerance for "on the boundary" decisions, meters.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Closest point on segment `[a, b]` to `p` and its parameter in [0, 1].
///
/// The endpoints are returned exactly when the projection clamps.
pub fn project_onto_segment(p: EnuPoint, a: EnuPoint, b: EnuPoint) -> (EnuPoint, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return (a, 0.0);
    }
    let t = (p - a).dot(ab) / len2;
    if t <= 0.0 {
        (a, 0.0)
    } else if t >= 1.0 {
        (b, 1.0)
    } else {
        (a + ab * t, t)
    }
}

pub fn distance_to_segment(p: EnuPoint, a: EnuPoint, b: EnuPoint) -> f64 {
    project_onto_segment(p, a, b).0.distance(p)
}

fn orientation(a: EnuPoint, b: EnuPoint, c: EnuPoint) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: EnuPoint, a: EnuPoint, b: EnuPoint) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test, touching counts.
pub fn segments_intersect(p1: EnuPoint, p2: EnuPoint, q1: EnuPoint, q2: EnuPoint) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p1, q1, q2))
        || (d2 == 0.0 && on_segment(p2, q1, q2))
        || (d3 == 0.0 && on_segment(q1, p1, p2))
        || (d4 == 0.0 && on_segment(q2, p1, p2))
}

/// Simple polygon with counter-clockwise vertices and no closing duplicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EnuPoint>", into = "Vec<EnuPoint>")]
pub struct Polygon {
    vertices: Vec<EnuPoint>,
}

impl TryFrom<Vec<EnuPoint>> for Polygon {
    type Error = GeoError;
    fn try_from(v: Vec<EnuPoint>) -> Result<Self, GeoError> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<EnuPoint> {
    fn from(p: Polygon) -> Vec<EnuPoint> {
        p.vertices
    }
}

impl Polygon {
    /// Normalizes orientation, drops repeated and closing vertices and rejects
    /// degenerate or self-intersecting rings.
    pub fn new(vertices: Vec<EnuPoint>) -> Result<Self, GeoError> {
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        let mut ring: Vec<EnuPoint> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if ring.last() != Some(&v) {
                ring.push(v);
            }
        }
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(GeoError::TooFewVertices);
        }
        let area = signed_area(&ring);
        let (min, max) = bbox(&ring);
        let scale = (max - min).dot(max - min);
        if area.abs() <= 1e-12 * scale {
            return Err(GeoError::DegeneratePolygon);
        }
        if area < 0.0 {
            ring.reverse();
        }
        let n = ring.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                    return Err(GeoError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(Polygon { vertices: ring })
    }

    /// Axis-aligned rectangle with corners `min` and `max`.
    pub fn rectangle(min: EnuPoint, max: EnuPoint) -> Result<Self, GeoError> {
        Polygon::new(vec![
            min,
            EnuPoint::new(max.x, min.y),
            max,
            EnuPoint::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[EnuPoint] {
        &self.vertices
    }

    /// Edges in ring order; edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edges(&self) -> impl Iterator<Item = (EnuPoint, EnuPoint)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn bbox(&self) -> (EnuPoint, EnuPoint) {
        bbox(&self.vertices)
    }

    /// Area centroid.
    pub fn centroid(&self) -> EnuPoint {
        let a = self.area();
        let (mut cx, mut cy) = (0.0, 0.0);
        // Shift to the first vertex for conditioning.
        let o = self.vertices[0];
        for (p, q) in self.edges() {
            let (p, q) = (p - o, q - o);
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        EnuPoint::new(o.x + cx / (6.0 * a), o.y + cy / (6.0 * a))
    }

    /// Nearest point on the boundary; ties resolve to the lowest edge index.
    pub fn nearest_boundary_point(&self, p: EnuPoint) -> EnuPoint {
        let mut best = self.vertices[0];
        let mut best_d = f64::INFINITY;
        for (a, b) in self.edges() {
            let (q, _) = project_onto_segment(p, a, b);
            let d = q.distance(p);
            if d < best_d {
                best_d = d;
                best = q;
            }
        }
        best
    }

    pub fn distance_to_boundary(&self, p: EnuPoint) -> f64 {
        self.edges()
            .map(|(a, b)| distance_to_segment(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Ray-casting parity test; points on the boundary count as inside.
    pub fn contains(&self, p: EnuPoint) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if distance_to_segment(p, a, b) <= BOUNDARY_EPS {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn map_points(&self, f: impl Fn(EnuPoint) -> EnuPoint) -> Result<Polygon, GeoError> {
        Polygon::new(self.vertices.iter().map(|v| f(*v)).collect())
    }
}

fn signed_area(ring: &[EnuPoint]) -> f64 {
    let n = ring.len();
    let o = ring[0];
    let mut s = 0.0;
    for i in 0..n {
        s += (ring[i] - o).cross(ring[(i + 1) % n] - o);
    }
    s / 2.0
}

fn bbox(ring: &[EnuPoint]) -> (EnuPoint, EnuPoint) {
    let mut min = EnuPoint::new(f64::INFINITY, f64::INFINITY);
    let mut max = EnuPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in ring {
        min = EnuPoint::new(min.x.min(v.x), min.y.min(v.y));
        max = EnuPoint::new(max.x.max(v.x), max.y.max(v.y));
    }
    (min, max)
}

/// Nearest point on `polygon`'s boundary to `p`.
pub fn nearest_point_on_polygon(polygon: &Polygon, p: EnuPoint) -> EnuPoint {
    polygon.nearest_boundary_point(p)
}

/// `p` inside or on the boundary of `polygon`.
pub fn point_in_polygon(p: EnuPoint, polygon: &Polygon) -> bool {
    polygon.contains(p)
}

/// Polygon dilated by a fixed radius: the set of points inside the polygon or
/// within `radius_m` of its boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferedPolygon {
    pub polygon: Polygon,
    pub radius_m: f64,
}

impl BufferedPolygon {
    pub fn new(polygon: Polygon, radius_m: f64) -> Self {
        BufferedPolygon {
            polygon,
            radius_m: radius_m.max(0.0),
        }
    }

    pub fn contains(&self, p: EnuPoint) -> bool {
        self.polygon.contains(p) || self.polygon.distance_to_boundary(p) <= self.radius_m
    }
}
