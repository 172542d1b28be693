use super::{GeometryError, Point3, UnitVec3, Vec3, MIN_SEPARATION, WORLD_UP};
use nalgebra::Unit;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Ordered 3D point sequence describing a DLO centerline.
///
/// Holds at least two finite points with consecutive points separated by
/// more than [`MIN_SEPARATION`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline3D {
    points: Vec<Point3>,
}

impl Polyline3D {
    pub fn new(points: Vec<Point3>) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::InvalidPolyline(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(GeometryError::InvalidPolyline(format!(
                "point {i} is not finite"
            )));
        }
        if let Some(i) = points
            .windows(2)
            .position(|w| (w[1] - w[0]).norm() <= MIN_SEPARATION)
        {
            return Err(GeometryError::InvalidPolyline(format!(
                "points {i} and {} coincide",
                i + 1
            )));
        }
        Ok(Self { points })
    }

    /// Like [`Polyline3D::new`] but first drops points that coincide with
    /// their predecessor.
    pub fn from_points_dedup(
        points: impl IntoIterator<Item = Point3>,
    ) -> Result<Self, GeometryError> {
        let mut out: Vec<Point3> = Vec::new();
        for p in points {
            match out.last() {
                Some(last) if (p - last).norm() <= MIN_SEPARATION => {}
                _ => out.push(p),
            }
        }
        Self::new(out)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Point3 {
        self.points[0]
    }

    pub fn last(&self) -> Point3 {
        self.points[self.points.len() - 1]
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Cumulative arc length at every vertex, starting at 0.
    pub fn cumulative_arc(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.points.len());
        let mut s = 0.0;
        acc.push(0.0);
        for w in self.points.windows(2) {
            s += (w[1] - w[0]).norm();
            acc.push(s);
        }
        acc
    }

    /// Point at arc position `s`, clamped to `[0, L]`.
    pub fn point_at_arc(&self, s: f64) -> Point3 {
        let cum = self.cumulative_arc();
        point_at_arc_with(&self.points, &cum, s)
    }

    /// Point at arc fraction `ratio` in `[0, 1]`.
    pub fn point_at_fraction(&self, ratio: f64) -> Point3 {
        self.point_at_arc(ratio.clamp(0.0, 1.0) * self.arc_length())
    }

    /// Unit tangent of the segment containing arc position `s`.
    pub fn tangent_at_arc(&self, s: f64) -> UnitVec3 {
        let cum = self.cumulative_arc();
        let seg = segment_index(&cum, s);
        Unit::new_normalize(self.points[seg + 1] - self.points[seg])
    }

    /// `m` points at equal arc spacing; both endpoints are kept.
    pub fn resample_equidistant(&self, m: usize) -> Polyline3D {
        let m = m.max(2);
        let cum = self.cumulative_arc();
        let total = *cum.last().unwrap();
        let pts = (0..m)
            .map(|k| point_at_arc_with(&self.points, &cum, total * k as f64 / (m - 1) as f64));
        // Distinct arc positions on a valid polyline map to distinct points
        // except on exact fold-backs, which the dedup absorbs.
        Polyline3D::from_points_dedup(pts).unwrap_or_else(|_| self.clone())
    }

    /// Resample so consecutive points are roughly `pitch` apart along the arc.
    pub fn resample_pitch(&self, pitch: f64) -> Polyline3D {
        let n = ((self.arc_length() / pitch).round() as usize).max(1) + 1;
        self.resample_equidistant(n)
    }

    /// Closest point on the polyline to `p`: (point, arc position, distance).
    pub fn nearest(&self, p: &Point3) -> (Point3, f64, f64) {
        let mut best = (self.points[0], 0.0, f64::INFINITY);
        let mut s0 = 0.0;
        for w in self.points.windows(2) {
            let (q, t) = closest_on_segment(&w[0], &w[1], p);
            let seg_len = (w[1] - w[0]).norm();
            let d = (p - q).norm();
            if d < best.2 {
                best = (q, s0 + t * seg_len, d);
            }
            s0 += seg_len;
        }
        best
    }

    pub fn distance_to(&self, p: &Point3) -> f64 {
        self.nearest(p).2
    }

    /// Apply `f` point-wise. `f` must keep consecutive points distinct.
    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> Polyline3D {
        Polyline3D {
            points: self.points.iter().map(f).collect(),
        }
    }

    pub fn reversed(&self) -> Polyline3D {
        let mut points = self.points.clone();
        points.reverse();
        Polyline3D { points }
    }

    /// Sub-polyline between two arc positions (`from < to`).
    pub fn slice_arc(&self, from: f64, to: f64) -> Result<Polyline3D, GeometryError> {
        let cum = self.cumulative_arc();
        let mut pts = vec![point_at_arc_with(&self.points, &cum, from)];
        for (p, s) in self.points.iter().zip(&cum) {
            if *s > from && *s < to {
                pts.push(*p);
            }
        }
        pts.push(point_at_arc_with(&self.points, &cum, to));
        Polyline3D::from_points_dedup(pts)
    }
}

fn segment_index(cum: &[f64], s: f64) -> usize {
    let n = cum.len();
    match cum.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    }
}

fn point_at_arc_with(points: &[Point3], cum: &[f64], s: f64) -> Point3 {
    let total = *cum.last().unwrap();
    let s = s.clamp(0.0, total);
    let seg = segment_index(cum, s);
    let len = cum[seg + 1] - cum[seg];
    let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
    points[seg] + (points[seg + 1] - points[seg]) * t
}

/// Closest point on segment `ab` to `p`, with its parameter in `[0, 1]`.
pub(crate) fn closest_on_segment(a: &Point3, b: &Point3, p: &Point3) -> (Point3, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (*a, 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * t, t)
}

/// Unit tangent at vertex `i`: central difference for interior vertices,
/// one-sided at the two ends.
pub fn tangent_at(shape: &Polyline3D, i: usize) -> Result<UnitVec3, GeometryError> {
    let pts = shape.points();
    let n = pts.len();
    if i >= n {
        return Err(GeometryError::IndexOutOfRange { index: i, len: n });
    }
    let (a, b) = if i == 0 {
        (pts[0], pts[1])
    } else if i == n - 1 {
        (pts[n - 2], pts[n - 1])
    } else {
        (pts[i - 1], pts[i + 1])
    };
    let chord = b - a;
    if chord.norm() < 1e-9 {
        return Err(GeometryError::DegenerateTangent { index: i });
    }
    Ok(Unit::new_normalize(chord))
}

/// Normal at vertex `i`: world up made orthogonal to the tangent, or world X
/// when the tangent is (anti)parallel to up.
pub fn normal_at(shape: &Polyline3D, i: usize) -> Result<UnitVec3, GeometryError> {
    Ok(normal_from_tangent(&tangent_at(shape, i)?))
}

pub(crate) fn normal_from_tangent(t: &UnitVec3) -> UnitVec3 {
    let reference = if WORLD_UP.dot(t).abs() > 1.0 - 1e-6 {
        Vec3::x()
    } else {
        WORLD_UP
    };
    let n = reference - t.into_inner() * reference.dot(t);
    Unit::new_normalize(n)
}

/// Symmetric Hausdorff distance, measured vertex-to-polyline both ways.
pub fn hausdorff(a: &Polyline3D, b: &Polyline3D) -> f64 {
    let ab = a
        .points()
        .iter()
        .map(|p| b.distance_to(p))
        .fold(0.0, f64::max);
    let ba = b
        .points()
        .iter()
        .map(|p| a.distance_to(p))
        .fold(0.0, f64::max);
    ab.max(ba)
}

impl Serialize for Polyline3D {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let arr: Vec<[f64; 3]> = self.points.iter().map(super::point_array).collect();
        arr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polyline3D {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let arr = Vec::<[f64; 3]>::deserialize(d)?;
        Polyline3D::new(
            arr.into_iter()
                .map(|a| Point3::new(a[0], a[1], a[2]))
                .collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}
