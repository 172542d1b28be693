use super::{GeometryError, Point3, Polyline3D, Vec3};
use nalgebra::{DMatrix, DVector};

/// Points taken from each side of a gap when fitting a bridge.
pub const K_FIT: usize = 10;

/// Least-squares polynomial in a centered, scaled parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients in ascending power of `(t - center) / scale`.
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub scale: f64,
}

impl PolyFit {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = (t - self.center) / self.scale;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

fn distinct_count(ts: &[f64]) -> usize {
    let mut v = ts.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    v.len()
}

/// Fit `y ≈ poly(t)` of at most `degree`. When the samples cannot support
/// the requested degree it drops to (distinct parameter values − 1).
pub fn fit_polynomial(t: &[f64], y: &[f64], degree: usize) -> Result<PolyFit, GeometryError> {
    if t.is_empty() || t.len() != y.len() {
        return Err(GeometryError::DegenerateInput(format!(
            "polynomial fit needs matching nonempty samples ({} vs {})",
            t.len(),
            y.len()
        )));
    }
    let deg = degree.min(distinct_count(t) - 1);
    let center = t.iter().sum::<f64>() / t.len() as f64;
    let spread = t.iter().fold(0.0f64, |m, v| m.max((v - center).abs()));
    let scale = if spread > 1e-12 { spread } else { 1.0 };
    let a = DMatrix::from_fn(t.len(), deg + 1, |r, c| {
        ((t[r] - center) / scale).powi(c as i32)
    });
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| GeometryError::DegenerateInput(e.to_string()))?;
    Ok(PolyFit {
        coeffs: x.iter().copied().collect(),
        center,
        scale,
    })
}

/// Per-coordinate polynomial model of the curve across a gap.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeFit {
    pub axis: Vec3,
    pub x: PolyFit,
    pub y: PolyFit,
    pub z: PolyFit,
    /// Projection of the facing end of the first cluster.
    pub t_start: f64,
    /// Projection of the facing end of the second cluster.
    pub t_end: f64,
    /// Mean point spacing of the fitting windows.
    pub pitch: f64,
}

impl BridgeFit {
    /// `c_a` is the cluster on the low-projection side of the gap.
    pub fn fit(
        c_a: &[Point3],
        c_b: &[Point3],
        axis: &Vec3,
        degree: usize,
    ) -> Result<Self, GeometryError> {
        if c_a.is_empty() || c_b.is_empty() {
            return Err(GeometryError::DegenerateInput(
                "bridge needs two nonempty clusters".into(),
            ));
        }
        let axis = axis.normalize();
        let proj = |p: &Point3| p.coords.dot(&axis);
        let mut a: Vec<&Point3> = c_a.iter().collect();
        let mut b: Vec<&Point3> = c_b.iter().collect();
        // facing ends first
        a.sort_by(|p, q| proj(q).total_cmp(&proj(p)));
        b.sort_by(|p, q| proj(p).total_cmp(&proj(q)));
        a.truncate(K_FIT.min(a.len()));
        b.truncate(K_FIT.min(b.len()));

        let window: Vec<&Point3> = a.iter().rev().chain(b.iter()).copied().collect();
        let ts: Vec<f64> = window.iter().map(|p| proj(p)).collect();
        let coord = |k: usize| -> Vec<f64> { window.iter().map(|p| p[k]).collect() };
        let x = fit_polynomial(&ts, &coord(0), degree)?;
        let y = fit_polynomial(&ts, &coord(1), degree)?;
        let z = fit_polynomial(&ts, &coord(2), degree)?;

        let spacing = |side: &[&Point3]| -> Option<f64> {
            (side.len() >= 2).then(|| {
                side.windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>() / (side.len() - 1) as f64
            })
        };
        let pitch = match (spacing(&a), spacing(&b)) {
            (Some(p), Some(q)) => 0.5 * (p + q),
            (Some(p), None) | (None, Some(p)) => p,
            (None, None) => f64::INFINITY,
        };
        Ok(Self {
            axis,
            x,
            y,
            z,
            t_start: proj(a[0]),
            t_end: proj(b[0]),
            pitch,
        })
    }

    pub fn eval(&self, t: f64) -> Point3 {
        Point3::new(self.x.eval(t), self.y.eval(t), self.z.eval(t))
    }

    /// Sample the gap from `t_start` to `t_end`, both ends included.
    pub fn sample(&self) -> Result<Polyline3D, GeometryError> {
        let p0 = self.eval(self.t_start);
        let p1 = self.eval(self.t_end);
        let span = (p1 - p0).norm();
        let m = if self.pitch.is_finite() && self.pitch > 0.0 {
            ((span / self.pitch).ceil() as usize + 1).clamp(2, 100_000)
        } else {
            2
        };
        let pts: Vec<Point3> = (0..m)
            .map(|k| {
                let u = k as f64 / (m - 1) as f64;
                self.eval(self.t_start + u * (self.t_end - self.t_start))
            })
            .collect();
        Polyline3D::from_points_dedup(pts)
    }
}

/// Interpolating polyline across the gap between two clusters ordered along
/// `axis` (`c_a` before `c_b`).
pub fn polyfit_bridge(
    c_a: &[Point3],
    c_b: &[Point3],
    axis: &Vec3,
    degree: usize,
) -> Result<Polyline3D, GeometryError> {
    BridgeFit::fit(c_a, c_b, axis, degree)?.sample()
}
