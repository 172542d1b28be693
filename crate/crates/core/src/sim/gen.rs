use super::{BinDims, DloInstance, DloSpec, EntanglementEdge, InstanceStatus, Scene, SimError};
use crate::geometry::{Point3, Polyline3D};
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Knobs of the pile generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    /// Centerline sample spacing, meters.
    pub step: f64,
    /// Entanglement probability contributed by each crossing.
    pub p_base: f64,
    /// Multiplier on `p_base` when either DLO carries connectors.
    pub connector_factor: f64,
    /// Extra lateral clearance below which a dropped DLO stacks on top of
    /// an earlier one instead of resting beside it, meters.
    pub drape_margin: f64,
    /// Largest |dz/ds| of a draped centerline.
    pub max_slope: f64,
    /// Pile height-field cell size, meters.
    pub cell: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            step: 0.005,
            p_base: 0.02,
            connector_factor: 2.0,
            drape_margin: 0.012,
            max_slope: 0.5,
            cell: 0.002,
        }
    }
}

struct HeightField {
    nx: usize,
    ny: usize,
    cell: f64,
    h: Vec<f64>,
}

impl HeightField {
    fn new(bin: &BinDims, cell: f64) -> Self {
        let nx = (bin.length / cell).ceil() as usize + 1;
        let ny = (bin.width / cell).ceil() as usize + 1;
        Self {
            nx,
            ny,
            cell,
            h: vec![0.0; nx * ny],
        }
    }

    fn range(&self, lo: f64, hi: f64, n: usize) -> (usize, usize) {
        let a = (lo / self.cell).floor().max(0.0) as usize;
        let b = ((hi / self.cell).ceil().max(0.0) as usize).min(n - 1);
        (a.min(n - 1), b)
    }

    /// Highest surface within `radius` of `(x, y)`.
    fn max_in_disc(&self, x: f64, y: f64, radius: f64) -> f64 {
        let (i0, i1) = self.range(x - radius, x + radius, self.nx);
        let (j0, j1) = self.range(y - radius, y + radius, self.ny);
        let r2 = radius * radius;
        let mut best = 0.0f64;
        for j in j0..=j1 {
            let dy = j as f64 * self.cell - y;
            for i in i0..=i1 {
                let dx = i as f64 * self.cell - x;
                if dx * dx + dy * dy <= r2 {
                    best = best.max(self.h[j * self.nx + i]);
                }
            }
        }
        best
    }

    /// Raise the field to the top surface of a tube segment.
    fn stamp_segment(&mut self, a: &Point3, b: &Point3, r: f64) {
        let (i0, i1) = self.range(a.x.min(b.x) - r, a.x.max(b.x) + r, self.nx);
        let (j0, j1) = self.range(a.y.min(b.y) - r, a.y.max(b.y) + r, self.ny);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len2 = ex * ex + ey * ey;
        for j in j0..=j1 {
            let y = j as f64 * self.cell;
            for i in i0..=i1 {
                let x = i as f64 * self.cell;
                let t = if len2 > 0.0 {
                    (((x - a.x) * ex + (y - a.y) * ey) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let (dx, dy) = (x - a.x - t * ex, y - a.y - t * ey);
                let rho2 = dx * dx + dy * dy;
                if rho2 <= r * r {
                    let top = a.z + t * (b.z - a.z) + (r * r - rho2).sqrt();
                    let cell = &mut self.h[j * self.nx + i];
                    *cell = cell.max(top);
                }
            }
        }
    }
}

/// Smooth planar random curve confined to the inner bin footprint.
fn random_walk<R: Rng>(rng: &mut R, spec: &DloSpec, bin: &BinDims, step: f64) -> Vec<(f64, f64)> {
    let margin = spec.radius() + 0.003;
    let (xmin, xmax, ymin, ymax) = (margin, bin.length - margin, margin, bin.width - margin);
    let n = (spec.length / step).round().max(1.0) as usize + 1;
    let ds = spec.length / (n - 1) as f64;
    let sigma = 3.0 * (1.0 - 0.8 * spec.stiffness);
    let kappa_max = 25.0;
    let lookahead = 0.04;

    let mut p = (rng.random_range(xmin..xmax), rng.random_range(ymin..ymax));
    let mut heading: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let mut kappa = 0.0f64;
    let mut pts = Vec::with_capacity(n);
    pts.push(p);
    for _ in 1..n {
        kappa = (0.9 * kappa + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .clamp(-kappa_max, kappa_max);
        let ahead = (
            p.0 + lookahead * heading.cos(),
            p.1 + lookahead * heading.sin(),
        );
        let out_x = ahead.0 < xmin || ahead.0 > xmax;
        let out_y = ahead.1 < ymin || ahead.1 > ymax;
        if out_x || out_y {
            // turn toward the side that points back into the box
            let inward = ((bin.length * 0.5 - p.0), (bin.width * 0.5 - p.1));
            let cross = heading.cos() * inward.1 - heading.sin() * inward.0;
            kappa = kappa_max * cross.signum();
        }
        heading += kappa * ds;
        p = (
            (p.0 + ds * heading.cos()).clamp(xmin, xmax),
            (p.1 + ds * heading.sin()).clamp(ymin, ymax),
        );
        pts.push(p);
    }
    pts
}

fn segments_cross(a0: &Point3, a1: &Point3, b0: &Point3, b1: &Point3) -> bool {
    let orient =
        |p: &Point3, q: &Point3, r: &Point3| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    (d1 > 0.0) != (d2 > 0.0)
        && (d3 > 0.0) != (d4 > 0.0)
        && d1 != 0.0
        && d2 != 0.0
        && d3 != 0.0
        && d4 != 0.0
}

/// Number of X-Y crossings between two centerlines.
pub(crate) fn crossing_count(a: &Polyline3D, b: &Polyline3D) -> usize {
    let bbox = |s: &Polyline3D| {
        s.points()
            .iter()
            .fold((f64::MAX, f64::MAX, f64::MIN, f64::MIN), |m, p| {
                (m.0.min(p.x), m.1.min(p.y), m.2.max(p.x), m.3.max(p.y))
            })
    };
    let (ba, bb) = (bbox(a), bbox(b));
    if ba.2 < bb.0 || bb.2 < ba.0 || ba.3 < bb.1 || bb.3 < ba.1 {
        return 0;
    }
    let mut count = 0;
    for sa in a.points().windows(2) {
        for sb in b.points().windows(2) {
            if segments_cross(&sa[0], &sa[1], &sb[0], &sb[1]) {
                count += 1;
            }
        }
    }
    count
}

/// Generate a cluttered bin of `n_dlos` identical DLOs.
///
/// Curves are dropped one at a time: each centerline point rests on the
/// highest pile surface within `radius + drape_margin`, then the height
/// profile is relaxed to `max_slope`. Every crossing pair receives an
/// entanglement edge with probability `p_base · crossings` (times
/// `connector_factor` with connectors), strength uniform in `[0.1, 1]`.
pub fn gen_bin(
    n_dlos: usize,
    spec: &DloSpec,
    bin: &BinDims,
    params: &GenParams,
    seed: u64,
) -> Result<Scene, SimError> {
    spec.validate()?;
    if n_dlos == 0 {
        return Err(SimError::CapacityError {
            n: 0,
            reason: "at least one DLO is required".into(),
        });
    }
    if 4.0 * spec.diameter > bin.length.min(bin.width) {
        return Err(SimError::CapacityError {
            n: n_dlos,
            reason: "DLO diameter too large for the bin footprint".into(),
        });
    }
    let footprint = n_dlos as f64 * spec.length * (spec.diameter + params.drape_margin);
    let capacity = bin.length * bin.width * (bin.wall_height / spec.diameter).floor();
    if footprint > capacity {
        return Err(SimError::CapacityError {
            n: n_dlos,
            reason: format!("pile footprint {footprint:.3} m² exceeds {capacity:.3} m²"),
        });
    }

    let mut rng = rng::seeded(rng::child_seed(seed, rng::stream::SCENE));
    let r = spec.radius();
    let mut field = HeightField::new(bin, params.cell);
    let mut instances = Vec::with_capacity(n_dlos);
    for id in 0..n_dlos {
        let xy = random_walk(&mut rng, spec, bin, params.step);
        let ds = spec.length / (xy.len() - 1) as f64;
        let mut z: Vec<f64> = xy
            .iter()
            .map(|&(x, y)| field.max_in_disc(x, y, r + params.drape_margin) + r)
            .collect();
        let dz = params.max_slope * ds;
        for i in 1..z.len() {
            z[i] = z[i].max(z[i - 1] - dz);
        }
        for i in (0..z.len() - 1).rev() {
            z[i] = z[i].max(z[i + 1] - dz);
        }
        let pts: Vec<Point3> = xy
            .iter()
            .zip(&z)
            .map(|(&(x, y), &z)| Point3::new(x, y, z))
            .collect();
        for w in pts.windows(2) {
            field.stamp_segment(&w[0], &w[1], r);
        }
        let centerline = Polyline3D::from_points_dedup(pts)
            .map_err(|e| SimError::InvalidParameter(format!("degenerate centerline: {e}")))?;
        instances.push(DloInstance {
            id,
            spec: *spec,
            centerline,
            layer: id,
            status: InstanceStatus::InPile,
        });
    }

    let mut entanglement = Vec::new();
    for a in 0..n_dlos {
        for b in a + 1..n_dlos {
            let crossings = crossing_count(&instances[a].centerline, &instances[b].centerline);
            if crossings == 0 {
                continue;
            }
            let factor = if instances[a].spec.has_connectors || instances[b].spec.has_connectors {
                params.connector_factor
            } else {
                1.0
            };
            let p = (params.p_base * crossings as f64 * factor).min(1.0);
            // both draws are always taken so the stream does not depend on p
            let hit: f64 = rng.random();
            let strength: f64 = rng.random_range(0.1..=1.0);
            if hit < p {
                entanglement.push(EntanglementEdge {
                    a,
                    b,
                    strength,
                    crossings,
                });
            }
        }
    }
    Ok(Scene {
        bin: *bin,
        instances,
        entanglement,
        seed,
    })
}
