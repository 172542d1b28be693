use super::{gauss, BinDims, Scene, SensorNoise};
use crate::geometry::{DepthImage, GridImage, Point3, Polyline3D};
use rand::Rng;

/// Instance-buffer label of the bin floor or table.
pub const FLOOR_ID: i32 = -1;
/// Instance-buffer label of bin walls.
pub const WALL_ID: i32 = -2;
/// Instance-buffer label of grippers and other non-DLO occluders.
pub const OCCLUDER_ID: i32 = -3;

/// Orthographic top-view camera looking down world −Z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// Height of the image plane above the floor, meters.
    pub z: f64,
    pub pitch: f64,
    /// World X-Y of pixel (0, 0).
    pub origin: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub const DEFAULT_HEIGHT: f64 = 0.8;

    /// Covers the bin floor and its walls.
    pub fn for_bin(bin: &BinDims, pitch: f64) -> Self {
        let t = bin.wall_thickness;
        Self {
            z: Self::DEFAULT_HEIGHT,
            pitch,
            origin: (-t + 0.5 * pitch, -t + 0.5 * pitch),
            width: ((bin.length + 2.0 * t) / pitch).floor() as usize,
            height: ((bin.width + 2.0 * t) / pitch).floor() as usize,
        }
    }

    /// Covers the X-Y bounding box of `points` plus `margin`.
    pub fn covering(points: &[Point3], margin: f64, pitch: f64) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Self {
            z: Self::DEFAULT_HEIGHT,
            pitch,
            origin: (x0 - margin, y0 - margin),
            width: ((x1 - x0 + 2.0 * margin) / pitch).ceil() as usize + 1,
            height: ((y1 - y0 + 2.0 * margin) / pitch).ceil() as usize + 1,
        }
    }

    pub fn grid<T: Clone>(&self, fill: T) -> GridImage<T> {
        GridImage::filled(
            self.width,
            self.height,
            self.pitch,
            Point3::new(self.origin.0, self.origin.1, self.z),
            fill,
        )
    }
}

/// Noise-free render: surface heights, per-pixel owner and per-tube
/// footprint pixel counts (visible or not).
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub depth: DepthImage,
    pub ids: GridImage<i32>,
    /// Indexed by instance id; zero for instances not rendered.
    pub footprint: Vec<usize>,
}

impl RenderOutput {
    pub fn visible_count(&self, id: usize) -> usize {
        self.ids.values.iter().filter(|&&v| v == id as i32).count()
    }
}

/// Rotated rectangle seen from above, with a flat top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BoxOccluder {
    pub center: (f64, f64),
    pub yaw: f64,
    pub half: (f64, f64),
    pub top: f64,
}

pub(crate) struct Rasterizer {
    cam: Camera,
    height: Vec<f64>,
    ids: Vec<i32>,
    footprint: Vec<usize>,
    stamp: Vec<u32>,
}

impl Rasterizer {
    pub fn new(cam: Camera, n_ids: usize, background: impl Fn(f64, f64) -> (f64, i32)) -> Self {
        let n = cam.width * cam.height;
        let mut height = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        for j in 0..cam.height {
            for i in 0..cam.width {
                let (h, id) = background(
                    cam.origin.0 + i as f64 * cam.pitch,
                    cam.origin.1 + j as f64 * cam.pitch,
                );
                height.push(h);
                ids.push(id);
            }
        }
        Self {
            cam,
            height,
            ids,
            footprint: vec![0; n_ids],
            stamp: vec![0; n],
        }
    }

    fn pixel_range(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.cam.pitch).ceil();
        let b = ((hi - origin) / self.cam.pitch).floor();
        if b < 0.0 || a > (n - 1) as f64 || a > b {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
    }

    /// Capsule-swept tube along `line`.
    pub fn tube(&mut self, id: usize, line: &Polyline3D, radius: f64) {
        let tag = id as u32 + 1;
        let r2 = radius * radius;
        for w in line.points().windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let Some((i0, i1)) = self.pixel_range(
                a.x.min(b.x) - radius,
                a.x.max(b.x) + radius,
                self.cam.origin.0,
                self.cam.width,
            ) else {
                continue;
            };
            let Some((j0, j1)) = self.pixel_range(
                a.y.min(b.y) - radius,
                a.y.max(b.y) + radius,
                self.cam.origin.1,
                self.cam.height,
            ) else {
                continue;
            };
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let len2 = ex * ex + ey * ey;
            for j in j0..=j1 {
                let y = self.cam.origin.1 + j as f64 * self.cam.pitch;
                for i in i0..=i1 {
                    let x = self.cam.origin.0 + i as f64 * self.cam.pitch;
                    let t = if len2 > 0.0 {
                        (((x - a.x) * ex + (y - a.y) * ey) / len2).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    let (dx, dy) = (x - a.x - t * ex, y - a.y - t * ey);
                    let rho2 = dx * dx + dy * dy;
                    if rho2 > r2 {
                        continue;
                    }
                    let k = j * self.cam.width + i;
                    if self.stamp[k] != tag {
                        self.stamp[k] = tag;
                        self.footprint[id] += 1;
                    }
                    let top = a.z + t * (b.z - a.z) + (r2 - rho2).sqrt();
                    if top > self.height[k] {
                        self.height[k] = top;
                        self.ids[k] = id as i32;
                    }
                }
            }
        }
    }

    pub fn occluder(&mut self, b: &BoxOccluder) {
        let reach = b.half.0.hypot(b.half.1);
        let (c, s) = (b.yaw.cos(), b.yaw.sin());
        let Some((i0, i1)) = self.pixel_range(
            b.center.0 - reach,
            b.center.0 + reach,
            self.cam.origin.0,
            self.cam.width,
        ) else {
            return;
        };
        let Some((j0, j1)) = self.pixel_range(
            b.center.1 - reach,
            b.center.1 + reach,
            self.cam.origin.1,
            self.cam.height,
        ) else {
            return;
        };
        for j in j0..=j1 {
            let y = self.cam.origin.1 + j as f64 * self.cam.pitch - b.center.1;
            for i in i0..=i1 {
                let x = self.cam.origin.0 + i as f64 * self.cam.pitch - b.center.0;
                let (u, v) = (c * x + s * y, -s * x + c * y);
                if u.abs() <= b.half.0 && v.abs() <= b.half.1 {
                    let k = j * self.cam.width + i;
                    if b.top > self.height[k] {
                        self.height[k] = b.top;
                        self.ids[k] = OCCLUDER_ID;
                    }
                }
            }
        }
    }

    pub fn finish(self) -> RenderOutput {
        let mut depth = self.cam.grid(0.0);
        for (d, h) in depth.values.iter_mut().zip(&self.height) {
            *d = self.cam.z - h;
        }
        let mut ids = self.cam.grid(FLOOR_ID);
        ids.values = self.ids;
        RenderOutput {
            depth,
            ids,
            footprint: self.footprint,
        }
    }
}

/// Render every instance still in the pile, plus floor and walls.
pub fn render_scene(scene: &Scene, pitch: f64) -> RenderOutput {
    let cam = Camera::for_bin(&scene.bin, pitch);
    let bin = scene.bin;
    let mut r = Rasterizer::new(cam, scene.instances.len(), |x, y| {
        if x >= 0.0 && y >= 0.0 && x <= bin.length && y <= bin.width {
            (0.0, FLOOR_ID)
        } else {
            (bin.wall_height, WALL_ID)
        }
    });
    for inst in scene.in_pile() {
        r.tube(inst.id, &inst.centerline, inst.spec.radius());
    }
    r.finish()
}

/// Per-pixel Gaussian depth noise; valid pixels stay valid.
pub fn add_depth_noise<R: Rng + ?Sized>(depth: &mut DepthImage, sigma: f64, rng: &mut R) {
    if sigma <= 0.0 {
        return;
    }
    for d in depth.values.iter_mut().filter(|d| **d > 0.0) {
        *d = (*d + gauss(rng, sigma)).max(1e-4);
    }
}

/// Top-view depth of the pile with sensor noise.
pub fn render_depth<R: Rng + ?Sized>(
    scene: &Scene,
    pitch: f64,
    noise: &SensorNoise,
    rng: &mut R,
) -> DepthImage {
    let mut depth = render_scene(scene, pitch).depth;
    add_depth_noise(&mut depth, noise.depth_sigma, rng);
    depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{DloInstance, DloSpec, InstanceStatus};

    fn straight(y: f64, z: f64) -> Polyline3D {
        Polyline3D::new(vec![Point3::new(0.1, y, z), Point3::new(0.5, y, z)]).unwrap()
    }

    fn scene_with(lines: Vec<Polyline3D>, diameter: f64) -> Scene {
        let spec = DloSpec {
            diameter,
            ..DloSpec::hv_cable()
        };
        let mut s = Scene::empty(BinDims::default(), 0);
        for (id, centerline) in lines.into_iter().enumerate() {
            s.instances.push(DloInstance {
                id,
                spec,
                centerline,
                layer: id,
                status: InstanceStatus::InPile,
            });
        }
        s
    }

    #[test]
    fn empty_scene_is_floor_depth() {
        let s = Scene::empty(BinDims::default(), 0);
        let out = render_scene(&s, 0.002);
        for (d, id) in out.depth.values.iter().zip(&out.ids.values) {
            if *id == FLOOR_ID {
                assert!((d - Camera::DEFAULT_HEIGHT).abs() < 1e-12);
            }
        }
        assert!(out.ids.values.contains(&WALL_ID));
    }

    #[test]
    fn band_width_matches_diameter() {
        let pitch = 0.001;
        let s = scene_with(vec![straight(0.2, 0.005)], 10.0 * pitch);
        let out = render_scene(&s, pitch);
        let col = ((0.3 - out.depth.origin[0]) / pitch).round() as usize;
        let width = (0..out.ids.height)
            .filter(|&row| *out.ids.get(col, row) == 0)
            .count();
        assert!((width as i64 - 10).abs() <= 1, "band width {width}");
    }

    #[test]
    fn upper_instance_wins() {
        let pitch = 0.001;
        let crossing = Polyline3D::new(vec![
            Point3::new(0.3, 0.1, 0.015),
            Point3::new(0.3, 0.3, 0.015),
        ])
        .unwrap();
        let s = scene_with(vec![straight(0.2, 0.005), crossing], 0.01);
        let out = render_scene(&s, pitch);
        let p = out.depth.world_to_pixel(0.3, 0.2).unwrap();
        assert_eq!(*out.ids.get(p.x, p.y), 1);
        assert!(out.footprint[0] > out.visible_count(0));
    }

    #[test]
    fn adding_an_instance_never_deepens() {
        let s1 = scene_with(vec![straight(0.2, 0.005)], 0.01);
        let s2 = scene_with(vec![straight(0.2, 0.005), straight(0.205, 0.012)], 0.01);
        let (a, b) = (render_scene(&s1, 0.002), render_scene(&s2, 0.002));
        for (x, y) in a.depth.values.iter().zip(&b.depth.values) {
            assert!(y <= x);
        }
    }
}
