use super::{GeometryError, Point3};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Pixel coordinate, column `x` and row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel {
    pub x: usize,
    pub y: usize,
}

impl Pixel {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// True when the two pixels are distinct 8-neighbors.
    pub fn touches(&self, other: &Pixel) -> bool {
        self != other && self.x.abs_diff(other.x) <= 1 && self.y.abs_diff(other.y) <= 1
    }
}

/// Row-major scalar grid registered in the world frame.
///
/// Pixel `(x, y)` is centered at `origin + (x * pitch, y * pitch)` in world
/// X-Y. `origin.z` is the camera height, so a depth value `d` back-projects
/// to world height `origin.z - d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridImage<T> {
    pub width: usize,
    pub height: usize,
    /// Meters per pixel.
    pub pitch: f64,
    pub origin: [f64; 3],
    pub values: Vec<T>,
}

/// Depth in meters from the camera plane; `0.0` marks missing data.
pub type DepthImage = GridImage<f64>;

/// Binary mask.
pub type Mask = GridImage<bool>;

impl<T: Clone> GridImage<T> {
    pub fn filled(width: usize, height: usize, pitch: f64, origin: Point3, fill: T) -> Self {
        assert!(pitch > 0.0, "pixel pitch must be positive");
        Self {
            width,
            height,
            pitch,
            origin: [origin.x, origin.y, origin.z],
            values: vec![fill; width * height],
        }
    }

    pub fn from_values(
        width: usize,
        height: usize,
        pitch: f64,
        origin: Point3,
        values: Vec<T>,
    ) -> Result<Self, GeometryError> {
        if values.len() != width * height || !(pitch > 0.0) {
            return Err(GeometryError::ShapeError {
                a: (width, height),
                b: (values.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            pitch,
            origin: [origin.x, origin.y, origin.z],
            values,
        })
    }

    /// Same geometry, every value replaced by `fill`.
    pub fn blank_like<U: Clone>(&self, fill: U) -> GridImage<U> {
        GridImage {
            width: self.width,
            height: self.height,
            pitch: self.pitch,
            origin: self.origin,
            values: vec![fill; self.width * self.height],
        }
    }
}

impl<T> GridImage<T> {
    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn pixel_of(&self, index: usize) -> Pixel {
        Pixel::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = self.index(x, y);
        self.values[i] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn same_shape<U>(&self, other: &GridImage<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn origin_point(&self) -> Point3 {
        Point3::new(self.origin[0], self.origin[1], self.origin[2])
    }

    /// World X-Y of a pixel center.
    pub fn pixel_center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            self.origin[0] + x as f64 * self.pitch,
            self.origin[1] + y as f64 * self.pitch,
        )
    }

    /// Pixel whose center is nearest to world `(wx, wy)`, if inside the grid.
    pub fn world_to_pixel(&self, wx: f64, wy: f64) -> Option<Pixel> {
        let fx = ((wx - self.origin[0]) / self.pitch).round();
        let fy = ((wy - self.origin[1]) / self.pitch).round();
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some(Pixel::new(fx as usize, fy as usize))
    }

    /// In-bounds 8-neighbors of a pixel.
    pub fn neighbors8(&self, p: Pixel) -> impl Iterator<Item = Pixel> + '_ {
        let (w, h) = (self.width as isize, self.height as isize);
        NEIGHBOR_OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let nx = p.x as isize + dx;
            let ny = p.y as isize + dy;
            (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| Pixel::new(nx as usize, ny as usize))
        })
    }
}

pub(crate) const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl GridImage<bool> {
    pub fn count(&self) -> usize {
        self.values.iter().filter(|v| **v).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.values.iter().any(|v| *v)
    }

    pub fn pixels(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(i, _)| self.pixel_of(i))
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a |= *b;
        }
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the set pixels.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            let row = &self.values[y * self.width..(y + 1) * self.width];
            let (Some(first), Some(last)) =
                (row.iter().position(|v| *v), row.iter().rposition(|v| *v))
            else {
                continue;
            };
            b = Some(match b {
                None => (first, y, last, y),
                Some((x0, y0, x1, _)) => (x0.min(first), y0, x1.max(last), y),
            });
        }
        b
    }

    /// Dilate (`k > 0`) or erode (`k < 0`) by `|k|` pixels, 8-connected.
    /// Pixels outside the grid count as unset.
    pub fn morph(&self, k: i32) -> Mask {
        let mut out = self.clone();
        let Some((bx0, by0, bx1, by1)) = self.bbox() else {
            return out;
        };
        let grow = k.max(0) as usize;
        let (x0, y0) = (bx0.saturating_sub(grow), by0.saturating_sub(grow));
        let (x1, y1) = (
            (bx1 + grow).min(self.width - 1),
            (by1 + grow).min(self.height - 1),
        );
        let (w, h) = (self.width as isize, self.height as isize);
        for _ in 0..k.unsigned_abs() {
            let src = out.values.clone();
            let at = |x: isize, y: isize| {
                x >= 0 && y >= 0 && x < w && y < h && src[(y * w + x) as usize]
            };
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let here = src[y * self.width + x];
                    let (xi, yi) = (x as isize, y as isize);
                    let v = if k > 0 {
                        here || NEIGHBOR_OFFSETS
                            .iter()
                            .any(|&(dx, dy)| at(xi + dx, yi + dy))
                    } else {
                        here && NEIGHBOR_OFFSETS
                            .iter()
                            .all(|&(dx, dy)| at(xi + dx, yi + dy))
                    };
                    out.values[y * self.width + x] = v;
                }
            }
        }
        out
    }
}

impl GridImage<f64> {
    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        *self.get(x, y) > 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    /// Back-project a valid depth pixel to a world point.
    pub fn world_point(&self, x: usize, y: usize) -> Option<Point3> {
        let d = *self.get(x, y);
        (d > 0.0).then(|| {
            let (wx, wy) = self.pixel_center(x, y);
            Point3::new(wx, wy, self.origin[2] - d)
        })
    }
}

/// Intersection over union of two binary masks; 0 when the union is empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64, GeometryError> {
    if !a.same_shape(b) {
        return Err(GeometryError::ShapeError {
            a: a.dims(),
            b: b.dims(),
        });
    }
    let (mut inter, mut uni) = (0usize, 0usize);
    for (x, y) in a.values.iter().zip(&b.values) {
        inter += (*x && *y) as usize;
        uni += (*x || *y) as usize;
    }
    Ok(if uni == 0 {
        0.0
    } else {
        inter as f64 / uni as f64
    })
}

/// 8-connected component labels (0 = background, components numbered from
/// 1 in raster order of their first pixel) and the size of each component.
pub fn connected_components(mask: &Mask) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![0u32; mask.values.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.values.len() {
        if !mask.values[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            for n in mask.neighbors8(mask.pixel_of(i)) {
                let j = mask.index(n.x, n.y);
                if mask.values[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}
