use super::Skeleton;
use crate::geometry::{Mask, Pixel};

/// Working copy of a mask's bounding box with a one-pixel empty border, so
/// neighborhood lookups never need bounds checks.
struct Patch {
    w: usize,
    x0: usize,
    y0: usize,
    px: Vec<u8>,
}

// Clockwise from north: P2..P9 in Zhang–Suen notation.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

impl Patch {
    fn from_mask(mask: &Mask) -> Option<Self> {
        let (bx0, by0, bx1, by1) = mask.bbox()?;
        let (w, h) = (bx1 - bx0 + 3, by1 - by0 + 3);
        let mut px = vec![0u8; w * h];
        for y in by0..=by1 {
            for x in bx0..=bx1 {
                if *mask.get(x, y) {
                    px[(y - by0 + 1) * w + (x - bx0 + 1)] = 1;
                }
            }
        }
        Some(Self {
            w,
            x0: bx0,
            y0: by0,
            px,
        })
    }

    fn offset(&self, k: usize, d: (isize, isize)) -> usize {
        (k as isize + d.1 * self.w as isize + d.0) as usize
    }

    fn ring(&self, k: usize) -> [bool; 8] {
        let mut r = [false; 8];
        for (i, d) in RING.iter().enumerate() {
            r[i] = self.px[self.offset(k, *d)] != 0;
        }
        r
    }

    fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        RING.iter()
            .map(move |d| self.offset(k, *d))
            .filter(|&q| self.px[q] != 0)
    }

    fn degree(&self, k: usize) -> usize {
        self.neighbours(k).count()
    }

    fn pixel(&self, k: usize) -> Pixel {
        Pixel::new(k % self.w - 1 + self.x0, k / self.w - 1 + self.y0)
    }

    fn live(&self) -> Vec<usize> {
        (0..self.px.len()).filter(|&k| self.px[k] != 0).collect()
    }

    fn to_mask(&self, like: &Mask) -> Mask {
        let mut out = like.blank_like(false);
        for k in self.live() {
            let p = self.pixel(k);
            out.set(p.x, p.y, true);
        }
        out
    }

    fn zhang_suen(&mut self) {
        let mut live = self.live();
        let mut doomed = Vec::new();
        loop {
            let mut changed = false;
            for pass in 0..2 {
                doomed.clear();
                for &k in &live {
                    let r = self.ring(k);
                    let b = r.iter().filter(|v| **v).count();
                    if !(3..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&i| !r[i] && r[(i + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (r[0], r[2], r[4], r[6]);
                    let ok = if pass == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        doomed.push(k);
                    }
                }
                for &k in &doomed {
                    self.px[k] = 0;
                }
                changed |= !doomed.is_empty();
                live.retain(|&k| self.px[k] != 0);
            }
            if !changed {
                break;
            }
        }
    }

    /// Number of 8-connected groups among the set ring pixels of `k`.
    fn ring_groups(&self, k: usize) -> usize {
        let set: Vec<(isize, isize)> = RING
            .iter()
            .copied()
            .filter(|d| self.px[self.offset(k, *d)] != 0)
            .collect();
        let mut group: Vec<usize> = (0..set.len()).collect();
        fn root(g: &mut [usize], mut i: usize) -> usize {
            while g[i] != i {
                i = g[i];
            }
            i
        }
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                if (set[i].0 - set[j].0).abs() <= 1 && (set[i].1 - set[j].1).abs() <= 1 {
                    let (a, b) = (root(&mut group, i), root(&mut group, j));
                    group[a.max(b)] = a.min(b);
                }
            }
        }
        (0..set.len()).filter(|&i| root(&mut group, i) == i).count()
    }

    /// Remove staircase corners so that lines are strictly one pixel wide
    /// in the 8-connected sense.
    fn remove_redundant(&mut self) {
        loop {
            let mut removed = false;
            for k in self.live() {
                let r = self.ring(k);
                let corner = (r[0] || r[4]) && (r[2] || r[6]);
                if corner && self.degree(k) >= 2 && self.ring_groups(k) == 1 {
                    self.px[k] = 0;
                    removed = true;
                }
            }
            if !removed {
                break;
            }
        }
    }

    /// Chains of non-junction pixels, each traced from its lower-index end.
    fn trace(&self) -> Vec<Vec<usize>> {
        let junction: Vec<bool> = (0..self.px.len())
            .map(|k| self.px[k] != 0 && self.degree(k) > 2)
            .collect();
        let free = |q: usize| self.px[q] != 0 && !junction[q];
        let mut seen = vec![false; self.px.len()];
        let mut paths = Vec::new();
        let live = self.live();
        let chain_deg = |k: usize| self.neighbours(k).filter(|&q| free(q)).count();
        let walk = |start: usize, seen: &mut Vec<bool>| {
            let mut path = vec![start];
            seen[start] = true;
            let mut cur = start;
            while let Some(next) = self.neighbours(cur).find(|&q| free(q) && !seen[q]) {
                seen[next] = true;
                path.push(next);
                cur = next;
            }
            path
        };
        for &k in &live {
            if free(k) && !seen[k] && chain_deg(k) <= 1 {
                paths.push(walk(k, &mut seen));
            }
        }
        // closed loops have no chain end
        for &k in &live {
            if free(k) && !seen[k] {
                paths.push(walk(k, &mut seen));
            }
        }
        paths
    }

    /// Drop spurs: short chains with a free end whose other end touches a
    /// junction.
    fn prune(&mut self, min_len: usize) {
        for _ in 0..8 {
            let junction: Vec<bool> = (0..self.px.len())
                .map(|k| self.px[k] != 0 && self.degree(k) > 2)
                .collect();
            let touches_junction = |k: usize| self.neighbours(k).any(|q| junction[q]);
            let mut cut = Vec::new();
            for path in self.trace() {
                if path.len() >= min_len {
                    continue;
                }
                let (a, b) = (path[0], path[path.len() - 1]);
                let free_end = self.degree(a) == 1 || self.degree(b) == 1;
                if free_end && (touches_junction(a) || touches_junction(b)) {
                    cut.extend(path);
                }
            }
            if cut.is_empty() {
                break;
            }
            for k in cut {
                self.px[k] = 0;
            }
            self.remove_redundant();
        }
    }
}

/// Zhang–Suen thinning to a one-pixel-wide 8-connected skeleton.
pub fn zhang_suen(mask: &Mask) -> Mask {
    match Patch::from_mask(mask) {
        Some(mut p) => {
            p.zhang_suen();
            p.remove_redundant();
            p.to_mask(mask)
        }
        None => mask.blank_like(false),
    }
}

/// Thin, prune spurs shorter than `prune_min` and split at junctions.
pub fn skeletonize(mask: &Mask, prune_min: usize) -> Skeleton {
    let Some(mut p) = Patch::from_mask(mask) else {
        return Skeleton::default();
    };
    p.zhang_suen();
    p.remove_redundant();
    p.prune(prune_min);
    Skeleton {
        paths: p
            .trace()
            .into_iter()
            .map(|path| path.into_iter().map(|k| p.pixel(k)).collect())
            .collect(),
        source: None,
    }
}
