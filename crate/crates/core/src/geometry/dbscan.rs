use super::Point3;
use std::cmp::Ordering;
use std::collections::HashMap;

/// DBSCAN result as indices into the input slice.
///
/// Each cluster lists its members in ascending index order. Clusters are
/// sorted by size descending, then by their lexicographically smallest
/// point `(x, y, z)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dbscan {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

impl Dbscan {
    /// Per-point cluster label (`None` for noise), labels index `clusters`.
    pub fn labels(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                out[i] = Some(c);
            }
        }
        out
    }
}

type Cell = (i64, i64, i64);

struct SpatialHash<'a> {
    points: &'a [Point3],
    eps: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<'a> SpatialHash<'a> {
    fn new(points: &'a [Point3], eps: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, eps)).or_default().push(i);
        }
        Self { points, eps, cells }
    }

    /// Indices within `eps` of point `i`, itself included, ascending.
    fn neighbors(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = &self.points[i];
        let (cx, cy, cz) = cell_of(p, self.eps);
        let eps2 = self.eps * self.eps;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(
                            bucket
                                .iter()
                                .copied()
                                .filter(|&j| (self.points[j] - p).norm_squared() <= eps2),
                        );
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

fn cell_of(p: &Point3, eps: f64) -> Cell {
    (
        (p.x / eps).floor() as i64,
        (p.y / eps).floor() as i64,
        (p.z / eps).floor() as i64,
    )
}

/// Density-based clustering.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within distance `eps`, inclusive. Clusters grow from unvisited core
/// points in index order; a border point joins the first cluster that
/// reaches it. Panics if `eps` is not positive or `min_pts` is zero.
pub fn dbscan(points: &[Point3], eps: f64, min_pts: usize) -> Dbscan {
    assert!(eps > 0.0 && eps.is_finite(), "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let n = points.len();
    let hash = SpatialHash::new(points, eps);
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut nb = Vec::new();
    let mut nb2 = Vec::new();
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        hash.neighbors(i, &mut nb);
        if nb.len() < min_pts {
            continue;
        }
        let c = clusters.len();
        let mut members = vec![i];
        label[i] = Some(c);
        let mut frontier: Vec<usize> = nb.iter().copied().filter(|&j| j != i).collect();
        while let Some(j) = frontier.pop() {
            if label[j].is_none() {
                label[j] = Some(c);
                members.push(j);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            hash.neighbors(j, &mut nb2);
            if nb2.len() >= min_pts {
                frontier.extend(
                    nb2.iter()
                        .copied()
                        .filter(|&k| label[k].is_none() || !visited[k]),
                );
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    let noise = (0..n).filter(|&i| label[i].is_none()).collect();
    sort_clusters(points, &mut clusters);
    Dbscan { clusters, noise }
}

fn lex(a: &Point3, b: &Point3) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

fn lex_min(points: &[Point3], members: &[usize]) -> usize {
    let mut best = members[0];
    for &i in &members[1..] {
        if lex(&points[i], &points[best]) == Ordering::Less {
            best = i;
        }
    }
    best
}

pub(crate) fn sort_clusters(points: &[Point3], clusters: &mut [Vec<usize>]) {
    clusters.sort_by(|a, b| {
        b.len().cmp(&a.len()).then_with(|| {
            let (ia, ib) = (lex_min(points, a), lex_min(points, b));
            lex(&points[ia], &points[ib]).then(ia.cmp(&ib))
        })
    });
}
