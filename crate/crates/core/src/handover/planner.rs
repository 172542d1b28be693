use super::HandoverError;
use crate::geometry::{Point3, Pose};
use crate::sim::Workspace;
use nalgebra::UnitQuaternion;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Collision checks are spaced this far apart along a segment, meters.
pub const CHECK_STEP: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Obstacle {
    /// Axis-aligned box.
    Box {
        min: [f64; 3],
        max: [f64; 3],
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
}

impl Obstacle {
    /// Signed clearance from `p` to the obstacle surface; negative inside.
    pub fn clearance(&self, p: &Point3) -> f64 {
        match *self {
            Obstacle::Box { min, max } => {
                let mut outside = 0.0f64;
                let mut inside = f64::NEG_INFINITY;
                for k in 0..3 {
                    let d = (min[k] - p[k]).max(p[k] - max[k]);
                    outside += d.max(0.0).powi(2);
                    inside = inside.max(d);
                }
                if inside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            Obstacle::Sphere { center, radius } => (p - Point3::from(center)).norm() - radius,
        }
    }

    fn within(&self, ws: &Workspace) -> bool {
        let (lo, hi) = match *self {
            Obstacle::Box { min, max } => (min, max),
            Obstacle::Sphere { center, radius } => (
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
        };
        ws.contains(&Point3::from(lo)) && ws.contains(&Point3::from(hi))
    }
}

/// Static obstacles around the arms plus the reachable box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct World {
    pub obstacles: Vec<Obstacle>,
    pub workspace: Workspace,
    /// The TCP is treated as a sphere of this radius, meters.
    pub tcp_radius: f64,
}

impl Default for World {
    fn default() -> Self {
        Self {
            obstacles: Vec::new(),
            workspace: Workspace::default(),
            tcp_radius: 0.02,
        }
    }
}

impl World {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), HandoverError> {
        if self.tcp_radius < 0.0 || !self.obstacles.iter().all(|o| o.within(&self.workspace)) {
            return Err(HandoverError::InvalidParams(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn clearance(&self, p: &Point3) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.clearance(p))
            .fold(f64::INFINITY, f64::min)
            - self.tcp_radius
    }

    pub fn point_free(&self, p: &Point3) -> bool {
        self.workspace.contains(p) && self.clearance(p) > 0.0
    }

    /// Swept check at [`CHECK_STEP`] spacing, both ends included.
    pub fn segment_free(&self, a: &Point3, b: &Point3) -> bool {
        let n = ((b - a).norm() / CHECK_STEP).ceil().max(1.0) as usize;
        (0..=n).all(|i| self.point_free(&(a + (b - a) * (i as f64 / n as f64))))
    }

    pub fn path_free(&self, path: &[Pose]) -> bool {
        path.iter().all(|p| self.point_free(&p.position))
            && path
                .windows(2)
                .all(|w| self.segment_free(&w[0].position, &w[1].position))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Tree extension step, meters.
    pub step: f64,
    pub max_iterations: usize,
    pub restarts: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            step: 0.05,
            max_iterations: 4000,
            restarts: 3,
        }
    }
}

struct Tree {
    nodes: Vec<Point3>,
    parent: Vec<usize>,
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

impl Tree {
    fn new(root: Point3) -> Self {
        Self {
            nodes: vec![root],
            parent: vec![0],
        }
    }

    fn nearest(&self, q: &Point3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n - q).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn extend(&mut self, q: &Point3, step: f64, world: &World) -> Extend {
        let near = self.nearest(q);
        let from = self.nodes[near];
        let d = q - from;
        let dist = d.norm();
        let (to, reached) = if dist <= step {
            (*q, true)
        } else {
            (from + d * (step / dist), false)
        };
        if !world.segment_free(&from, &to) {
            return Extend::Trapped;
        }
        self.nodes.push(to);
        self.parent.push(near);
        let id = self.nodes.len() - 1;
        if reached {
            Extend::Reached(id)
        } else {
            Extend::Advanced(id)
        }
    }

    fn connect(&mut self, q: &Point3, step: f64, world: &World) -> Extend {
        loop {
            match self.extend(q, step, world) {
                Extend::Advanced(_) => continue,
                other => return other,
            }
        }
    }

    fn branch(&self, mut i: usize) -> Vec<Point3> {
        let mut out = vec![self.nodes[i]];
        while i != 0 {
            i = self.parent[i];
            out.push(self.nodes[i]);
        }
        out
    }
}

fn rrt_connect<R: Rng + ?Sized>(
    start: &Point3,
    goal: &Point3,
    world: &World,
    p: &PlannerParams,
    rng: &mut R,
) -> Option<Vec<Point3>> {
    let ws = &world.workspace;
    let mut a = Tree::new(*start);
    let mut b = Tree::new(*goal);
    let mut a_is_start = true;
    for _ in 0..p.max_iterations {
        let q = Point3::new(
            rng.random_range(ws.min[0]..=ws.max[0]),
            rng.random_range(ws.min[1]..=ws.max[1]),
            rng.random_range(ws.min[2]..=ws.max[2]),
        );
        let new = match a.extend(&q, p.step, world) {
            Extend::Reached(i) | Extend::Advanced(i) => Some(i),
            Extend::Trapped => None,
        };
        if let Some(i) = new {
            let target = a.nodes[i];
            if let Extend::Reached(j) = b.connect(&target, p.step, world) {
                let mut from_a = a.branch(i);
                from_a.reverse();
                let mut path = from_a;
                path.extend(b.branch(j).into_iter().skip(1));
                if !a_is_start {
                    path.reverse();
                }
                return Some(path);
            }
        }
        std::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    None
}

/// Greedy shortcutting: from each waypoint jump to the farthest later one
/// reachable in a straight free segment.
fn shortcut(path: &[Point3], world: &World) -> Vec<Point3> {
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 && !world.segment_free(&path[i], &path[j]) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

fn length(path: &[Point3]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Collision-free TCP path from `start` to `goal`. Positions come from
/// RRT-Connect; orientations are interpolated from start to goal by arc
/// fraction. The shortest of the restarts is returned.
pub fn plan_path<R: Rng + ?Sized>(
    start: &Pose,
    goal: &Pose,
    world: &World,
    p: &PlannerParams,
    rng: &mut R,
) -> Result<Vec<Pose>, HandoverError> {
    if !world.point_free(&start.position) || !world.point_free(&goal.position) {
        return Err(HandoverError::PlanFailure(
            "start or goal in collision".into(),
        ));
    }
    let positions = if world.segment_free(&start.position, &goal.position) {
        vec![start.position, goal.position]
    } else {
        let mut best: Option<Vec<Point3>> = None;
        for _ in 0..p.restarts.max(1) {
            if let Some(raw) = rrt_connect(&start.position, &goal.position, world, p, rng) {
                let path = shortcut(&raw, world);
                if best.as_ref().is_none_or(|b| length(&path) < length(b)) {
                    best = Some(path);
                }
            }
        }
        best.ok_or_else(|| {
            HandoverError::PlanFailure("no path within the iteration budget".into())
        })?
    };
    let total = length(&positions);
    let (qa, qb) = (
        UnitQuaternion::from_rotation_matrix(&start.orientation),
        UnitQuaternion::from_rotation_matrix(&goal.orientation),
    );
    let mut run = 0.0;
    let mut out = Vec::with_capacity(positions.len());
    for (i, pos) in positions.iter().enumerate() {
        if i > 0 {
            run += (pos - positions[i - 1]).norm();
        }
        let t = if total > 0.0 { run / total } else { 1.0 };
        let q = qa
            .try_slerp(&qb, t, 1e-9)
            .unwrap_or(if t < 0.5 { qa } else { qb });
        out.push(Pose::new(*pos, q.to_rotation_matrix()));
    }
    if let Some(last) = out.last_mut() {
        *last = *goal;
    }
    if let Some(first) = out.first_mut() {
        *first = *start;
    }
    Ok(out)
}

/// Straight offset along a pose's local Z, used for pre-grasp standoffs.
pub fn standoff(pose: &Pose, distance: f64) -> Pose {
    Pose::new(pose.position - pose.z_axis() * distance, pose.orientation)
}

/// Minimum clearance over the swept samples of a path.
pub fn path_clearance(path: &[Pose], world: &World) -> f64 {
    let mut best = f64::INFINITY;
    for w in path.windows(2) {
        let (a, b) = (w[0].position, w[1].position);
        let n = ((b - a).norm() / CHECK_STEP).ceil().max(1.0) as usize;
        for i in 0..=n {
            best = best.min(world.clearance(&(a + (b - a) * (i as f64 / n as f64))));
        }
    }
    best
}
