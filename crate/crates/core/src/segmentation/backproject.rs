use super::{skeletonize, SegError};
use crate::geometry::{pca_principal_axis, DepthImage, Mask, Pixel, Point3, Polyline3D, Vec3};

/// Distance in pixels from `p` to the nearest unset pixel (or the border),
/// searched in growing square rings up to `max_r`.
fn distance_to_background(mask: &Mask, p: Pixel, max_r: usize) -> f64 {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let (px, py) = (p.x as isize, p.y as isize);
    let mut best = f64::INFINITY;
    for r in 1..=max_r as isize {
        if (r as f64 - 1.0) > best {
            break;
        }
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs() != r && dy.abs() != r {
                    continue;
                }
                let (x, y) = (px + dx, py + dy);
                let outside = x < 0 || y < 0 || x >= w || y >= h;
                if outside || !mask.values[(y * w + x) as usize] {
                    best = best.min(((dx * dx + dy * dy) as f64).sqrt());
                }
            }
        }
    }
    best.min(max_r as f64)
}

/// Tube radius from the medial distance of skeleton pixels, meters.
pub fn estimate_radius(mask: &Mask, pixels: &[Pixel]) -> f64 {
    if pixels.is_empty() {
        return 0.0;
    }
    let mut d: Vec<f64> = pixels
        .iter()
        .map(|&p| distance_to_background(mask, p, 64))
        .collect();
    d.sort_by(f64::total_cmp);
    let med = d[d.len() / 2];
    ((med - 0.5) * mask.pitch).max(0.0)
}

/// Back-project path pixels to tube centers `radius` below the observed
/// surface; pixels without depth are skipped.
pub fn path_to_points(path: &[Pixel], depth: &DepthImage, radius: f64) -> Vec<Point3> {
    path.iter()
        .filter_map(|p| depth.world_point(p.x, p.y))
        .map(|q| Point3::new(q.x, q.y, q.z - radius))
        .collect()
}

/// Re-fit a free path end. Thinning bends the end of a path toward a
/// corner of a straight cut and stops short of a rounded tip, so the end
/// points that sit closer to the mask edge than the medial distance are
/// dropped and the path is re-extended along the direction of the points
/// before them, up to one radius short of the mask boundary.
fn fit_end(points: &mut Vec<Point3>, mask: &Mask, radius: f64) {
    let horizontal = |a: &Point3, b: &Point3| (a - b).xy().norm();
    let medial = radius / mask.pitch + 0.5;
    let near_edge = |p: &Point3| {
        mask.world_to_pixel(p.x, p.y)
            .is_none_or(|px| distance_to_background(mask, px, 64) < 0.8 * medial)
    };
    let keep = points.len() - points.iter().rev().take_while(|p| near_edge(p)).count();
    if keep < 3 {
        return;
    }
    points.truncate(keep);
    let end = points[keep - 1];
    let Some(back) = points
        .iter()
        .rev()
        .find(|p| horizontal(p, &end) >= 2.0 * radius.max(mask.pitch))
    else {
        return;
    };
    let Some(d) = Vec3::new(end.x - back.x, end.y - back.y, 0.0).try_normalize(1e-12) else {
        return;
    };
    let step = 0.25 * mask.pitch;
    let limit = 64.0 * mask.pitch;
    let mut s = 0.0;
    while s < limit {
        let q = end + d * (s + step);
        match mask.world_to_pixel(q.x, q.y) {
            Some(px) if *mask.get(px.x, px.y) => s += step,
            _ => break,
        }
    }
    let target = s + 0.5 * step - radius;
    if target > 0.0 {
        let k = (target / mask.pitch).ceil() as usize;
        for i in 1..=k {
            points.push(end + d * (target * i as f64 / k as f64));
        }
    } else {
        while points.len() > 2 && horizontal(&end, &points[points.len() - 2]) <= -target {
            points.pop();
        }
    }
}

/// Raw 3D point sequence of the DLO under `mask`.
///
/// Skeleton paths are oriented and chained by their projection on the
/// principal axis of all skeleton points, so gaps from occlusion or missing
/// depth stay in the sequence as jumps.
pub fn mask_to_raw_shape(
    mask: &Mask,
    depth: &DepthImage,
    prune_min: usize,
) -> Result<Polyline3D, SegError> {
    if !mask.same_shape(depth) {
        return Err(crate::geometry::GeometryError::ShapeError {
            a: mask.dims(),
            b: depth.dims(),
        }
        .into());
    }
    let sk = skeletonize(mask, prune_min);
    let all: Vec<Pixel> = sk.paths.iter().flatten().copied().collect();
    let radius = estimate_radius(mask, &all);
    let mut pieces: Vec<Vec<Point3>> = sk
        .paths
        .iter()
        .map(|path| path_to_points(path, depth, radius))
        .filter(|pts| !pts.is_empty())
        .collect();
    let ends: Vec<Pixel> = sk
        .paths
        .iter()
        .flat_map(|p| [p[0], p[p.len() - 1]])
        .collect();
    let free = |p: Pixel, own: usize| {
        sk.paths
            .iter()
            .enumerate()
            .all(|(j, path)| j == own || path.iter().all(|q| !q.touches(&p) && *q != p))
    };
    if pieces.len() == sk.paths.len() {
        for (i, piece) in pieces.iter_mut().enumerate() {
            let (head, tail) = (ends[2 * i], ends[2 * i + 1]);
            if free(tail, i) {
                fit_end(piece, mask, radius);
            }
            if free(head, i) {
                piece.reverse();
                fit_end(piece, mask, radius);
                piece.reverse();
            }
        }
    }
    if pieces.is_empty() {
        return Err(SegError::NoDepthData);
    }
    if pieces.len() > 1 {
        let flat: Vec<Point3> = pieces.iter().flatten().copied().collect();
        if let Ok(axis) = pca_principal_axis(&flat) {
            let proj = |p: &Point3| p.coords.dot(&axis);
            for piece in pieces.iter_mut() {
                if proj(&piece[piece.len() - 1]) < proj(&piece[0]) {
                    piece.reverse();
                }
            }
            let mean =
                |piece: &Vec<Point3>| piece.iter().map(proj).sum::<f64>() / piece.len() as f64;
            pieces.sort_by(|a, b| mean(a).total_cmp(&mean(b)));
        }
    }
    let pts: Vec<Point3> = pieces.into_iter().flatten().collect();
    if pts.len() == 1 {
        return Ok(Polyline3D::new(vec![
            pts[0],
            pts[0] + crate::geometry::Vec3::new(1e-6, 0.0, 0.0),
        ])?);
    }
    Ok(Polyline3D::from_points_dedup(pts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{render_scene, BinDims, DloInstance, DloSpec, InstanceStatus, Scene};

    fn band_scene(y: f64) -> Scene {
        let mut s = Scene::empty(BinDims::default(), 0);
        s.instances.push(DloInstance {
            id: 0,
            spec: DloSpec::hv_cable(),
            centerline: Polyline3D::new(vec![
                Point3::new(0.1, y, 0.0055),
                Point3::new(0.5, y, 0.0055),
            ])
            .unwrap(),
            layer: 0,
            status: InstanceStatus::InPile,
        });
        s
    }

    fn mask_of(ids: &crate::geometry::GridImage<i32>, id: i32) -> Mask {
        let mut m = ids.blank_like(false);
        for (v, o) in m.values.iter_mut().zip(&ids.values) {
            *v = *o == id;
        }
        m
    }

    #[test]
    fn straight_band_is_collinear_and_centered() {
        let s = band_scene(0.2);
        let r = render_scene(&s, 0.001);
        let m = mask_of(&r.ids, 0);
        let shape = mask_to_raw_shape(&m, &r.depth, 10).unwrap();
        let truth = &s.instances[0].centerline;
        for p in shape.points() {
            assert!((p.y - 0.2).abs() <= 0.001);
            assert!(truth.distance_to(p) < 0.0055);
        }
        assert!(shape.arc_length() > 0.38);
    }

    #[test]
    fn no_data_stripe_leaves_a_gap() {
        let s = band_scene(0.2);
        let r = render_scene(&s, 0.001);
        let m = mask_of(&r.ids, 0);
        let mut depth = r.depth.clone();
        for y in 0..depth.height {
            for x in 0..depth.width {
                let (wx, _) = depth.pixel_center(x, y);
                if (0.3..0.32).contains(&wx) {
                    depth.set(x, y, 0.0);
                }
            }
        }
        let shape = mask_to_raw_shape(&m, &depth, 10).unwrap();
        assert!(shape.points().iter().all(|p| !(0.3..0.32).contains(&p.x)));
        let max_jump = shape
            .points()
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .fold(0.0, f64::max);
        assert!(max_jump > 0.019);
    }

    #[test]
    fn radius_from_medial_distance() {
        let s = band_scene(0.2);
        let r = render_scene(&s, 0.001);
        let m = mask_of(&r.ids, 0);
        let sk = skeletonize(&m, 10);
        let rad = estimate_radius(&m, &sk.paths.concat());
        assert!((rad - 0.0055).abs() <= 0.001, "radius {rad}");
    }

    #[test]
    fn missing_depth_everywhere_is_an_error() {
        let s = band_scene(0.2);
        let r = render_scene(&s, 0.001);
        let m = mask_of(&r.ids, 0);
        let depth = r.depth.blank_like(0.0);
        assert_eq!(
            mask_to_raw_shape(&m, &depth, 10),
            Err(SegError::NoDepthData)
        );
    }
}
