use dlo_core::geometry::{
    connected_components, dbscan, fit_polynomial, hausdorff, iou, pca_principal_axis, GridImage,
    Mask, Point3, Polyline3D, Pose, RigidTranslation, Vec3,
};
use dlo_core::io::{decode_depth_pgm, decode_mask_pgm, encode_depth_pgm, encode_mask_pgm};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Point3> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn polyline() -> impl Strategy<Value = Polyline3D> {
    prop::collection::vec(point(), 2..40)
        .prop_filter_map("coincident points", |p| Polyline3D::new(p).ok())
}

fn mask(w: usize, h: usize) -> impl Strategy<Value = Mask> {
    prop::collection::vec(any::<bool>(), w * h)
        .prop_map(move |v| GridImage::from_values(w, h, 0.001, Point3::origin(), v).unwrap())
}

proptest! {
    #[test]
    fn resampling_keeps_endpoints_and_length(line in polyline(), m in 2usize..200) {
        let r = line.resample_equidistant(m);
        prop_assert_eq!(r.len(), m);
        prop_assert!((r.first() - line.first()).norm() < 1e-9);
        prop_assert!((r.last() - line.last()).norm() < 1e-9);
        prop_assert!(r.arc_length() <= line.arc_length() + 1e-9);
        prop_assert!(hausdorff(&r, &line) <= line.arc_length() / (m - 1) as f64 + 1e-9);
    }

    #[test]
    fn nearest_point_lies_on_curve(line in polyline(), p in point()) {
        let (q, arc, d) = line.nearest(&p);
        prop_assert!((line.point_at_arc(arc) - q).norm() < 1e-9);
        prop_assert!(((p - q).norm() - d).abs() < 1e-12);
        for v in line.points() {
            prop_assert!(d <= (p - v).norm() + 1e-12);
        }
    }

    #[test]
    fn hausdorff_is_a_symmetric_pseudo_metric(a in polyline(), b in polyline()) {
        prop_assert!(hausdorff(&a, &a) < 1e-12);
        prop_assert!((hausdorff(&a, &b) - hausdorff(&b, &a)).abs() < 1e-12);
        prop_assert!(hausdorff(&a, &b) >= 0.0);
    }

    #[test]
    fn translation_moves_hausdorff_by_at_most_its_length(a in polyline(), d in point()) {
        let t = RigidTranslation::new(d.coords);
        let moved = a.map_points(|p| t.apply(p));
        prop_assert!(hausdorff(&a, &moved) <= d.coords.norm() + 1e-12);
        prop_assert!((moved.arc_length() - a.arc_length()).abs() < 1e-9);
    }

    #[test]
    fn pose_round_trips_points(yaw in -3.2..3.2f64, o in point(), p in point()) {
        let pose = Pose::from_yaw(o, yaw);
        prop_assert!(pose.orthonormality_error() < 1e-12);
        let back = pose.to_world(&pose.to_local(&p));
        prop_assert!((back - p).norm() < 1e-12);
    }

    #[test]
    fn iou_bounds_and_symmetry(a in mask(12, 9), b in mask(12, 9)) {
        let ab = iou(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, iou(&b, &a).unwrap());
        if !a.is_empty_mask() {
            prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
        }
    }

    #[test]
    fn components_partition_the_mask(m in mask(16, 16)) {
        let (labels, sizes) = connected_components(&m);
        prop_assert_eq!(sizes.iter().sum::<usize>(), m.count());
        for (i, &l) in labels.iter().enumerate() {
            prop_assert_eq!(l != 0, m.values[i]);
            if l != 0 {
                let p = m.pixel_of(i);
                for n in m.neighbors8(p) {
                    let j = m.index(n.x, n.y);
                    prop_assert!(!m.values[j] || labels[j] == l);
                }
            }
        }
    }

    #[test]
    fn mask_pgm_round_trip(m in mask(7, 5)) {
        prop_assert_eq!(decode_mask_pgm(&encode_mask_pgm(&m)).unwrap(), m);
    }

    #[test]
    fn depth_pgm_round_trip_to_a_millimeter(v in prop::collection::vec(0.0..2.0f64, 6 * 4)) {
        let img = GridImage::from_values(6, 4, 0.002, Point3::new(0.1, -0.2, 1.0), v).unwrap();
        let back = decode_depth_pgm(&encode_depth_pgm(&img)).unwrap();
        prop_assert_eq!(back.dims(), img.dims());
        prop_assert_eq!(back.pitch, img.pitch);
        for (a, b) in img.values.iter().zip(&back.values) {
            prop_assert!((a - b).abs() <= 0.0005 + 1e-12);
        }
    }

    #[test]
    fn dbscan_clusters_are_disjoint_and_sorted(
        pts in prop::collection::vec(point(), 0..120),
        eps in 0.05..0.5f64,
        min_pts in 1usize..6,
    ) {
        let d = dbscan(&pts, eps, min_pts);
        let mut seen = vec![false; pts.len()];
        for c in &d.clusters {
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            for &i in c {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        for &i in &d.noise {
            prop_assert!(!seen[i]);
            seen[i] = true;
        }
        prop_assert!(seen.iter().all(|&s| s));
        prop_assert!(d.clusters.windows(2).all(|w| w[0].len() >= w[1].len()));
    }
}

#[test]
fn polyline_rejects_degenerate_input() {
    assert!(Polyline3D::new(vec![Point3::origin()]).is_err());
    assert!(Polyline3D::new(vec![Point3::origin(), Point3::origin()]).is_err());
    assert!(Polyline3D::new(vec![Point3::origin(), Point3::new(f64::NAN, 0.0, 0.0)]).is_err());
    let p = Polyline3D::from_points_dedup(vec![
        Point3::origin(),
        Point3::origin(),
        Point3::new(1.0, 0.0, 0.0),
    ])
    .unwrap();
    assert_eq!(p.len(), 2);
}

#[test]
fn pca_recovers_line_direction() {
    let dir = Vec3::new(1.0, 2.0, -0.5).normalize();
    let pts: Vec<Point3> = (0..50)
        .map(|i| Point3::origin() + dir * (i as f64 * 0.01))
        .collect();
    let a = pca_principal_axis(&pts).unwrap();
    assert!(a.dot(&dir).abs() > 1.0 - 1e-9);
    assert!(pca_principal_axis(&pts[..1]).is_err());
}

#[test]
fn polynomial_fit_is_exact_on_a_cubic() {
    let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
    let y: Vec<f64> = t
        .iter()
        .map(|t| 0.5 - t + 2.0 * t * t - 0.3 * t * t * t)
        .collect();
    let f = fit_polynomial(&t, &y, 3).unwrap();
    assert_eq!(f.degree(), 3);
    for (t, y) in t.iter().zip(&y) {
        assert!((f.eval(*t) - y).abs() < 1e-9);
    }
    // three samples only support a quadratic
    assert_eq!(fit_polynomial(&t[..3], &y[..3], 3).unwrap().degree(), 2);
    assert!(fit_polynomial(&[], &[], 3).is_err());
}
