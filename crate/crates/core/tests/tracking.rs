use dlo_core::geometry::{hausdorff, Point3, Polyline3D, Pose, Vec3};
use dlo_core::rng::seeded;
use dlo_core::sim::{HeldDlo, HeldParams, SensorNoise};
use dlo_core::tracking::{
    correct, grasp_center, in_hand_vector, match_missing_center, reconstruct, track_frame,
    TrackParams,
};
use proptest::prelude::*;

/// Gently curved line sampled every millimeter with one hole in it.
fn holed(amp: f64, gap_at: f64, gap_len: f64) -> Polyline3D {
    let pts: Vec<Point3> = (0..=600)
        .map(|i| i as f64 * 0.001)
        .filter(|x| !(gap_at..gap_at + gap_len).contains(x))
        .map(|x| Point3::new(x, amp * (x * 4.0).sin(), 0.3))
        .collect();
    Polyline3D::new(pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correction_lands_on_the_measured_center(
        amp in 0.0..0.05f64,
        gap_at in 0.1..0.45f64,
        gap_len in 0.02..0.06f64,
        (dx, dy, dz) in (-0.03..0.03f64, -0.03..0.03f64, -0.03..0.03f64),
    ) {
        let raw = holed(amp, gap_at, gap_len);
        let rec = reconstruct(&raw, &TrackParams::default()).unwrap();
        prop_assert_eq!(rec.clusters.len(), 2);
        prop_assert_eq!(rec.bridges.len(), 1);
        let p_c = rec.bridges[0].midpoint() + Vec3::new(dx, dy, dz);
        let c = correct(&rec, &p_c).unwrap();
        prop_assert!(c.corrected);
        prop_assert!((match_missing_center(&c, &p_c).unwrap() - p_c).norm() < 1e-12);
        prop_assert!((c.correction.magnitude() - (dx * dx + dy * dy + dz * dz).sqrt()).abs() < 1e-12);
        prop_assert!((c.shape.arc_length() - rec.shape.arc_length()).abs() < 1e-9);
        // correcting twice is a no-op
        let again = correct(&c, &p_c).unwrap();
        prop_assert!(hausdorff(&again.shape, &c.shape) < 1e-12);
    }

    #[test]
    fn bridge_closes_the_gap_near_the_truth(amp in 0.0..0.05f64, gap_at in 0.1..0.45f64, gap_len in 0.02..0.05f64) {
        let truth = holed(amp, 1.0, 0.0);
        let rec = reconstruct(&holed(amp, gap_at, gap_len), &TrackParams::default()).unwrap();
        prop_assert!(hausdorff(&rec.shape, &truth) < 0.002);
    }
}

#[test]
fn empty_or_sparse_input_loses_track() {
    let raw =
        Polyline3D::new(vec![Point3::new(0.0, 0.0, 0.3), Point3::new(0.5, 0.0, 0.3)]).unwrap();
    assert!(reconstruct(&raw, &TrackParams::default()).is_err());
}

#[test]
fn grasp_center_applies_the_tcp_rotation() {
    let tcp = Pose::from_yaw(Point3::new(0.1, 0.2, 0.3), std::f64::consts::FRAC_PI_2);
    let c = grasp_center(&tcp, &in_hand_vector([0.004, -0.002]));
    assert!((c - Point3::new(0.1, 0.204, 0.298)).norm() < 1e-12);
}

#[test]
fn zero_noise_held_dlo_is_reconstructed_within_two_millimeters() {
    let hp = HeldParams::default();
    let p = TrackParams::for_diameter(hp.spec.diameter);
    for seed in 0..10 {
        let mut rng = seeded(seed);
        let held = HeldDlo::generate(&hp, [0.0, 0.003], &mut rng).unwrap();
        let view = held.observe(&hp, &SensorNoise::zero(), &mut rng);
        let f = &view.frame;
        let rec = track_frame(&f.depth, &f.mask, &f.tcp, f.vitac, &p).unwrap();
        assert!(rec.corrected);
        let h = hausdorff(&rec.shape, &held.centerline);
        assert!(h < 0.002, "seed {seed}: {h}");
        let uncorrected = track_frame(&f.depth, &f.mask, &f.tcp, None, &p).unwrap();
        assert!(!uncorrected.corrected);
    }
}
