use dlo_core::geometry::{Point3, Polyline3D, Pose};
use dlo_core::handover::{Obstacle, World};
use dlo_core::mounting::{
    execute_mount, insertion_probability, plan_mount, residual_world, Fixture, MountFailure,
    MountParams,
};
use dlo_core::rng::seeded;
use dlo_core::sim::SensorNoise;
use proptest::prelude::*;

fn line(len: f64) -> Polyline3D {
    Polyline3D::new(vec![Point3::new(0.0, 0.0, 0.3), Point3::new(len, 0.0, 0.3)])
        .unwrap()
        .resample_pitch(0.005)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn segments_are_inside_the_dlo_or_missing(len in 0.2..1.2f64, hold in 0.0..1.0f64, seed in 0u64..100) {
        let s = line(len);
        let s_hold = hold * len;
        let p = MountParams::default();
        let plan = plan_mount(&s, s_hold, 0.0095, &Fixture::default_rig(), &World::empty(), &p, &mut seeded(seed)).unwrap();
        prop_assert_eq!(plan.fixtures.len(), 3);
        for (k, fp) in plan.fixtures.iter().enumerate() {
            match fp.segment {
                Some((lo, hi)) => {
                    prop_assert!(lo >= 0.0 && hi <= len);
                    prop_assert!((hi - lo - 2.0 * p.cograsp_half).abs() < 1e-12);
                    prop_assert!((((lo + hi) / 2.0) - s_hold).abs() - p.segment_step * k as f64 <= 1e-9);
                }
                None => {
                    let c = s_hold + if len - s_hold >= s_hold { 1.0 } else { -1.0 } * p.segment_step * k as f64;
                    prop_assert!(c - p.cograsp_half < 0.0 || c + p.cograsp_half > len);
                }
            }
            prop_assert!((fp.target_b.position - fp.target_a.position).norm() - 2.0 * p.cograsp_half < 1e-12);
        }
        let report = execute_mount(&plan, &World::empty(), &SensorNoise::zero(), &mut seeded(seed));
        for (fp, o) in plan.fixtures.iter().zip(&report.fixtures) {
            prop_assert_eq!(o.success, fp.segment.is_some());
            if !o.success {
                prop_assert_eq!(o.failure, Some(MountFailure::FixtureMiss));
            }
        }
    }

    #[test]
    fn probability_is_monotone(tol in 0.0005..0.01f64, sigma in 0.0005..0.01f64) {
        let p = insertion_probability(tol, sigma);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(insertion_probability(tol * 1.1, sigma) >= p);
        prop_assert!(insertion_probability(tol, sigma * 1.1) <= p);
    }
}

#[test]
fn residual_is_perpendicular_to_the_clip_axis() {
    let f = Fixture::default_rig()[1];
    let v = residual_world(&f, [0.002, -0.001]);
    assert!(v.dot(&f.pose.x_axis()).abs() < 1e-15);
    assert!((v.norm() - 0.002f64.hypot(0.001)).abs() < 1e-15);
}

#[test]
fn undersized_slots_and_blocked_clips_are_rejected() {
    let s = line(0.6);
    let mut narrow = Fixture::default_rig();
    narrow[0].slot_width = 0.005;
    let r = plan_mount(
        &s,
        0.1,
        0.0095,
        &narrow,
        &World::empty(),
        &MountParams::default(),
        &mut seeded(0),
    );
    assert!(r.is_err());

    let f = Fixture {
        id: 7,
        pose: Pose::identity_at(Point3::new(0.6, 0.0, 0.1)),
        slot_width: 0.01,
        tolerance: 0.003,
    };
    let caged = World {
        obstacles: vec![Obstacle::Sphere {
            center: [0.6, 0.0, 0.1],
            radius: 0.05,
        }],
        ..World::empty()
    };
    let r = plan_mount(
        &s,
        0.1,
        0.0095,
        &[f],
        &caged,
        &MountParams::default(),
        &mut seeded(0),
    );
    assert!(r.is_err());
}

#[test]
fn earlier_outcomes_are_independent_of_later_fixtures() {
    let s = line(0.8);
    let rig = Fixture::default_rig();
    let noise = SensorNoise {
        mount_exec_sigma: 0.003,
        ..SensorNoise::zero()
    };
    let p = MountParams::default();
    let full = plan_mount(&s, 0.1, 0.0095, &rig, &World::empty(), &p, &mut seeded(4)).unwrap();
    let first = plan_mount(
        &s,
        0.1,
        0.0095,
        &rig[..1],
        &World::empty(),
        &p,
        &mut seeded(4),
    )
    .unwrap();
    let a = execute_mount(&full, &World::empty(), &noise, &mut seeded(5));
    let b = execute_mount(&first, &World::empty(), &noise, &mut seeded(5));
    assert_eq!(a.fixtures[0], b.fixtures[0]);
}
