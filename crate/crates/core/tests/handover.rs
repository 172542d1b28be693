use dlo_core::geometry::{Point3, Polyline3D, Pose};
use dlo_core::handover::{
    correction_loop, path_clearance, plan_path, run_handover, second_grasp_pose, standoff,
    HandoverFailure, HandoverParams, Obstacle, PlannerParams, SecondArm, World,
};
use dlo_core::rng::seeded;
use dlo_core::sim::SensorNoise;
use proptest::prelude::*;

fn straight(len: f64) -> Polyline3D {
    Polyline3D::new(vec![Point3::new(0.0, 0.0, 0.3), Point3::new(len, 0.0, 0.3)])
        .unwrap()
        .resample_pitch(0.005)
}

fn wall_world() -> World {
    World {
        obstacles: vec![Obstacle::Box {
            min: [-0.2, -0.35, 0.0],
            max: [0.6, -0.3, 1.0],
        }],
        ..World::empty()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn second_grasp_is_l_g_along_the_longer_side(a in 0.02..0.58f64, l_g in 0.01..0.25f64) {
        let s = straight(0.6);
        let p_first = s.point_at_arc(a);
        match second_grasp_pose(&s, &p_first, l_g) {
            Ok(pose) => {
                let (_, arc, d) = s.nearest(&pose.position);
                prop_assert!(d < 1e-9);
                prop_assert!(((arc - a).abs() - l_g).abs() < 1e-9);
                prop_assert!((arc - 0.3).abs() <= (a - 0.3).abs() + l_g + 1e-9);
                prop_assert!(pose.orthonormality_error() < 1e-9);
                prop_assert!(pose.x_axis().x.abs() > 1.0 - 1e-9);
            }
            Err(_) => prop_assert!(l_g > a.max(0.6 - a) - 1e-9),
        }
    }

    #[test]
    fn planned_paths_are_collision_free(seed in 0u64..1000, gx in 0.0..0.5f64, gy in -0.2..0.2f64) {
        let world = wall_world();
        let start = Pose::identity_at(Point3::new(0.0, -0.6, 0.5));
        let goal = Pose::identity_at(Point3::new(gx, gy, 0.4));
        let path = plan_path(&start, &goal, &world, &PlannerParams::default(), &mut seeded(seed)).unwrap();
        prop_assert_eq!(path[0].position, start.position);
        prop_assert!((path[path.len() - 1].position - goal.position).norm() < 1e-9);
        prop_assert!(world.path_free(&path));
        prop_assert!(path_clearance(&path, &world) >= 0.0);
    }

    #[test]
    fn loop_never_ends_worse_than_its_tolerance_on_success(seed in 0u64..500) {
        let s = straight(0.6);
        let arm = SecondArm::new(s.clone(), 0.0095, SensorNoise::default());
        let p = HandoverParams::default();
        let target = second_grasp_pose(&s, &s.point_at_arc(0.5), p.l_g).unwrap();
        let r = correction_loop(&arm, &target, &p, &mut seeded(seed)).unwrap();
        prop_assert!(r.attempts.len() <= 1 + p.max_retries as usize);
        if r.success {
            prop_assert!(r.final_gap().unwrap() <= p.success_gap);
            prop_assert!(r.failure.is_none());
        } else {
            prop_assert!(r.failure.is_some());
        }
    }
}

#[test]
fn correction_off_makes_a_single_attempt() {
    let s = straight(0.6);
    let arm = SecondArm::new(s.clone(), 0.0095, SensorNoise::default());
    let p = HandoverParams {
        correction: false,
        ..HandoverParams::default()
    };
    let target = second_grasp_pose(&s, &s.point_at_arc(0.5), p.l_g).unwrap();
    for seed in 0..50 {
        let r = correction_loop(&arm, &target, &p, &mut seeded(seed)).unwrap();
        assert_eq!(r.attempts.len(), 1);
        assert!(!r.correction);
    }
}

#[test]
fn exact_motion_hands_over_first_try() {
    let s = straight(0.6);
    let arm = SecondArm::new(s.clone(), 0.0095, SensorNoise::zero());
    let r = run_handover(
        &arm,
        &s,
        &s.point_at_arc(0.5),
        &World::empty(),
        &HandoverParams::default(),
        &mut seeded(1),
    )
    .unwrap();
    assert!(r.success && r.transferred);
    assert_eq!(r.attempts.len(), 1);
    assert!(r.first_gap().unwrap() < 1e-12);
}

#[test]
fn impossible_offsets_and_blocked_targets_fail_cleanly() {
    let s = straight(0.3);
    let arm = SecondArm::new(s.clone(), 0.0095, SensorNoise::zero());
    let long = HandoverParams {
        l_g: 0.5,
        ..HandoverParams::default()
    };
    let r = run_handover(
        &arm,
        &s,
        &s.point_at_arc(0.15),
        &World::empty(),
        &long,
        &mut seeded(2),
    )
    .unwrap();
    assert_eq!(r.failure, Some(HandoverFailure::OffsetTooLarge));

    let p = HandoverParams::default();
    let target = second_grasp_pose(&s, &s.point_at_arc(0.15), p.l_g).unwrap();
    let pre = standoff(&target, p.standoff);
    let blocked = World {
        obstacles: vec![Obstacle::Sphere {
            center: pre.position.into(),
            radius: 0.03,
        }],
        ..World::empty()
    };
    let r = run_handover(
        &arm,
        &s,
        &s.point_at_arc(0.15),
        &blocked,
        &p,
        &mut seeded(3),
    )
    .unwrap();
    assert_eq!(r.failure, Some(HandoverFailure::PlanFailure));
    assert!(!r.success);
}
