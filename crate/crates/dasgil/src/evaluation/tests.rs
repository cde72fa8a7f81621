use proptest::prelude::*;

use crate::data::Pose;

use super::*;

fn yaw_pose(x: f64, y: f64, z: f64, yaw_deg: f64) -> Pose {
    let half = yaw_deg.to_radians() / 2.0;
    Pose {
        x,
        y,
        z,
        qw: half.cos(),
        qx: 0.0,
        qy: 0.0,
        qz: half.sin(),
    }
}

#[test]
fn pose_error_identity_is_zero() {
    let p = yaw_pose(1.0, 2.0, 3.0, 25.0);
    let e = pose_error(&p, &p).unwrap();
    assert_eq!(e.translation_m, 0.0);
    assert!(e.rotation_deg.abs() < 1e-6);
}

#[test]
fn pose_error_pythagorean_translation() {
    let a = Pose::at(0.0, 0.0, 0.0);
    let b = Pose::at(3.0, 4.0, 0.0);
    let e = pose_error(&a, &b).unwrap();
    assert!((e.translation_m - 5.0).abs() < 1e-12);
    assert!(e.rotation_deg.abs() < 1e-6);
}

#[test]
fn pose_error_quarter_turn() {
    let a = Pose::at(0.0, 0.0, 0.0);
    let b = yaw_pose(0.0, 0.0, 0.0, 90.0);
    let e = pose_error(&a, &b).unwrap();
    assert!((e.rotation_deg - 90.0).abs() < 1e-6, "{}", e.rotation_deg);
}

#[test]
fn pose_error_is_symmetric() {
    let a = yaw_pose(0.5, -1.0, 2.0, 10.0);
    let b = yaw_pose(-0.5, 3.0, 1.0, 70.0);
    let ab = pose_error(&a, &b).unwrap();
    let ba = pose_error(&b, &a).unwrap();
    assert_eq!(ab.translation_m, ba.translation_m);
    assert_eq!(ab.rotation_deg, ba.rotation_deg);
}

#[test]
fn pose_error_rejects_non_unit_quaternion() {
    let mut a = Pose::at(0.0, 0.0, 0.0);
    a.qw = 1.2;
    let b = Pose::at(0.0, 0.0, 0.0);
    assert!(matches!(
        pose_error(&a, &b),
        Err(EvalError::NonUnitQuaternion { .. })
    ));
}

#[test]
fn buckets_hand_cases() {
    let single = vec![PoseError {
        translation_m: 0.1,
        rotation_deg: 1.0,
    }];
    let b = precision_buckets(&single).unwrap();
    assert_eq!((b.high, b.medium, b.coarse), (100.0, 100.0, 100.0));

    let errors = vec![
        PoseError { translation_m: 0.1, rotation_deg: 1.0 },
        PoseError { translation_m: 1.0, rotation_deg: 3.0 },
        PoseError { translation_m: 10.0, rotation_deg: 1.0 },
        PoseError { translation_m: 0.3, rotation_deg: 4.0 },
    ];
    let b = precision_buckets(&errors).unwrap();
    assert_eq!((b.high, b.medium, b.coarse), (25.0, 50.0, 75.0));

    // fails high on angle alone, passes medium
    let edge = vec![PoseError { translation_m: 0.2, rotation_deg: 3.0 }];
    let b = precision_buckets(&edge).unwrap();
    assert_eq!((b.high, b.medium, b.coarse), (0.0, 100.0, 100.0));
}

#[test]
fn buckets_reject_empty() {
    assert!(matches!(
        precision_buckets(&[]),
        Err(EvalError::EmptyQuerySet)
    ));
}

#[test]
fn recall_hand_cases() {
    let q = RankedQuery {
        gt_position: [0.0, 0.0, 0.0],
        candidate_positions: vec![[30.0, 0.0, 0.0], [24.0, 0.0, 0.0]],
    };
    let curve = recall_at_n(&[q.clone()], &[1, 2], 25.0).unwrap();
    assert_eq!(curve, vec![(1, 0.0), (2, 1.0)]);

    let near = RankedQuery {
        gt_position: [0.0, 0.0, 0.0],
        candidate_positions: vec![[10.0, 0.0, 0.0]],
    };
    let curve = recall_at_n(&[near], &[1, 2, 5], 25.0).unwrap();
    assert!(curve.iter().all(|&(_, r)| r == 1.0));
}

#[test]
fn top1_hand_cases() {
    let thresholds = default_top1_thresholds();
    assert_eq!(thresholds, vec![15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0]);
    let q12 = RankedQuery {
        gt_position: [0.0, 0.0, 0.0],
        candidate_positions: vec![[12.0, 0.0, 0.0]],
    };
    let curve = top1_recall_at_d(&[q12], &thresholds).unwrap();
    assert!(curve.iter().all(|&(_, r)| r == 1.0));

    let q27 = RankedQuery {
        gt_position: [0.0, 0.0, 0.0],
        candidate_positions: vec![[27.0, 0.0, 0.0]],
    };
    let curve = top1_recall_at_d(&[q27], &thresholds).unwrap();
    for (d, r) in curve {
        assert_eq!(r, if d >= 30.0 { 1.0 } else { 0.0 }, "at D = {d}");
    }
}

fn demo_report() -> EvalReport {
    EvalReport::new(
        PrecisionBuckets {
            high: 10.0,
            medium: 30.0,
            coarse: 80.0,
        },
        vec![(1, 0.4), (5, 0.7), (10, 0.9)],
        vec![(15.0, 0.3), (20.0, 0.5), (25.0, 0.5)],
        ReportMeta {
            checkpoint_digest: "ab".into(),
            metric: "l1".into(),
            layers: vec![5, 6],
            dataset_digest: "cd".into(),
            extra: Default::default(),
        },
    )
}

#[test]
fn report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let report = demo_report();
    emit_report(&report, &path, false).unwrap();
    let back = read_report(&path).unwrap();
    assert_eq!(back, report);
    // schema spot-checks
    let raw: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert!(raw["buckets"]["high"].is_number());
    assert_eq!(raw["recall_at_n"][0]["n"], 1);
    assert!(raw["top1_recall_at_d"][0]["d_m"].is_number());
    assert!(raw["meta"]["metric"].is_string());
}

#[test]
fn invalid_report_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let mut report = demo_report();
    report.buckets.high = 90.0; // above medium: not cumulative
    assert!(matches!(
        emit_report(&report, &path, false),
        Err(EvalError::InvalidReport(_))
    ));
    assert!(!path.exists(), "refused reports must not be written");
}

#[test]
fn plots_produce_exactly_two_images() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    emit_report(&demo_report(), &path, true).unwrap();
    let pngs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "png"))
        .collect();
    assert_eq!(pngs.len(), 2);
}

fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn rotate_vec(q: [f64; 4], v: [f64; 3]) -> [f64; 3] {
    let p = [0.0, v[0], v[1], v[2]];
    let conj = [q[0], -q[1], -q[2], -q[3]];
    let r = quat_mul(quat_mul(q, p), conj);
    [r[1], r[2], r[3]]
}

proptest! {
    #[test]
    fn recall_curves_are_monotone(
        seedling in 0u64..10_000,
        nq in 1usize..12,
    ) {
        let mut rng = crate::data::derived_rng(seedling, "geom", 0);
        use rand::Rng;
        let queries: Vec<RankedQuery> = (0..nq)
            .map(|_| RankedQuery {
                gt_position: [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), 0.0],
                candidate_positions: (0..8)
                    .map(|_| {
                        [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), 0.0]
                    })
                    .collect(),
            })
            .collect();
        let ns = [1usize, 2, 4, 8];
        let curve = recall_at_n(&queries, &ns, 20.0).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].1 >= w[0].1);
        }
        let thresholds = default_top1_thresholds();
        let top1 = top1_recall_at_d(&queries, &thresholds).unwrap();
        for w in top1.windows(2) {
            prop_assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn recall_curves_invariant_under_rigid_motion(
        seedling in 0u64..5_000,
        tx in -30.0f64..30.0,
        ty in -30.0f64..30.0,
        rig_yaw in 0.0f64..360.0,
    ) {
        let mut rng = crate::data::derived_rng(seedling, "rigid", 0);
        use rand::Rng;
        let queries: Vec<RankedQuery> = (0..6)
            .map(|_| RankedQuery {
                gt_position: [rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0), 0.0],
                candidate_positions: (0..6)
                    .map(|_| [rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0), 0.0])
                    .collect(),
            })
            .collect();
        let half = rig_yaw.to_radians() / 2.0;
        let rig = [half.cos(), 0.0, 0.0, half.sin()];
        let move_point = |p: &[f64; 3]| {
            let r = rotate_vec(rig, *p);
            [r[0] + tx, r[1] + ty, r[2]]
        };
        let moved: Vec<RankedQuery> = queries
            .iter()
            .map(|q| RankedQuery {
                gt_position: move_point(&q.gt_position),
                candidate_positions: q.candidate_positions.iter().map(&move_point).collect(),
            })
            .collect();
        let ns = [1usize, 3, 6];
        let base = recall_at_n(&queries, &ns, 18.0).unwrap();
        let after = recall_at_n(&moved, &ns, 18.0).unwrap();
        prop_assert_eq!(base, after);
        let ds = [10.0, 25.0, 40.0];
        let base = top1_recall_at_d(&queries, &ds).unwrap();
        let after = top1_recall_at_d(&moved, &ds).unwrap();
        prop_assert_eq!(base, after);
    }

    #[test]
    fn pose_error_invariant_under_rigid_motion(
        ax in -5.0f64..5.0, ay in -5.0f64..5.0,
        bx in -5.0f64..5.0, by in -5.0f64..5.0,
        yaw_a in 0.0f64..180.0, yaw_b in 0.0f64..180.0,
        tx in -10.0f64..10.0, ty in -10.0f64..10.0,
        rig_yaw in 0.0f64..360.0,
    ) {
        let a = yaw_pose(ax, ay, 0.0, yaw_a);
        let b = yaw_pose(bx, by, 0.0, yaw_b);
        let base = pose_error(&a, &b).unwrap();
        let half = rig_yaw.to_radians() / 2.0;
        let rig = [half.cos(), 0.0, 0.0, half.sin()];
        let transform = |p: &Pose| {
            let pos = rotate_vec(rig, [p.x, p.y, p.z]);
            let q = quat_mul(rig, [p.qw, p.qx, p.qy, p.qz]);
            Pose { x: pos[0] + tx, y: pos[1] + ty, z: pos[2], qw: q[0], qx: q[1], qy: q[2], qz: q[3] }
        };
        let moved = pose_error(&transform(&a), &transform(&b)).unwrap();
        prop_assert!((base.translation_m - moved.translation_m).abs() < 1e-9);
        prop_assert!((base.rotation_deg - moved.rotation_deg).abs() < 1e-7);
    }
}
