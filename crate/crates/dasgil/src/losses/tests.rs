use std::collections::BTreeMap;

use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;

use crate::tensor::{Tape, Var};

use super::*;

fn arr(shape: &[usize], data: Vec<f64>) -> ArrayD<f64> {
    ArrayD::from_shape_vec(IxDyn(shape), data).unwrap()
}

fn vec_leaf(tape: &mut Tape<f64>, data: Vec<f64>) -> Var {
    let len = data.len();
    tape.leaf(arr(&[len], data))
}

#[test]
fn depth_identity_is_zero() {
    let mut tape = Tape::new();
    let gt = DepthTarget::dense(arr(&[1, 1, 4, 4], (0..16).map(|v| v as f64 + 1.0).collect())).unwrap();
    let pred_full = tape.constant(gt.depth.clone());
    let half = resize_depth_valid(&gt, 2, false);
    let pred_half = tape.constant(half.depth.clone());
    let preds = BTreeMap::from([(0usize, pred_full), (1, pred_half)]);
    let loss = depth_loss(&mut tape, &preds, &gt, false).unwrap();
    assert_eq!(tape.scalar(loss), 0.0);
}

#[test]
fn depth_constant_offset_sums_over_layers() {
    // four layers, predictions offset by +delta everywhere -> 4 * delta
    let delta = 0.3125f64;
    let mut tape = Tape::new();
    let gt = DepthTarget::dense(arr(
        &[1, 1, 8, 8],
        (0..64).map(|v| (v % 7) as f64 + 2.0).collect(),
    ))
    .unwrap();
    let mut preds = BTreeMap::new();
    for (i, f) in [1usize, 2, 4, 8].iter().enumerate() {
        let resized = resize_depth_valid(&gt, *f, false);
        let shifted = resized.depth.mapv(|v| v + delta);
        preds.insert(i, tape.constant(shifted));
    }
    let loss = depth_loss(&mut tape, &preds, &gt, false).unwrap();
    assert_eq!(tape.scalar(loss), 4.0 * delta);
}

#[test]
fn depth_hand_case_two_by_two() {
    let mut tape = Tape::new();
    let gt = DepthTarget::dense(arr(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 8.0])).unwrap();
    let pred = tape.constant(arr(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]));
    let preds = BTreeMap::from([(1usize, pred)]);
    let loss = depth_loss(&mut tape, &preds, &gt, false).unwrap();
    assert_eq!(tape.scalar(loss), 1.0);
}

#[test]
fn depth_ignores_invalid_pixels() {
    let depth = arr(&[1, 1, 2, 2], vec![5.0, 5.0, 5.0, 99.0]);
    let valid = arr(&[1, 1, 2, 2], vec![1.0, 1.0, 1.0, 0.0]);
    let gt = DepthTarget::new(depth, valid).unwrap();
    let eval = |corner: f64| {
        let mut tape = Tape::new();
        let pred = tape.constant(arr(&[1, 1, 2, 2], vec![6.0, 6.0, 6.0, corner]));
        let preds = BTreeMap::from([(1usize, pred)]);
        let loss = depth_loss(&mut tape, &preds, &gt, false).unwrap();
        tape.scalar(loss)
    };
    assert_eq!(eval(0.0), eval(1234.5));
    assert_eq!(eval(0.0), 1.0);
}

#[test]
fn depth_all_invalid_is_an_error() {
    let depth = arr(&[1, 1, 2, 2], vec![1.0; 4]);
    let valid = arr(&[1, 1, 2, 2], vec![0.0; 4]);
    let gt = DepthTarget::new(depth, valid).unwrap();
    let mut tape = Tape::new();
    let pred = tape.constant(arr(&[1, 1, 2, 2], vec![0.0; 4]));
    let preds = BTreeMap::from([(1usize, pred)]);
    assert!(matches!(
        depth_loss(&mut tape, &preds, &gt, false),
        Err(LossError::NoValidPixels)
    ));
}

#[test]
fn resize_averages_valid_pixels_only() {
    let depth = arr(&[1, 1, 2, 2], vec![2.0, 4.0, 10.0, 6.0]);
    let valid = arr(&[1, 1, 2, 2], vec![1.0, 1.0, 0.0, 1.0]);
    let gt = DepthTarget::new(depth, valid).unwrap();
    let area = resize_depth_valid(&gt, 2, false);
    assert_eq!(area.depth[[0, 0, 0, 0]], 4.0);
    assert_eq!(area.valid[[0, 0, 0, 0]], 1.0);
    let nn = resize_depth_valid(&gt, 2, true);
    assert_eq!(nn.depth[[0, 0, 0, 0]], 2.0);
}

#[test]
fn seg_confident_scores_vanish() {
    let mut tape = Tape::new();
    // +20 on the ground-truth channel per pixel
    let mut scores = ArrayD::<f64>::zeros(IxDyn(&[1, 3, 2, 2]));
    let classes = vec![0usize, 2, 1, 0];
    for (pix, &c) in classes.iter().enumerate() {
        let (i, j) = (pix / 2, pix % 2);
        scores[[0, c, i, j]] = 20.0;
    }
    let sv = tape.constant(scores);
    let loss = seg_loss(&mut tape, sv, &classes).unwrap();
    assert!(tape.scalar(loss) < 1e-6);
}

#[test]
fn seg_uniform_scores_hit_log_class_count() {
    let mut tape = Tape::new();
    let sv = tape.constant(ArrayD::<f64>::zeros(IxDyn(&[1, 4, 2, 2])));
    let loss = seg_loss(&mut tape, sv, &[0, 1, 2, 3]).unwrap();
    assert_eq!(tape.scalar(loss), 4.0f64.ln());
}

#[test]
fn seg_two_class_hand_case() {
    let mut tape = Tape::new();
    let sv = tape.constant(arr(&[1, 2, 1, 1], vec![0.0, 3.0f64.ln()]));
    let loss = seg_loss(&mut tape, sv, &[0]).unwrap();
    assert!((tape.scalar(loss) - 4.0f64.ln()).abs() < 1e-12);
}

#[test]
fn seg_rejects_out_of_range_class() {
    let mut tape = Tape::new();
    let sv = tape.constant(ArrayD::<f64>::zeros(IxDyn(&[1, 2, 1, 1])));
    assert!(matches!(
        seg_loss(&mut tape, sv, &[2]),
        Err(LossError::ClassOutOfRange { class: 2, count: 2 })
    ));
}

#[test]
fn dis_loss_hand_cases() {
    let eval = |v: Vec<f64>, r: Vec<f64>| {
        let mut tape = Tape::new();
        let dv = vec_leaf(&mut tape, v);
        let dr = vec_leaf(&mut tape, r);
        let loss = dis_loss(&mut tape, dv, dr).unwrap();
        tape.scalar(loss)
    };
    assert_eq!(eval(vec![0.0, 0.0], vec![1.0, 1.0]), 0.0);
    assert_eq!(eval(vec![0.5], vec![0.5]), 0.25);
    assert_eq!(eval(vec![1.0], vec![0.0]), 1.0);
}

#[test]
fn dis_loss_rejects_empty_batch() {
    let mut tape = Tape::new();
    let dv = tape.constant(ArrayD::<f64>::zeros(IxDyn(&[0])));
    let dr = tape.constant(arr(&[1], vec![1.0]));
    assert!(matches!(
        dis_loss(&mut tape, dv, dr),
        Err(LossError::EmptyBatch)
    ));
}

#[test]
fn gen_loss_hand_cases() {
    let eval = |v: Vec<f64>| {
        let mut tape = Tape::new();
        let dv = vec_leaf(&mut tape, v);
        let loss = gen_loss(&mut tape, dv).unwrap();
        tape.scalar(loss)
    };
    assert_eq!(eval(vec![1.0, 1.0]), 0.0);
    assert_eq!(eval(vec![0.0]), 0.5);
    assert_eq!(eval(vec![0.0, 2.0]), 0.5);
}

#[test]
fn triplet_single_hand_cases() {
    let eval = |a: Vec<f64>, p: Vec<f64>, n: Vec<f64>, m: f64| {
        let mut tape = Tape::new();
        let av = vec_leaf(&mut tape, a);
        let pv = vec_leaf(&mut tape, p);
        let nv = vec_leaf(&mut tape, n);
        let loss = triplet_loss_single(&mut tape, av, pv, nv, m).unwrap();
        tape.scalar(loss)
    };
    // negative at distance zero: worst case regardless of positive
    assert_eq!(eval(vec![0.7, -0.2], vec![1.0, 0.5], vec![0.7, -0.2], 1.0), 1.0);
    // negative three margins away: hinge inactive
    assert_eq!(eval(vec![0.0, 0.0], vec![0.0, 0.0], vec![3.0, 0.0], 1.0), 0.0);
    // the worked ratio case
    assert_eq!(eval(vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0], 1.0), 0.5);
}

#[test]
fn triplet_single_rejects_mismatched_dims() {
    let mut tape = Tape::new();
    let a = vec_leaf(&mut tape, vec![0.0, 0.0]);
    let p = vec_leaf(&mut tape, vec![0.0, 0.0, 0.0]);
    let n = vec_leaf(&mut tape, vec![1.0, 0.0]);
    assert!(matches!(
        triplet_loss_single(&mut tape, a, p, n, 1.0),
        Err(LossError::DimensionMismatch(_))
    ));
}

fn pyramid_level(tape: &mut Tape<f64>, c: usize, h: usize, data: Vec<f64>) -> Var {
    tape.constant(arr(&[1, c, h, h], data))
}

#[test]
fn triplet_multi_identical_pyramids_count_layers() {
    let mut tape = Tape::new();
    let mk = |tape: &mut Tape<f64>| {
        vec![
            pyramid_level(tape, 1, 2, vec![0.5, -0.25, 1.0, 2.0]),
            pyramid_level(tape, 2, 1, vec![0.125, -1.5]),
        ]
    };
    let (a, p, n) = (mk(&mut tape), mk(&mut tape), mk(&mut tape));
    let weights = LossWeights::unit(&[1, 2]);
    let loss = triplet_loss_multi(&mut tape, &a, &p, &n, &[1, 2], &weights).unwrap();
    assert_eq!(tape.scalar(loss), 2.0);
}

#[test]
fn triplet_multi_single_layer_reduces_to_single() {
    let mut tape = Tape::new();
    let a = vec![pyramid_level(&mut tape, 1, 2, vec![0.0, 0.3, -0.7, 0.9])];
    let p = vec![pyramid_level(&mut tape, 1, 2, vec![0.2, 0.1, -0.6, 1.0])];
    let n = vec![pyramid_level(&mut tape, 1, 2, vec![2.0, -1.0, 0.4, 0.0])];
    let weights = LossWeights::unit(&[1]);
    let multi = triplet_loss_multi(&mut tape, &a, &p, &n, &[1], &weights).unwrap();
    let af = tape.flatten(a[0]);
    let pf = tape.flatten(p[0]);
    let nf = tape.flatten(n[0]);
    let single = triplet_loss_single(&mut tape, af, pf, nf, 1.0).unwrap();
    assert_eq!(tape.scalar(multi), tape.scalar(single));
}

#[test]
fn triplet_multi_sums_hand_values() {
    let mut tape = Tape::new();
    // layer 1 contributes 0.5 (distances 1 and 1), layer 2 contributes 0
    let a = vec![
        pyramid_level(&mut tape, 1, 2, vec![0.0; 4]),
        pyramid_level(&mut tape, 1, 1, vec![0.0]),
    ];
    let p = vec![
        pyramid_level(&mut tape, 1, 2, vec![1.0, 0.0, 0.0, 0.0]),
        pyramid_level(&mut tape, 1, 1, vec![0.0]),
    ];
    let n = vec![
        pyramid_level(&mut tape, 1, 2, vec![1.0, 0.0, 0.0, 0.0]),
        pyramid_level(&mut tape, 1, 1, vec![3.0]),
    ];
    let weights = LossWeights::unit(&[1, 2]);
    let loss = triplet_loss_multi(&mut tape, &a, &p, &n, &[1, 2], &weights).unwrap();
    assert_eq!(tape.scalar(loss), 0.5);
}

#[test]
fn triplet_multi_rejects_unknown_layer() {
    let mut tape = Tape::new();
    let a = vec![pyramid_level(&mut tape, 1, 2, vec![0.0; 4])];
    let p = vec![pyramid_level(&mut tape, 1, 2, vec![0.0; 4])];
    let n = vec![pyramid_level(&mut tape, 1, 2, vec![1.0; 4])];
    let weights = LossWeights::unit(&[3]);
    assert!(matches!(
        triplet_loss_multi(&mut tape, &a, &p, &n, &[3], &weights),
        Err(LossError::LayerOutOfRange { layer: 3, max: 1 })
    ));
}

#[test]
fn total_objective_weighted_sum() {
    let mut tape = Tape::new();
    let gen = vec_leaf(&mut tape, vec![0.5]);
    let triplet = vec_leaf(&mut tape, vec![1.0]);
    let depth = vec_leaf(&mut tape, vec![2.0]);
    let seg = vec_leaf(&mut tape, vec![4.0f64.ln()]);
    let zero = LossWeights {
        lambda_t: 0.0,
        lambda_d: 0.0,
        lambda_s: 0.0,
        margins: BTreeMap::new(),
    };
    let l0 = total_gen_objective(&mut tape, gen, triplet, depth, seg, &zero).unwrap();
    assert_eq!(tape.scalar(l0), 0.5);
    let unit = LossWeights::unit(&[]);
    let l1 = total_gen_objective(&mut tape, gen, triplet, depth, seg, &unit).unwrap();
    assert_eq!(tape.scalar(l1), 3.5 + 4.0f64.ln());
}

#[test]
fn total_objective_rejects_non_finite() {
    let mut tape = Tape::new();
    let gen = vec_leaf(&mut tape, vec![f64::NAN]);
    let t = vec_leaf(&mut tape, vec![0.0]);
    let d = vec_leaf(&mut tape, vec![0.0]);
    let s = vec_leaf(&mut tape, vec![0.0]);
    assert!(matches!(
        total_gen_objective(&mut tape, gen, t, d, s, &LossWeights::unit(&[])),
        Err(LossError::NonFiniteInput(_))
    ));
}

#[test]
fn weights_require_margins_for_every_layer() {
    let weights = LossWeights::unit(&[3, 4]);
    weights.validate(&[3, 4]).unwrap();
    assert!(matches!(
        weights.validate(&[3, 4, 5]),
        Err(LossError::MissingMargin(5))
    ));
}

proptest! {
    #[test]
    fn triplet_single_bounded(
        a in prop::collection::vec(-5.0f64..5.0, 4),
        p in prop::collection::vec(-5.0f64..5.0, 4),
        n in prop::collection::vec(-5.0f64..5.0, 4),
        m in 0.1f64..3.0,
    ) {
        let mut tape = Tape::new();
        let av = vec_leaf(&mut tape, a);
        let pv = vec_leaf(&mut tape, p);
        let nv = vec_leaf(&mut tape, n);
        let loss = triplet_loss_single(&mut tape, av, pv, nv, m).unwrap();
        let v = tape.scalar(loss);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn triplet_depends_only_on_distances(
        a in prop::collection::vec(-2.0f64..2.0, 3),
        p in prop::collection::vec(-2.0f64..2.0, 3),
        n in prop::collection::vec(-2.0f64..2.0, 3),
        shift in prop::collection::vec(-3.0f64..3.0, 3),
        axis in 0usize..3,
    ) {
        let eval = |a: &[f64], p: &[f64], n: &[f64]| {
            let mut tape = Tape::new();
            let av = vec_leaf(&mut tape, a.to_vec());
            let pv = vec_leaf(&mut tape, p.to_vec());
            let nv = vec_leaf(&mut tape, n.to_vec());
            let loss = triplet_loss_single(&mut tape, av, pv, nv, 1.0).unwrap();
            tape.scalar(loss)
        };
        let base = eval(&a, &p, &n);
        // joint isometry: translate, then reflect one axis
        let transform = |v: &[f64]| {
            let mut out: Vec<f64> = v.iter().zip(&shift).map(|(x, s)| x + s).collect();
            out[axis] = -out[axis];
            out
        };
        let moved = eval(&transform(&a), &transform(&p), &transform(&n));
        prop_assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
    }

    #[test]
    fn losses_are_nonnegative(
        scores in prop::collection::vec(-4.0f64..4.0, 8),
        reals in prop::collection::vec(-4.0f64..4.0, 3),
        depths in prop::collection::vec(0.1f64..10.0, 4),
        preds in prop::collection::vec(-2.0f64..12.0, 4),
    ) {
        let mut tape = Tape::new();
        let dv = vec_leaf(&mut tape, scores.clone());
        let dr = vec_leaf(&mut tape, reals);
        let dis = dis_loss(&mut tape, dv, dr).unwrap();
        prop_assert!(tape.scalar(dis) >= 0.0);
        let gen = gen_loss(&mut tape, dv).unwrap();
        prop_assert!(tape.scalar(gen) >= 0.0);

        let seg_scores = tape.constant(arr(&[1, 2, 2, 2], scores));
        let seg = seg_loss(&mut tape, seg_scores, &[0, 1, 1, 0]).unwrap();
        prop_assert!(tape.scalar(seg) >= 0.0);

        let gt = DepthTarget::dense(arr(&[1, 1, 2, 2], depths)).unwrap();
        let pv = tape.constant(arr(&[1, 1, 2, 2], preds));
        let map = BTreeMap::from([(1usize, pv)]);
        let dl = depth_loss(&mut tape, &map, &gt, false).unwrap();
        prop_assert!(tape.scalar(dl) >= 0.0);
    }
}
