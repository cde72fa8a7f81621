use std::io::Write;
use std::path::{Path, PathBuf};

use super::toygen::{render_frame, sequence_world, DEPTH_SCALE};
use super::*;

fn record(id: &str, domain: Domain, seq: &str, frame: u64, env: &str) -> SampleRecord {
    SampleRecord {
        id: id.into(),
        domain,
        sequence: seq.into(),
        frame,
        environment: env.into(),
        camera_angle_deg: 0.0,
        image_path: PathBuf::from(format!("images/{id}.png")),
        depth_path: (domain == Domain::Virtual).then(|| PathBuf::from("d.png")),
        seg_path: (domain == Domain::Virtual).then(|| PathBuf::from("s.png")),
        depth_scale: DEPTH_SCALE,
        pose: Pose::at(frame as f64, 0.0, 0.0),
    }
}

fn write_manifest_lines(dir: &Path, lines: &[String]) -> PathBuf {
    let path = dir.join("manifest.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    for line in lines {
        writeln!(f, "{line}").unwrap();
    }
    path
}

fn header_line() -> String {
    r#"{"class_count":5,"class_names":["sky","ground","a","b","c"]}"#.to_string()
}

fn record_line(rec: &SampleRecord) -> String {
    serde_json::to_string(rec).unwrap()
}

#[test]
fn manifest_round_trip_preserves_order() {
    let dir = tempfile::tempdir().unwrap();
    let r1 = record("b", Domain::Virtual, "seq00", 0, "clone");
    let r2 = record("a", Domain::Real, "seq00", 0, "real");
    let path = write_manifest_lines(
        dir.path(),
        &[header_line(), record_line(&r1), record_line(&r2)],
    );
    let manifest = load_manifest(&path).unwrap();
    assert_eq!(manifest.records.len(), 2);
    assert_eq!(manifest.records[0].id, "b");
    assert_eq!(manifest.records[1].id, "a");
    assert_eq!(manifest.class_count, 5);
}

#[test]
fn manifest_rejects_duplicate_id() {
    let dir = tempfile::tempdir().unwrap();
    let r = record("a", Domain::Virtual, "seq00", 0, "clone");
    let path = write_manifest_lines(
        dir.path(),
        &[header_line(), record_line(&r), record_line(&r)],
    );
    assert!(matches!(
        load_manifest(&path),
        Err(DataError::DuplicateId(id)) if id == "a"
    ));
}

#[test]
fn manifest_rejects_virtual_without_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = record("a", Domain::Virtual, "seq00", 0, "clone");
    r.depth_path = None;
    let path = write_manifest_lines(dir.path(), &[header_line(), record_line(&r)]);
    assert!(matches!(
        load_manifest(&path),
        Err(DataError::VirtualMissingGroundTruth(id)) if id == "a"
    ));
}

#[test]
fn manifest_rejects_bad_quaternion() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = record("a", Domain::Virtual, "seq00", 0, "clone");
    r.pose.qw = 1.5;
    let path = write_manifest_lines(dir.path(), &[header_line(), record_line(&r)]);
    assert!(matches!(
        load_manifest(&path),
        Err(DataError::MalformedRecord { line: 2, .. })
    ));
}

#[test]
fn missing_manifest_file_is_reported() {
    assert!(matches!(
        load_manifest(Path::new("/nonexistent/manifest.jsonl")),
        Err(DataError::MissingFile(_))
    ));
}

#[test]
fn toy_dataset_counts_and_determinism() {
    let mut config = ToyWorldConfig::default_with_seed(7);
    config.sequences = 2;
    config.frames_per_sequence = 8;
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let ma = generate_toy_dataset(&config, dir_a.path()).unwrap();
    let mb = generate_toy_dataset(&config, dir_b.path()).unwrap();
    let virt = ma.domain_records(Domain::Virtual).len();
    let real = ma.domain_records(Domain::Real).len();
    assert_eq!(virt, 2 * 8 * 3);
    assert_eq!(real, 2 * 8);
    assert_eq!(ma.records.len(), mb.records.len());
    // identical file bytes, file by file
    for rec in &ma.records {
        let pa = dir_a.path().join(&rec.image_path);
        let pb = dir_b.path().join(&rec.image_path);
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    }
    assert_eq!(
        std::fs::read(dir_a.path().join("manifest.jsonl")).unwrap(),
        std::fs::read(dir_b.path().join("manifest.jsonl")).unwrap()
    );
    // manifest reloads cleanly
    let reloaded = load_manifest(&dir_a.path().join("manifest.jsonl")).unwrap();
    assert_eq!(reloaded.records.len(), ma.records.len());
}

#[test]
fn toy_depth_matches_analytic_scene() {
    let config = ToyWorldConfig::default_with_seed(11);
    let world = sequence_world(&config, 0);
    for frame in [0usize, 3, 7] {
        let (_, depth, seg) = render_frame(&config, &world, frame);
        let offset = (frame * (config.image_width / 4).max(4)) as f64;
        for r in 0..config.image_height {
            for c in 0..config.image_width {
                let col_world = c as f64 + offset;
                // analytic query: nearest covering primitive, else ground or sky
                let mut expect: Option<f64> = None;
                let mut expect_class: u8 = if r < world.horizon_row { 0 } else { 1 };
                for p in &world.primitives {
                    if p.covers(r as f64, col_world)
                        && expect.map_or(true, |d| p.depth_m < d)
                    {
                        expect = Some(p.depth_m);
                        expect_class = p.class;
                    }
                }
                let expect_m = expect.unwrap_or(if r < world.horizon_row {
                    0.0
                } else {
                    world.ground_depth_m
                });
                let got_m = depth.meters(r, c);
                assert!(
                    (got_m - expect_m).abs() < 1e-4,
                    "depth at ({r},{c}): {got_m} vs {expect_m}"
                );
                assert_eq!(seg.class(r, c), expect_class as usize, "class at ({r},{c})");
            }
        }
    }
}

#[test]
fn toy_rejects_bad_config() {
    let mut config = ToyWorldConfig::default_with_seed(1);
    config.frames_per_sequence = 3;
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        generate_toy_dataset(&config, dir.path()),
        Err(DataError::InvalidConfig(_))
    ));
}

fn triplet_manifest() -> DatasetManifest {
    let mut records = Vec::new();
    for seq in ["seqA", "seqB"] {
        for frame in 0..20u64 {
            for env in ["clone", "fog"] {
                records.push(record(
                    &format!("{seq}_{frame}_{env}"),
                    Domain::Virtual,
                    seq,
                    frame,
                    env,
                ));
            }
        }
    }
    records.push(record("real0", Domain::Real, "seqA", 0, "real"));
    DatasetManifest::new(records, 5, vec!["sky".into(); 5]).unwrap()
}

#[test]
fn positive_predicate_follows_pairing_rules() {
    let m = triplet_manifest();
    let a = m.get("seqA_10_clone").unwrap();
    // within the interval, different environment
    assert!(is_positive_pair(a, m.get("seqA_13_fog").unwrap()));
    // same environment, same frame: nothing differs
    assert!(!is_positive_pair(a, m.get("seqA_10_clone").unwrap()));
    // frame gap 10: too far for a positive, eligible as negative
    let far = m.get("seqA_20_fog").unwrap_or_else(|| m.get("seqA_19_fog").unwrap());
    assert!(!is_positive_pair(a, far));
    assert!(is_negative_candidate(a, far));
    // angle gap 45 degrees: excluded
    let mut tilted = a.clone();
    tilted.id = "tilted".into();
    tilted.camera_angle_deg = 30.0;
    let mut anchor = a.clone();
    anchor.camera_angle_deg = -15.0;
    assert!(!is_positive_pair(&anchor, &tilted));
    // angle gap 30 degrees exactly: allowed
    anchor.camera_angle_deg = 0.0;
    assert!(is_positive_pair(&anchor, &tilted));
}

#[test]
fn sampled_triplets_always_satisfy_invariants() {
    let m = triplet_manifest();
    let mut rng = derived_rng(42, "test", 0);
    for i in 0..10_000 {
        let t = sample_triplet(&m, &mut rng).unwrap();
        if let Err(msg) = t.validate(&m) {
            panic!("draw {i}: {msg} ({t:?})");
        }
    }
}

#[test]
fn sampling_is_deterministic_in_the_stream() {
    let m = triplet_manifest();
    let mut r1 = derived_rng(9, "test", 0);
    let mut r2 = derived_rng(9, "test", 0);
    for _ in 0..100 {
        assert_eq!(
            sample_triplet(&m, &mut r1).unwrap(),
            sample_triplet(&m, &mut r2).unwrap()
        );
    }
}

#[test]
fn too_small_manifest_has_no_valid_triplet() {
    // single sequence, six frames: positives exist but no negative does
    let mut records = Vec::new();
    for frame in 0..6u64 {
        for env in ["clone", "fog"] {
            records.push(record(
                &format!("s_{frame}_{env}"),
                Domain::Virtual,
                "seqA",
                frame,
                env,
            ));
        }
    }
    let m = DatasetManifest::new(records, 2, vec!["a".into(), "b".into()]).unwrap();
    let mut rng = derived_rng(1, "test", 0);
    assert!(sample_triplet(&m, &mut rng).is_err());
}

fn tiny_image(w: usize, h: usize) -> RgbImage {
    let mut img = RgbImage::new(w, h);
    for r in 0..h {
        for c in 0..w {
            img.set_pixel(r, c, [(r * 31 + c * 7) as u8, (c * 13) as u8, (r * 3) as u8]);
        }
    }
    img
}

#[test]
fn augment_flips_both_or_neither() {
    let a = tiny_image(6, 4);
    let b = tiny_image(6, 4);
    let mut flips = 0usize;
    let mut rng = derived_rng(5, "augment", 0);
    for _ in 0..1000 {
        let (fa, fb) = augment_pair(&a, &b, &mut rng).unwrap();
        let a_flipped = fa == a.flipped_horizontal();
        let b_flipped = fb == b.flipped_horizontal();
        let a_same = fa == a;
        assert!(a_flipped || a_same);
        // one coin governs both
        assert_eq!(a_flipped && !a_same, b_flipped && !(fb == b));
        if a_flipped && !a_same {
            flips += 1;
        }
    }
    let fraction = flips as f64 / 1000.0;
    assert!((0.45..=0.55).contains(&fraction), "flip fraction {fraction}");
}

#[test]
fn augment_of_identical_images_stays_identical() {
    let a = tiny_image(5, 5);
    let mut rng = derived_rng(6, "augment", 0);
    for _ in 0..8 {
        let (x, y) = augment_pair(&a, &a, &mut rng).unwrap();
        assert_eq!(x, y);
    }
}

#[test]
fn augment_rejects_dimension_mismatch() {
    let a = tiny_image(4, 4);
    let b = tiny_image(5, 4);
    let mut rng = derived_rng(7, "augment", 0);
    assert!(matches!(
        augment_pair(&a, &b, &mut rng),
        Err(DataError::DimensionMismatch(_))
    ));
}

#[test]
fn center_crop_offsets_match_floor_halves() {
    let stack = ImageStack::image_only(tiny_image(1100, 300));
    let out = crop_to_shape(&stack, 256, 1024, CropWindow::Center).unwrap();
    assert_eq!(out.image.height, 256);
    assert_eq!(out.image.width, 1024);
    // row offset floor((300-256)/2)=22, col offset floor((1100-1024)/2)=38
    assert_eq!(out.image.pixel(0, 0), stack.image.pixel(22, 38));
    let last = out.image.pixel(255, 1023);
    assert_eq!(last, stack.image.pixel(22 + 255, 38 + 1023));
}

#[test]
fn crop_of_equal_shape_is_identity() {
    let stack = ImageStack::image_only(tiny_image(8, 8));
    let out = crop_to_shape(&stack, 8, 8, CropWindow::Center).unwrap();
    assert_eq!(out.image, stack.image);
}

#[test]
fn crop_rejects_larger_target() {
    let stack = ImageStack::image_only(tiny_image(1024, 200));
    assert!(matches!(
        crop_to_shape(&stack, 256, 1024, CropWindow::Center),
        Err(DataError::TargetTooLarge { .. })
    ));
}

#[test]
fn crop_applies_one_window_to_all_maps() {
    let img = tiny_image(8, 8);
    let mut depth = DepthMap::new(8, 8, DEPTH_SCALE);
    let mut seg = SegMap::new(8, 8);
    for i in 0..64 {
        depth.data[i] = i as u16 + 1;
        seg.data[i] = (i % 4) as u8;
    }
    let stack = ImageStack {
        image: img.clone(),
        depth: Some(depth.clone()),
        seg: Some(seg.clone()),
    };
    let out = crop_to_shape(&stack, 4, 4, CropWindow::At { row: 2, col: 3 }).unwrap();
    assert_eq!(out.image.pixel(0, 0), img.pixel(2, 3));
    assert_eq!(out.depth.as_ref().unwrap().data[0], depth.data[2 * 8 + 3]);
    assert_eq!(out.seg.as_ref().unwrap().data[0], seg.data[2 * 8 + 3]);
}

#[test]
fn png_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let img = tiny_image(9, 7);
    write_rgb8(&dir.path().join("i.png"), &img).unwrap();
    assert_eq!(read_rgb8(&dir.path().join("i.png")).unwrap(), img);

    let mut depth = DepthMap::new(5, 4, DEPTH_SCALE);
    for (i, v) in depth.data.iter_mut().enumerate() {
        *v = (i * 1000) as u16;
    }
    write_depth16(&dir.path().join("d.png"), &depth).unwrap();
    assert_eq!(read_depth16(&dir.path().join("d.png"), DEPTH_SCALE).unwrap(), depth);

    let mut seg = SegMap::new(5, 4);
    for (i, v) in seg.data.iter_mut().enumerate() {
        *v = (i % 3) as u8;
    }
    write_seg8(&dir.path().join("s.png"), &seg, 3).unwrap();
    assert_eq!(read_seg8(&dir.path().join("s.png"), 3).unwrap(), seg);
    // lazy class check
    assert!(matches!(
        read_seg8(&dir.path().join("s.png"), 2),
        Err(DataError::ClassOutOfRange { class: 2, count: 2, .. })
    ));
}
