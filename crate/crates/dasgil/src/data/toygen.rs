//! Procedural two-domain toy dataset: static per-sequence worlds of
//! colored primitives rendered through a sliding orthographic window, once
//! per environment with exact depth and class maps (virtual domain) and
//! once under a fixed appearance shift with no ground truth (real domain).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::images::{class_palette, write_depth16, write_rgb8, write_seg8, DepthMap, RgbImage, SegMap};
use super::records::{save_manifest, DatasetManifest, Domain, Pose, SampleRecord};
use super::{derived_rng, DataError};

/// Depth quantization grid: exactly representable in binary so stored
/// values round-trip without error.
pub const DEPTH_SCALE: f64 = 1.0 / 1024.0;
/// World scale of the orthographic camera.
pub const METERS_PER_PIXEL: f64 = 0.125;

/// Appearance transform: per-channel gain, hue rotation about the gray
/// axis, and additive Gaussian pixel noise. Geometry is never touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppearanceParams {
    pub gain: [f64; 3],
    pub hue_deg: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub name: String,
    pub appearance: AppearanceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyWorldConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub sequences: usize,
    pub frames_per_sequence: usize,
    pub environments: Vec<EnvironmentSpec>,
    pub real_domain_shift: AppearanceParams,
    pub class_count: usize,
    pub seed: u64,
}

impl ToyWorldConfig {
    /// Two sequences, sixteen frames, three virtual environments.
    pub fn default_with_seed(seed: u64) -> Self {
        ToyWorldConfig {
            image_height: 64,
            image_width: 64,
            sequences: 2,
            frames_per_sequence: 16,
            environments: vec![
                EnvironmentSpec {
                    name: "clone".into(),
                    appearance: AppearanceParams {
                        gain: [1.0, 1.0, 1.0],
                        hue_deg: 0.0,
                        noise_std: 0.005,
                    },
                },
                EnvironmentSpec {
                    name: "fog".into(),
                    appearance: AppearanceParams {
                        gain: [0.65, 0.65, 0.72],
                        hue_deg: 0.0,
                        noise_std: 0.02,
                    },
                },
                EnvironmentSpec {
                    name: "sunset".into(),
                    appearance: AppearanceParams {
                        gain: [1.25, 0.95, 0.70],
                        hue_deg: 18.0,
                        noise_std: 0.01,
                    },
                },
            ],
            real_domain_shift: AppearanceParams {
                gain: [0.75, 1.05, 1.30],
                hue_deg: -40.0,
                noise_std: 0.06,
            },
            class_count: 5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: String| Err(DataError::InvalidConfig(m));
        if self.image_height < 32 || self.image_width < 32 {
            return fail("image dims must be at least 32".into());
        }
        if self.class_count < 2 {
            return fail("class_count must be at least 2".into());
        }
        if self.frames_per_sequence < 6 {
            return fail("frames_per_sequence must be at least 6".into());
        }
        if self.sequences == 0 {
            return fail("need at least one sequence".into());
        }
        if self.environments.is_empty() {
            return fail("need at least one environment".into());
        }
        for env in &self.environments {
            if env.appearance.noise_std < 0.0 {
                return fail(format!("environment {}: negative noise", env.name));
            }
        }
        if self.real_domain_shift.noise_std < 0.0 {
            return fail("real_domain_shift: negative noise".into());
        }
        Ok(())
    }

    fn frame_step_px(&self) -> usize {
        (self.image_width / 4).max(4)
    }

    /// Camera position of a frame, in meters. Sequences are spaced far
    /// apart so places never alias across sequences.
    pub fn frame_pose(&self, seq: usize, frame: usize) -> Pose {
        let x = (frame * self.frame_step_px()) as f64 * METERS_PER_PIXEL
            + self.image_width as f64 * 0.5 * METERS_PER_PIXEL;
        Pose::at(x, seq as f64 * 1000.0, 0.0)
    }

    /// Meters the camera advances between consecutive frames.
    pub fn frame_step_m(&self) -> f64 {
        self.frame_step_px() as f64 * METERS_PER_PIXEL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shape {
    Rect,
    Disc,
}

/// A fronto-parallel primitive at constant depth.
#[derive(Debug, Clone)]
pub(crate) struct Primitive {
    pub shape: Shape,
    pub world_x: f64,
    pub center_row: f64,
    pub half_w: f64,
    pub half_h: f64,
    pub depth_m: f64,
    pub class: u8,
    pub color: [f64; 3],
}

impl Primitive {
    pub fn covers(&self, row: f64, col_world: f64) -> bool {
        let dx = (col_world - self.world_x) / self.half_w;
        let dy = (row - self.center_row) / self.half_h;
        match self.shape {
            Shape::Rect => dx.abs() <= 1.0 && dy.abs() <= 1.0,
            Shape::Disc => dx * dx + dy * dy <= 1.0,
        }
    }
}

pub(crate) struct SequenceWorld {
    pub primitives: Vec<Primitive>,
    pub horizon_row: usize,
    pub ground_depth_m: f64,
}

fn quantize_depth(d: f64) -> f64 {
    (d / DEPTH_SCALE).round() * DEPTH_SCALE
}

pub(crate) fn sequence_world(config: &ToyWorldConfig, seq: usize) -> SequenceWorld {
    let mut rng = derived_rng(config.seed, "world", seq as u64);
    let w = config.image_width as f64;
    let h = config.image_height as f64;
    let step = config.frame_step_px() as f64;
    let world_len = w + (config.frames_per_sequence as f64 - 1.0) * step;
    let horizon_row = config.image_height / 3;
    let count = ((world_len / (w / 6.0)).ceil() as usize).max(4);
    let mut primitives = Vec::with_capacity(count);
    for k in 0..count {
        let shape = if rng.gen_bool(0.5) { Shape::Rect } else { Shape::Disc };
        let world_x = rng.gen_range(0.0..world_len);
        let center_row = rng.gen_range(horizon_row as f64 - h * 0.1..h - h * 0.12);
        let half_w = rng.gen_range(w * 0.06..w * 0.22);
        let half_h = rng.gen_range(h * 0.06..h * 0.22);
        let depth_m = quantize_depth(rng.gen_range(4.0..28.0));
        let class = if config.class_count > 2 {
            (2 + k % (config.class_count - 2)) as u8
        } else {
            1
        };
        let base = class_palette(class as usize);
        let jitter = rng.gen_range(-0.08..0.08);
        let color = [
            (base[0] as f64 / 255.0 + jitter).clamp(0.0, 1.0),
            (base[1] as f64 / 255.0 + jitter).clamp(0.0, 1.0),
            (base[2] as f64 / 255.0 + jitter).clamp(0.0, 1.0),
        ];
        primitives.push(Primitive {
            shape,
            world_x,
            center_row,
            half_w,
            half_h,
            depth_m,
            class,
            color,
        });
    }
    SequenceWorld {
        primitives,
        horizon_row,
        ground_depth_m: quantize_depth(36.0),
    }
}

/// Geometry render of one frame before any appearance transform: linear
/// RGB in [0,1], exact depth, exact class ids. Sky pixels carry depth 0
/// (invalid).
pub(crate) fn render_frame(
    config: &ToyWorldConfig,
    world: &SequenceWorld,
    frame: usize,
) -> (Vec<[f64; 3]>, DepthMap, SegMap) {
    let (h, w) = (config.image_height, config.image_width);
    let offset = (frame * config.frame_step_px()) as f64;
    let mut rgb = vec![[0.0f64; 3]; h * w];
    let mut depth = DepthMap::new(w, h, DEPTH_SCALE);
    let mut seg = SegMap::new(w, h);
    let ground_class = 1u8.min(config.class_count as u8 - 1);
    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            if r < world.horizon_row {
                // sky: gradient, invalid depth, class 0
                let t = r as f64 / world.horizon_row.max(1) as f64;
                rgb[idx] = [0.45 + 0.1 * t, 0.65 + 0.1 * t, 0.9];
                depth.data[idx] = 0;
                seg.data[idx] = 0;
            } else {
                let t = (r - world.horizon_row) as f64 / (h - world.horizon_row) as f64;
                rgb[idx] = [0.38 + 0.08 * t, 0.4 + 0.08 * t, 0.3];
                depth.data[idx] = (world.ground_depth_m / DEPTH_SCALE).round() as u16;
                seg.data[idx] = ground_class;
            }
        }
    }
    // far-to-near painting resolves occlusion
    let mut order: Vec<usize> = (0..world.primitives.len()).collect();
    order.sort_by(|&a, &b| {
        world.primitives[b]
            .depth_m
            .partial_cmp(&world.primitives[a].depth_m)
            .unwrap()
            .then(a.cmp(&b))
    });
    for pi in order {
        let prim = &world.primitives[pi];
        for r in 0..h {
            for c in 0..w {
                let col_world = c as f64 + offset;
                if prim.covers(r as f64, col_world) {
                    let idx = r * w + c;
                    rgb[idx] = prim.color;
                    depth.data[idx] = (prim.depth_m / DEPTH_SCALE).round() as u16;
                    seg.data[idx] = prim.class;
                }
            }
        }
    }
    (rgb, depth, seg)
}

fn hue_matrix(deg: f64) -> [[f64; 3]; 3] {
    let theta = deg * PI / 180.0;
    let (s, c) = theta.sin_cos();
    let a = c + (1.0 - c) / 3.0;
    let b = (1.0 - c) / 3.0 - s / 3f64.sqrt();
    let d = (1.0 - c) / 3.0 + s / 3f64.sqrt();
    [[a, b, d], [d, a, b], [b, d, a]]
}

/// Gaussian sample by Box-Muller from the given stream.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub(crate) fn apply_appearance(
    linear: &[[f64; 3]],
    width: usize,
    height: usize,
    params: &AppearanceParams,
    rng: &mut ChaCha8Rng,
) -> RgbImage {
    let m = hue_matrix(params.hue_deg);
    let mut out = RgbImage::new(width, height);
    for r in 0..height {
        for c in 0..width {
            let px = linear[r * width + c];
            let gained = [
                px[0] * params.gain[0],
                px[1] * params.gain[1],
                px[2] * params.gain[2],
            ];
            let mut rotated = [0.0f64; 3];
            for ch in 0..3 {
                rotated[ch] =
                    m[ch][0] * gained[0] + m[ch][1] * gained[1] + m[ch][2] * gained[2];
            }
            let mut quantized = [0u8; 3];
            for ch in 0..3 {
                let noisy = rotated[ch] + params.noise_std * gaussian(rng);
                quantized[ch] = (noisy.clamp(0.0, 1.0) * 255.0).round() as u8;
            }
            out.set_pixel(r, c, quantized);
        }
    }
    out
}

fn noise_stream(config: &ToyWorldConfig, seq: usize, frame: usize, env_idx: usize) -> ChaCha8Rng {
    let index = ((seq as u64 * 100_000 + frame as u64) << 16) | env_idx as u64;
    derived_rng(config.seed, "noise", index)
}

const REAL_ENV_IDX: usize = 0xFFFF;

/// Generate the dataset under `out_dir` and return its manifest (also
/// written as `manifest.jsonl`). Same config and seed produce bit-identical
/// files.
pub fn generate_toy_dataset(
    config: &ToyWorldConfig,
    out_dir: &Path,
) -> Result<DatasetManifest, DataError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir.join("images"))?;
    std::fs::create_dir_all(out_dir.join("depth"))?;
    std::fs::create_dir_all(out_dir.join("seg"))?;
    let mut records = Vec::new();
    for seq in 0..config.sequences {
        let world = sequence_world(config, seq);
        let seq_name = format!("seq{seq:02}");
        for frame in 0..config.frames_per_sequence {
            let (linear, depth, seg) = render_frame(config, &world, frame);
            let pose = config.frame_pose(seq, frame);
            let depth_rel = PathBuf::from(format!("depth/s{seq:02}_f{frame:03}.png"));
            let seg_rel = PathBuf::from(format!("seg/s{seq:02}_f{frame:03}.png"));
            write_depth16(&out_dir.join(&depth_rel), &depth)?;
            write_seg8(&out_dir.join(&seg_rel), &seg, config.class_count)?;
            for (env_idx, env) in config.environments.iter().enumerate() {
                let mut rng = noise_stream(config, seq, frame, env_idx);
                let image = apply_appearance(
                    &linear,
                    config.image_width,
                    config.image_height,
                    &env.appearance,
                    &mut rng,
                );
                let image_rel =
                    PathBuf::from(format!("images/v_s{seq:02}_f{frame:03}_{}.png", env.name));
                write_rgb8(&out_dir.join(&image_rel), &image)?;
                records.push(SampleRecord {
                    id: format!("v_s{seq:02}_f{frame:03}_{}", env.name),
                    domain: Domain::Virtual,
                    sequence: seq_name.clone(),
                    frame: frame as u64,
                    environment: env.name.clone(),
                    camera_angle_deg: 0.0,
                    image_path: image_rel,
                    depth_path: Some(depth_rel.clone()),
                    seg_path: Some(seg_rel.clone()),
                    depth_scale: DEPTH_SCALE,
                    pose,
                });
            }
            let mut rng = noise_stream(config, seq, frame, REAL_ENV_IDX);
            let image = apply_appearance(
                &linear,
                config.image_width,
                config.image_height,
                &config.real_domain_shift,
                &mut rng,
            );
            let image_rel = PathBuf::from(format!("images/r_s{seq:02}_f{frame:03}.png"));
            write_rgb8(&out_dir.join(&image_rel), &image)?;
            records.push(SampleRecord {
                id: format!("r_s{seq:02}_f{frame:03}"),
                domain: Domain::Real,
                sequence: seq_name.clone(),
                frame: frame as u64,
                environment: "real".into(),
                camera_angle_deg: 0.0,
                image_path: image_rel,
                depth_path: None,
                seg_path: None,
                depth_scale: DEPTH_SCALE,
                pose,
            });
        }
    }
    let class_names: Vec<String> = (0..config.class_count)
        .map(|c| match c {
            0 => "sky".to_string(),
            1 => "ground".to_string(),
            other => format!("object{other}"),
        })
        .collect();
    let mut manifest = DatasetManifest::new(records, config.class_count, class_names)?;
    save_manifest(&manifest, &out_dir.join("manifest.jsonl"))?;
    manifest.root = Some(out_dir.to_path_buf());
    Ok(manifest)
}
