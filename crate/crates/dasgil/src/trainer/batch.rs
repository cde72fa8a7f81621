use ndarray::{ArrayD, Axis, IxDyn};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{
    augment_stack_pair, crop_to_shape, random_crop_window, read_depth16, read_rgb8, read_seg8,
    sample_triplet_for_anchor, CropWindow, DatasetManifest, Domain, ImageStack, SampleRecord,
    TripletSpec,
};
use crate::net::NetConfig;

use super::TrainError;

/// A batch of virtual images with their ground truth, stacked NCHW.
#[derive(Debug, Clone)]
pub struct VirtualBatch {
    pub images: ArrayD<f32>,
    pub depth: ArrayD<f32>,
    pub depth_valid: ArrayD<f32>,
    /// Row-major (n, h, w) class ids.
    pub seg: Vec<usize>,
}

/// Everything one training step consumes.
#[derive(Debug, Clone)]
pub struct BatchBundle {
    pub anchors: VirtualBatch,
    pub positives: VirtualBatch,
    pub negatives: VirtualBatch,
    pub real_images: ArrayD<f32>,
    pub triplets: Vec<TripletSpec>,
}

impl BatchBundle {
    pub fn batch_size(&self) -> usize {
        self.triplets.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub batch_size: usize,
    pub random_crop: bool,
}

fn load_stack(
    manifest: &DatasetManifest,
    record: &SampleRecord,
) -> Result<ImageStack, TrainError> {
    let image = read_rgb8(&manifest.resolve(&record.image_path))?;
    let depth = record
        .depth_path
        .as_ref()
        .map(|p| read_depth16(&manifest.resolve(p), record.depth_scale))
        .transpose()?;
    let seg = record
        .seg_path
        .as_ref()
        .map(|p| read_seg8(&manifest.resolve(p), manifest.class_count))
        .transpose()?;
    Ok(ImageStack { image, depth, seg })
}

fn crop_window(
    stack: &ImageStack,
    net: &NetConfig,
    opts: &BatchOptions,
    rng: &mut ChaCha8Rng,
) -> CropWindow {
    if opts.random_crop {
        random_crop_window(
            stack.image.height,
            stack.image.width,
            net.input_height,
            net.input_width,
            rng,
        )
    } else {
        CropWindow::Center
    }
}

fn stack_batch(stacks: &[ImageStack], net: &NetConfig) -> Result<VirtualBatch, TrainError> {
    let n = stacks.len();
    let (h, w) = (net.input_height, net.input_width);
    let mut images = ArrayD::<f32>::zeros(IxDyn(&[n, 3, h, w]));
    let mut depth = ArrayD::<f32>::zeros(IxDyn(&[n, 1, h, w]));
    let mut valid = ArrayD::<f32>::zeros(IxDyn(&[n, 1, h, w]));
    let mut seg = vec![0usize; n * h * w];
    for (i, stack) in stacks.iter().enumerate() {
        let img = stack.image.to_net_input::<f32>();
        images
            .index_axis_mut(Axis(0), i)
            .assign(&img.index_axis(Axis(0), 0));
        if let Some(d) = &stack.depth {
            let (dm, dv) = d.to_target::<f32>();
            depth
                .index_axis_mut(Axis(0), i)
                .assign(&dm.index_axis(Axis(0), 0));
            valid
                .index_axis_mut(Axis(0), i)
                .assign(&dv.index_axis(Axis(0), 0));
        }
        if let Some(s) = &stack.seg {
            for r in 0..h {
                for c in 0..w {
                    seg[(i * h + r) * w + c] = s.class(r, c);
                }
            }
        }
    }
    Ok(VirtualBatch {
        images,
        depth,
        depth_valid: valid,
        seg,
    })
}

fn real_image_batch(stacks: &[ImageStack], net: &NetConfig) -> ArrayD<f32> {
    let n = stacks.len();
    let mut images = ArrayD::<f32>::zeros(IxDyn(&[n, 3, net.input_height, net.input_width]));
    for (i, stack) in stacks.iter().enumerate() {
        let img = stack.image.to_net_input::<f32>();
        images
            .index_axis_mut(Axis(0), i)
            .assign(&img.index_axis(Axis(0), 0));
    }
    images
}

/// Assemble a batch for a fixed anchor list: triplets with paired
/// anchor/positive augmentation and always-flipped negatives, plus a
/// uniform sample of real images.
pub fn assemble_batch_for_anchors(
    manifest: &DatasetManifest,
    net: &NetConfig,
    opts: &BatchOptions,
    anchor_ids: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<BatchBundle, TrainError> {
    let real_records = manifest.domain_records(Domain::Real);
    if real_records.is_empty() {
        return Err(TrainError::EmptyDomain("real".into()));
    }
    let mut anchors = Vec::new();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let mut triplets = Vec::new();
    for id in anchor_ids {
        let spec = sample_triplet_for_anchor(manifest, id, rng)?;
        let a_rec = manifest.get(&spec.anchor).expect("anchor resolved");
        let p_rec = manifest.get(&spec.positive).expect("positive resolved");
        let n_rec = manifest.get(&spec.negative).expect("negative resolved");
        let a_full = load_stack(manifest, a_rec)?;
        let p_full = load_stack(manifest, p_rec)?;
        let n_full = load_stack(manifest, n_rec)?;
        // one window for the pair, an independent one for the negative
        let pair_window = crop_window(&a_full, net, opts, rng);
        let a_crop = crop_to_shape(&a_full, net.input_height, net.input_width, pair_window)?;
        let p_crop = crop_to_shape(&p_full, net.input_height, net.input_width, pair_window)?;
        let n_window = crop_window(&n_full, net, opts, rng);
        let n_crop = crop_to_shape(&n_full, net.input_height, net.input_width, n_window)?;
        let (a_aug, p_aug) = augment_stack_pair(&a_crop, &p_crop, rng)?;
        // negatives are always mirrored
        let n_aug = n_crop.flipped_horizontal();
        anchors.push(a_aug);
        positives.push(p_aug);
        negatives.push(n_aug);
        triplets.push(spec);
    }
    let mut reals = Vec::new();
    for _ in 0..anchor_ids.len() {
        let rec = real_records[rng.gen_range(0..real_records.len())];
        let full = load_stack(manifest, rec)?;
        let window = crop_window(&full, net, opts, rng);
        reals.push(crop_to_shape(&full, net.input_height, net.input_width, window)?);
    }
    Ok(BatchBundle {
        anchors: stack_batch(&anchors, net)?,
        positives: stack_batch(&positives, net)?,
        negatives: stack_batch(&negatives, net)?,
        real_images: real_image_batch(&reals, net),
        triplets,
    })
}

/// Assemble a batch with anchors drawn uniformly from the candidates that
/// admit a full triplet.
pub fn assemble_batch(
    manifest: &DatasetManifest,
    net: &NetConfig,
    opts: &BatchOptions,
    rng: &mut ChaCha8Rng,
) -> Result<BatchBundle, TrainError> {
    let candidates = anchor_ids(manifest);
    if candidates.is_empty() {
        return Err(TrainError::Data(crate::data::DataError::NoValidPositive));
    }
    let mut ids = Vec::with_capacity(opts.batch_size);
    for _ in 0..opts.batch_size {
        ids.push(candidates[rng.gen_range(0..candidates.len())].clone());
    }
    assemble_batch_for_anchors(manifest, net, opts, &ids, rng)
}

/// Ids of virtual records that admit a full triplet, in manifest order.
pub fn anchor_ids(manifest: &DatasetManifest) -> Vec<String> {
    crate::data::triplet_anchor_candidates(manifest)
        .into_iter()
        .map(|r| r.id.clone())
        .collect()
}

/// Deterministic permutation of the anchor candidates for one epoch.
pub fn epoch_permutation(candidates: &[String], mut rng: ChaCha8Rng) -> Vec<String> {
    let mut perm: Vec<String> = candidates.to_vec();
    perm.shuffle(&mut rng);
    perm
}
