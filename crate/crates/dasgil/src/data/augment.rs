use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::images::{DepthMap, RgbImage, SegMap};
use super::DataError;

/// An image with whatever aligned ground-truth maps it carries.
#[derive(Debug, Clone)]
pub struct ImageStack {
    pub image: RgbImage,
    pub depth: Option<DepthMap>,
    pub seg: Option<SegMap>,
}

impl ImageStack {
    pub fn image_only(image: RgbImage) -> Self {
        ImageStack {
            image,
            depth: None,
            seg: None,
        }
    }

    pub fn flipped_horizontal(&self) -> Self {
        ImageStack {
            image: self.image.flipped_horizontal(),
            depth: self.depth.as_ref().map(|d| d.flipped_horizontal()),
            seg: self.seg.as_ref().map(|s| s.flipped_horizontal()),
        }
    }
}

/// Mirror both images of a pair with probability one half; one coin governs
/// both so positive pairs stay aligned.
pub fn augment_pair(
    a: &RgbImage,
    b: &RgbImage,
    rng: &mut ChaCha8Rng,
) -> Result<(RgbImage, RgbImage), DataError> {
    if a.width != b.width || a.height != b.height {
        return Err(DataError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    if rng.gen_bool(0.5) {
        Ok((a.flipped_horizontal(), b.flipped_horizontal()))
    } else {
        Ok((a.clone(), b.clone()))
    }
}

/// Same coin, applied to full stacks (ground truth flips with the image).
pub fn augment_stack_pair(
    a: &ImageStack,
    b: &ImageStack,
    rng: &mut ChaCha8Rng,
) -> Result<(ImageStack, ImageStack), DataError> {
    if a.image.width != b.image.width || a.image.height != b.image.height {
        return Err(DataError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.image.height, a.image.width, b.image.height, b.image.width
        )));
    }
    if rng.gen_bool(0.5) {
        Ok((a.flipped_horizontal(), b.flipped_horizontal()))
    } else {
        Ok((a.clone(), b.clone()))
    }
}

/// Crop placement: the deterministic centered window, or an explicit
/// offset chosen by the caller (training-time random crops draw the offset
/// and pass it in).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropWindow {
    Center,
    At { row: usize, col: usize },
}

/// Apply one crop window to the image and every aligned map.
pub fn crop_to_shape(
    stack: &ImageStack,
    target_h: usize,
    target_w: usize,
    window: CropWindow,
) -> Result<ImageStack, DataError> {
    let (src_h, src_w) = (stack.image.height, stack.image.width);
    if target_h > src_h || target_w > src_w {
        return Err(DataError::TargetTooLarge {
            src_h,
            src_w,
            target_h,
            target_w,
        });
    }
    let (row0, col0) = match window {
        CropWindow::Center => ((src_h - target_h) / 2, (src_w - target_w) / 2),
        CropWindow::At { row, col } => {
            if row + target_h > src_h || col + target_w > src_w {
                return Err(DataError::TargetTooLarge {
                    src_h,
                    src_w,
                    target_h,
                    target_w,
                });
            }
            (row, col)
        }
    };
    let mut image = RgbImage::new(target_w, target_h);
    for r in 0..target_h {
        for c in 0..target_w {
            image.set_pixel(r, c, stack.image.pixel(row0 + r, col0 + c));
        }
    }
    let depth = stack.depth.as_ref().map(|d| {
        let mut out = DepthMap::new(target_w, target_h, d.scale);
        for r in 0..target_h {
            for c in 0..target_w {
                out.data[r * target_w + c] = d.data[(row0 + r) * d.width + (col0 + c)];
            }
        }
        out
    });
    let seg = stack.seg.as_ref().map(|s| {
        let mut out = SegMap::new(target_w, target_h);
        for r in 0..target_h {
            for c in 0..target_w {
                out.data[r * target_w + c] = s.data[(row0 + r) * s.width + (col0 + c)];
            }
        }
        out
    });
    Ok(ImageStack { image, depth, seg })
}

/// Random crop offset for a source/target pair, drawn from the caller's
/// stream.
pub fn random_crop_window(
    src_h: usize,
    src_w: usize,
    target_h: usize,
    target_w: usize,
    rng: &mut ChaCha8Rng,
) -> CropWindow {
    let row = if src_h > target_h {
        rng.gen_range(0..=src_h - target_h)
    } else {
        0
    };
    let col = if src_w > target_w {
        rng.gen_range(0..=src_w - target_w)
    } else {
        0
    };
    CropWindow::At { row, col }
}
