//! Feature visualization: for each input image, a horizontal strip of
//! input, PCA-projected mid-layer features, predicted depth, and predicted
//! segmentation.

use std::path::Path;

use anyhow::{Context, Result};

use crate::data::{class_palette, read_rgb8, write_rgb8, RgbImage};
use crate::net::{decode_depth, decode_seg, encode, ModelParams};
use crate::retrieval::pca_visualize;

fn upscale_nearest(img: &RgbImage, factor: usize) -> RgbImage {
    let mut out = RgbImage::new(img.width * factor, img.height * factor);
    for r in 0..out.height {
        for c in 0..out.width {
            out.set_pixel(r, c, img.pixel(r / factor, c / factor));
        }
    }
    out
}

fn depth_panel(pred: &ndarray::ArrayD<f32>) -> RgbImage {
    let (h, w) = (pred.shape()[2], pred.shape()[3]);
    let mut lo = f32::INFINITY;
    let mut hi = f32::NEG_INFINITY;
    for &v in pred.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-9);
    let mut img = RgbImage::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let t = (pred[[0, 0, r, c]] - lo) / span;
            let b = (t * 255.0).round() as u8;
            // near bright, far dark
            img.set_pixel(r, c, [255 - b, 255 - b, b / 2 + 127]);
        }
    }
    img
}

fn seg_panel(scores: &ndarray::ArrayD<f32>) -> RgbImage {
    let (m, h, w) = (scores.shape()[1], scores.shape()[2], scores.shape()[3]);
    let mut img = RgbImage::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut best = 0usize;
            for cls in 1..m {
                if scores[[0, cls, r, c]] > scores[[0, best, r, c]] {
                    best = cls;
                }
            }
            img.set_pixel(r, c, class_palette(best));
        }
    }
    img
}

fn hstack(panels: &[RgbImage]) -> RgbImage {
    let height = panels.iter().map(|p| p.height).max().unwrap_or(0);
    let width: usize = panels.iter().map(|p| p.width).sum();
    let mut out = RgbImage::new(width, height);
    let mut col0 = 0;
    for p in panels {
        for r in 0..p.height {
            for c in 0..p.width {
                out.set_pixel(r, col0 + c, p.pixel(r, c));
            }
        }
        col0 += p.width;
    }
    out
}

/// Render one strip per input image into `out_dir`, returning the output
/// paths.
pub fn render_strips(
    params: &ModelParams<f32>,
    images: &[std::path::PathBuf],
    layer: usize,
    out_dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for path in images {
        let image = read_rgb8(path).with_context(|| format!("reading {}", path.display()))?;
        let input = image.to_net_input::<f32>();
        let pyramid = encode(params, &input)?;
        let level = pyramid.level(layer);
        let pca = pca_visualize(level)?;
        let pca_up = upscale_nearest(&pca, 1 << layer);
        let depth_preds = decode_depth(params, &pyramid)?;
        let (&finest, pred) = depth_preds.iter().next().expect("configured depth layers");
        let depth_img = upscale_nearest(&depth_panel(pred), 1 << finest);
        let seg_scores = decode_seg(params, &pyramid)?;
        let seg_img = seg_panel(&seg_scores);
        let strip = hstack(&[image, pca_up, depth_img, seg_img]);
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image");
        let out_path = out_dir.join(format!("{stem}_strip.png"));
        write_rgb8(&out_path, &strip)?;
        written.push(out_path);
    }
    Ok(written)
}
