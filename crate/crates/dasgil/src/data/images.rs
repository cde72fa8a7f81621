use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::tensor::Scalar;

use super::DataError;

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let o = (row * self.width + col) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let o = (row * self.width + col) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn flipped_horizontal(&self) -> Self {
        let mut out = RgbImage::new(self.width, self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                out.set_pixel(r, c, self.pixel(r, self.width - 1 - c));
            }
        }
        out
    }

    /// NCHW float batch entry scaled to [-1, 1].
    pub fn to_net_input<F: Scalar>(&self) -> ArrayD<F> {
        let mut arr = ArrayD::<F>::zeros(IxDyn(&[1, 3, self.height, self.width]));
        for r in 0..self.height {
            for c in 0..self.width {
                let px = self.pixel(r, c);
                for ch in 0..3 {
                    let v = px[ch] as f64 / 255.0 * 2.0 - 1.0;
                    arr[[0, ch, r, c]] = F::from_f64(v);
                }
            }
        }
        arr
    }
}

/// 16-bit depth image with a meters-per-unit scale; stored 0 marks invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
    pub scale: f64,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, scale: f64) -> Self {
        DepthMap {
            width,
            height,
            data: vec![0; width * height],
            scale,
        }
    }

    pub fn meters(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col] as f64 * self.scale
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }

    pub fn flipped_horizontal(&self) -> Self {
        let mut out = DepthMap::new(self.width, self.height, self.scale);
        for r in 0..self.height {
            for c in 0..self.width {
                out.data[r * self.width + c] = self.data[r * self.width + (self.width - 1 - c)];
            }
        }
        out
    }

    /// (1, 1, h, w) depth-in-meters array plus a 0/1 validity mask.
    pub fn to_target<F: Scalar>(&self) -> (ArrayD<F>, ArrayD<F>) {
        let mut depth = ArrayD::<F>::zeros(IxDyn(&[1, 1, self.height, self.width]));
        let mut valid = ArrayD::<F>::zeros(IxDyn(&[1, 1, self.height, self.width]));
        for r in 0..self.height {
            for c in 0..self.width {
                let raw = self.data[r * self.width + c];
                if raw != 0 {
                    depth[[0, 0, r, c]] = F::from_f64(raw as f64 * self.scale);
                    valid[[0, 0, r, c]] = F::one();
                }
            }
        }
        (depth, valid)
    }
}

/// 8-bit class-id map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl SegMap {
    pub fn new(width: usize, height: usize) -> Self {
        SegMap {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn class(&self, row: usize, col: usize) -> usize {
        self.data[row * self.width + col] as usize
    }

    pub fn flipped_horizontal(&self) -> Self {
        let mut out = SegMap::new(self.width, self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                out.data[r * self.width + c] = self.data[r * self.width + (self.width - 1 - c)];
            }
        }
        out
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.data.iter().map(|&c| c as usize).collect()
    }
}

fn png_err<E: std::fmt::Display>(e: E) -> DataError {
    DataError::Png(e.to_string())
}

pub fn write_rgb8(path: &Path, image: &RgbImage) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), image.width as u32, image.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&image.data).map_err(png_err)?;
    Ok(())
}

pub fn read_rgb8(path: &Path) -> Result<RgbImage, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let decoder = png::Decoder::new(File::open(path)?);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(DataError::Png(format!(
            "{}: expected 8-bit RGB, got {:?}/{:?}",
            path.display(),
            info.color_type,
            info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    Ok(RgbImage {
        width: info.width as usize,
        height: info.height as usize,
        data: buf,
    })
}

pub fn write_depth16(path: &Path, depth: &DepthMap) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), depth.width as u32, depth.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc.write_header().map_err(png_err)?;
    let mut bytes = Vec::with_capacity(depth.data.len() * 2);
    for v in &depth.data {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    writer.write_image_data(&bytes).map_err(png_err)?;
    Ok(())
}

pub fn read_depth16(path: &Path, scale: f64) -> Result<DepthMap, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let decoder = png::Decoder::new(File::open(path)?);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(DataError::Png(format!(
            "{}: expected 16-bit grayscale, got {:?}/{:?}",
            path.display(),
            info.color_type,
            info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    let data: Vec<u16> = buf
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(DepthMap {
        width: info.width as usize,
        height: info.height as usize,
        data,
        scale,
    })
}

/// Write class ids as an indexed PNG with a deterministic palette.
pub fn write_seg8(path: &Path, seg: &SegMap, class_count: usize) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), seg.width as u32, seg.height as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    let mut palette = Vec::with_capacity(class_count.max(1) * 3);
    for c in 0..class_count.max(1) {
        palette.extend_from_slice(&class_palette(c));
    }
    enc.set_palette(palette);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&seg.data).map_err(png_err)?;
    Ok(())
}

/// Read class ids back, lazily checking them against the class count.
pub fn read_seg8(path: &Path, class_count: usize) -> Result<SegMap, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let mut decoder = png::Decoder::new(File::open(path)?);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
        return Err(DataError::Png(format!(
            "{}: expected 8-bit indexed, got {:?}/{:?}",
            path.display(),
            info.color_type,
            info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    if let Some(&bad) = buf.iter().find(|&&c| c as usize >= class_count) {
        return Err(DataError::ClassOutOfRange {
            class: bad as usize,
            count: class_count,
            path: path.to_path_buf(),
        });
    }
    Ok(SegMap {
        width: info.width as usize,
        height: info.height as usize,
        data: buf,
    })
}

/// Fixed color per class id, for palettes and report imagery.
pub fn class_palette(class: usize) -> [u8; 3] {
    const BASE: [[u8; 3]; 10] = [
        [135, 206, 235], // sky
        [110, 110, 90],  // ground
        [200, 70, 60],
        [70, 160, 80],
        [70, 90, 200],
        [220, 180, 60],
        [160, 70, 180],
        [60, 200, 200],
        [240, 130, 40],
        [120, 220, 120],
    ];
    BASE[class % BASE.len()]
}
