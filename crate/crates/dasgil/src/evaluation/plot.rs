//! Minimal line-plot rasterizer for the recall curves: white canvas, gray
//! grid, axes, and one polyline. No text rendering.

use crate::data::RgbImage;

const WIDTH: usize = 480;
const HEIGHT: usize = 320;
const MARGIN: usize = 32;

fn put(img: &mut RgbImage, row: i64, col: i64, rgb: [u8; 3]) {
    if row >= 0 && col >= 0 && (row as usize) < img.height && (col as usize) < img.width {
        img.set_pixel(row as usize, col as usize, rgb);
    }
}

fn line(img: &mut RgbImage, from: (i64, i64), to: (i64, i64), rgb: [u8; 3]) {
    let steps = (to.0 - from.0).abs().max((to.1 - from.1).abs()).max(1);
    for t in 0..=steps {
        let r = from.0 as f64 + (to.0 - from.0) as f64 * t as f64 / steps as f64;
        let c = from.1 as f64 + (to.1 - from.1) as f64 * t as f64 / steps as f64;
        put(img, r.round() as i64, c.round() as i64, rgb);
    }
}

/// Render (x, y) points as a polyline with y fixed to [0, 1].
pub fn render_line_plot(points: &[(f64, f64)]) -> RgbImage {
    let mut img = RgbImage::new(WIDTH, HEIGHT);
    for r in 0..HEIGHT {
        for c in 0..WIDTH {
            img.set_pixel(r, c, [255, 255, 255]);
        }
    }
    let plot_w = (WIDTH - 2 * MARGIN) as f64;
    let plot_h = (HEIGHT - 2 * MARGIN) as f64;
    // horizontal gridlines at every 0.25 recall
    for g in 0..=4 {
        let y = MARGIN as f64 + plot_h * (1.0 - g as f64 * 0.25);
        line(
            &mut img,
            (y as i64, MARGIN as i64),
            (y as i64, (WIDTH - MARGIN) as i64),
            [225, 225, 225],
        );
    }
    let (x_lo, x_hi) = match points.len() {
        0 => (0.0, 1.0),
        1 => (points[0].0 - 0.5, points[0].0 + 0.5),
        _ => (points[0].0, points[points.len() - 1].0),
    };
    let span = (x_hi - x_lo).max(1e-9);
    let to_px = |x: f64, y: f64| -> (i64, i64) {
        let col = MARGIN as f64 + (x - x_lo) / span * plot_w;
        let row = MARGIN as f64 + plot_h * (1.0 - y.clamp(0.0, 1.0));
        (row.round() as i64, col.round() as i64)
    };
    // axes
    line(
        &mut img,
        (MARGIN as i64, MARGIN as i64),
        ((HEIGHT - MARGIN) as i64, MARGIN as i64),
        [0, 0, 0],
    );
    line(
        &mut img,
        ((HEIGHT - MARGIN) as i64, MARGIN as i64),
        ((HEIGHT - MARGIN) as i64, (WIDTH - MARGIN) as i64),
        [0, 0, 0],
    );
    // x ticks at the data points
    for &(x, _) in points {
        let (_, col) = to_px(x, 0.0);
        line(
            &mut img,
            ((HEIGHT - MARGIN) as i64, col),
            ((HEIGHT - MARGIN + 5) as i64, col),
            [0, 0, 0],
        );
    }
    let blue = [40, 80, 200];
    for pair in points.windows(2) {
        line(&mut img, to_px(pair[0].0, pair[0].1), to_px(pair[1].0, pair[1].1), blue);
    }
    for &(x, y) in points {
        let (r, c) = to_px(x, y);
        for dr in -2i64..=2 {
            for dc in -2i64..=2 {
                if dr * dr + dc * dc <= 4 {
                    put(&mut img, r + dr, c + dc, blue);
                }
            }
        }
    }
    img
}
