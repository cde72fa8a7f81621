use ndarray::ArrayD;

use crate::data::RgbImage;
use crate::tensor::Scalar;

use super::RetrievalError;

/// Project per-pixel channel vectors onto their top three principal
/// components and min-max scale each to [0, 255]. A constant map (zero
/// variance) renders uniform mid-gray.
///
/// Accepts a (c, h, w) map or a singleton batch (1, c, h, w).
pub fn pca_visualize<F: Scalar>(features: &ArrayD<F>) -> Result<RgbImage, RetrievalError> {
    let view;
    let shape = features.shape();
    match shape.len() {
        3 => view = features.view(),
        4 if shape[0] == 1 => view = features.view().into_shape_with_order(
            ndarray::IxDyn(&[shape[1], shape[2], shape[3]]),
        )
        .map_err(|e| RetrievalError::ShapeMismatch(e.to_string()))?,
        other => {
            return Err(RetrievalError::ShapeMismatch(format!(
                "expected (c, h, w) feature map, got {other}-d shape {shape:?}"
            )))
        }
    }
    let (c, h, w) = (view.shape()[0], view.shape()[1], view.shape()[2]);
    if c < 3 {
        return Err(RetrievalError::TooFewChannels { got: c });
    }
    let npix = h * w;
    // mean-center per channel
    let mut means = vec![0.0f64; c];
    for ch in 0..c {
        for i in 0..h {
            for j in 0..w {
                means[ch] += view[[ch, i, j]].as_f64();
            }
        }
        means[ch] /= npix as f64;
    }
    // channel covariance
    let mut cov = vec![vec![0.0f64; c]; c];
    for i in 0..h {
        for j in 0..w {
            for a in 0..c {
                let va = view[[a, i, j]].as_f64() - means[a];
                for b in a..c {
                    let vb = view[[b, i, j]].as_f64() - means[b];
                    cov[a][b] += va * vb;
                }
            }
        }
    }
    for a in 0..c {
        for b in 0..a {
            cov[a][b] = cov[b][a];
        }
        for b in a..c {
            cov[a][b] /= npix as f64;
            cov[b][a] = cov[a][b];
        }
    }
    let (eigenvalues, eigenvectors) = jacobi_eigen(&cov);
    // indices of the three largest eigenvalues
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
    let top: Vec<usize> = order.into_iter().take(3).collect();

    let mut projected = vec![[0.0f64; 3]; npix];
    for i in 0..h {
        for j in 0..w {
            for (k, &comp) in top.iter().enumerate() {
                let mut acc = 0.0;
                for ch in 0..c {
                    acc += (view[[ch, i, j]].as_f64() - means[ch]) * eigenvectors[ch][comp];
                }
                projected[i * w + j][k] = acc;
            }
        }
    }
    let mut image = RgbImage::new(w, h);
    for k in 0..3 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &projected {
            lo = lo.min(p[k]);
            hi = hi.max(p[k]);
        }
        let span = hi - lo;
        for i in 0..h {
            for j in 0..w {
                let byte = if span <= 1e-12 {
                    128u8
                } else {
                    (((projected[i * w + j][k] - lo) / span) * 255.0).round() as u8
                };
                let o = (i * w + j) * 3;
                image.data[o + k] = byte;
            }
        }
    }
    Ok(image)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvectors as columns).
fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cos = 1.0 / (t * t + 1.0).sqrt();
                let sin = t * cos;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cos * akp - sin * akq;
                    a[k][q] = sin * akp + cos * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cos * apk - sin * aqk;
                    a[q][k] = sin * apk + cos * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = cos * vp - sin * vq;
                    row[q] = sin * vp + cos * vq;
                }
            }
        }
    }
    let eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}
