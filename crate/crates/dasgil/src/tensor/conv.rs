//! im2col-backed 2-D convolution with explicit forward and backward passes.

use ndarray::{Array2, Array4, ArrayView4};

use super::Scalar;

pub(crate) fn out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

/// Lower one sample into a (cin*kh*kw, oh*ow) column matrix.
fn im2col<F: Scalar>(
    x: &ArrayView4<'_, F>,
    sample: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array2<F> {
    let (_, cin, h, w) = x.dim();
    let mut col = Array2::<F>::zeros((cin * kh * kw, oh * ow));
    for c in 0..cin {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (c * kh + ki) * kw + kj;
                for oi in 0..oh {
                    let ii = oi * stride + ki;
                    if ii < pad || ii >= h + pad {
                        continue;
                    }
                    let si = ii - pad;
                    for oj in 0..ow {
                        let jj = oj * stride + kj;
                        if jj < pad || jj >= w + pad {
                            continue;
                        }
                        col[[row, oi * ow + oj]] = x[[sample, c, si, jj - pad]];
                    }
                }
            }
        }
    }
    col
}

/// Scatter a column matrix back into an input-shaped gradient (accumulating).
fn col2im<F: Scalar>(
    col: &Array2<F>,
    gx: &mut Array4<F>,
    sample: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) {
    let (_, cin, h, w) = gx.dim();
    for c in 0..cin {
        for ki in 0..kh {
            for kj in 0..kw {
                let row = (c * kh + ki) * kw + kj;
                for oi in 0..oh {
                    let ii = oi * stride + ki;
                    if ii < pad || ii >= h + pad {
                        continue;
                    }
                    let si = ii - pad;
                    for oj in 0..ow {
                        let jj = oj * stride + kj;
                        if jj < pad || jj >= w + pad {
                            continue;
                        }
                        gx[[sample, c, si, jj - pad]] += col[[row, oi * ow + oj]];
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward<F: Scalar>(
    x: &ArrayView4<'_, F>,
    w: &ArrayView4<'_, F>,
    stride: usize,
    pad: usize,
) -> Array4<F> {
    let (n, cin, h, wd) = x.dim();
    let (cout, wcin, kh, kw) = w.dim();
    assert_eq!(cin, wcin, "conv2d channel mismatch");
    let oh = out_dim(h, kh, stride, pad);
    let ow = out_dim(wd, kw, stride, pad);
    let wmat = w
        .to_shape((cout, cin * kh * kw))
        .expect("conv weight reshape");
    let mut out = Array4::<F>::zeros((n, cout, oh, ow));
    for s in 0..n {
        let col = im2col(x, s, kh, kw, stride, pad, oh, ow);
        let mut omat = Array2::<F>::zeros((cout, oh * ow));
        ndarray::linalg::general_mat_mul(F::one(), &wmat.view(), &col.view(), F::zero(), &mut omat);
        let osub = omat
            .into_shape_with_order((cout, oh, ow))
            .expect("conv output reshape");
        out.index_axis_mut(ndarray::Axis(0), s).assign(&osub);
    }
    out
}

pub(crate) fn conv2d_backward<F: Scalar>(
    x: &ArrayView4<'_, F>,
    w: &ArrayView4<'_, F>,
    gout: &ArrayView4<'_, F>,
    stride: usize,
    pad: usize,
    need_gx: bool,
    need_gw: bool,
) -> (Option<Array4<F>>, Option<Array4<F>>) {
    let (n, cin, h, wd) = x.dim();
    let (cout, _, kh, kw) = w.dim();
    let (_, _, oh, ow) = gout.dim();
    let wmat = w
        .to_shape((cout, cin * kh * kw))
        .expect("conv weight reshape");
    let mut gx = need_gx.then(|| Array4::<F>::zeros((n, cin, h, wd)));
    let mut gw_mat = need_gw.then(|| Array2::<F>::zeros((cout, cin * kh * kw)));
    for s in 0..n {
        let gmat = gout
            .index_axis(ndarray::Axis(0), s)
            .to_shape((cout, oh * ow))
            .expect("grad reshape")
            .to_owned();
        if let Some(gw) = gw_mat.as_mut() {
            let col = im2col(x, s, kh, kw, stride, pad, oh, ow);
            ndarray::linalg::general_mat_mul(F::one(), &gmat.view(), &col.t(), F::one(), gw);
        }
        if let Some(gx) = gx.as_mut() {
            let mut gcol = Array2::<F>::zeros((cin * kh * kw, oh * ow));
            ndarray::linalg::general_mat_mul(
                F::one(),
                &wmat.t(),
                &gmat.view(),
                F::zero(),
                &mut gcol,
            );
            col2im(&gcol, gx, s, kh, kw, stride, pad, oh, ow);
        }
    }
    let gw = gw_mat.map(|m| {
        m.into_shape_with_order((cout, cin, kh, kw))
            .expect("grad weight reshape")
    });
    (gx, gw)
}
