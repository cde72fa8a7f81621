//! Forward constructors and backward rules for every tape operation.

use ndarray::{Array1, Array2, ArrayD, Axis, Ix2, Ix4, IxDyn};

use super::conv;
use super::{accumulate, Op, Scalar, Tape, Var};

impl<F: Scalar> Tape<F> {
    fn unary(&mut self, x: Var, value: ArrayD<F>, op: Op) -> Var {
        let needs = self.needs(x.0);
        self.push_node(value, op, needs)
    }

    fn binary(&mut self, a: Var, b: Var, value: ArrayD<F>, op: Op) -> Var {
        let needs = self.needs(a.0) || self.needs(b.0);
        self.push_node(value, op, needs)
    }

    fn push_node(&mut self, value: ArrayD<F>, op: Op, needs: bool) -> Var {
        self.nodes.push(super::Node {
            value,
            op,
            needs_grad: needs,
        });
        Var(self.nodes.len() - 1)
    }

    fn val(&self, id: usize) -> &ArrayD<F> {
        &self.nodes[id].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a.0) + self.val(b.0);
        self.binary(a, b, v, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a.0) - self.val(b.0);
        self.binary(a, b, v, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a.0) * self.val(b.0);
        self.binary(a, b, v, Op::Mul(a.0, b.0))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.val(a.0) / self.val(b.0);
        self.binary(a, b, v, Op::Div(a.0, b.0))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let v = self.val(x.0).mapv(|e| -e);
        self.unary(x, v, Op::Neg(x.0))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let v = self.val(x.0).mapv(|e| e.abs());
        self.unary(x, v, Op::Abs(x.0))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.val(x.0).mapv(|e| e * e);
        self.unary(x, v, Op::Square(x.0))
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        let v = self.val(x.0).mapv(|e| e.sqrt());
        self.unary(x, v, Op::Sqrt(x.0))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let zero = F::zero();
        let v = self.val(x.0).mapv(|e| if e > zero { e } else { zero });
        self.unary(x, v, Op::Relu(x.0))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = F::from_f64(slope);
        let zero = F::zero();
        let v = self.val(x.0).mapv(|e| if e > zero { e } else { e * s });
        self.unary(x, v, Op::LeakyRelu(x.0, slope))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let v = self.val(x.0).mapv(softplus_stable);
        self.unary(x, v, Op::Softplus(x.0))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.val(x.0).mapv(sigmoid_stable);
        self.unary(x, v, Op::Sigmoid(x.0))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let kf = F::from_f64(k);
        let v = self.val(x.0).mapv(|e| e * kf);
        self.unary(x, v, Op::Scale(x.0, k))
    }

    pub fn add_scalar(&mut self, x: Var, k: f64) -> Var {
        let kf = F::from_f64(k);
        let v = self.val(x.0).mapv(|e| e + kf);
        self.unary(x, v, Op::AddScalar(x.0))
    }

    pub fn reshape(&mut self, x: Var, shape: IxDyn) -> Var {
        assert_eq!(
            super::numel(&shape),
            self.val(x.0).len(),
            "reshape must preserve element count"
        );
        let v = self
            .val(x.0)
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(shape)
            .expect("reshape");
        self.unary(x, v, Op::Reshape(x.0))
    }

    /// (m, k) x (k, n) -> (m, n)
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let av = as_2d(self.val(a.0));
        let bv = as_2d(self.val(b.0));
        let mut out = Array2::<F>::zeros((av.nrows(), bv.ncols()));
        ndarray::linalg::general_mat_mul(F::one(), &av, &bv, F::zero(), &mut out);
        self.binary(a, b, out.into_dyn(), Op::MatMul(a.0, b.0))
    }

    /// (n, d) + (d) broadcast over rows.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Var {
        let xv = as_2d(self.val(x.0));
        let bv = as_1d(self.val(bias.0));
        let v = (&xv + &bv).into_dyn();
        self.binary(x, bias, v, Op::AddRowBias { x: x.0, bias: bias.0 })
    }

    /// (n, c, h, w) + (c) broadcast over batch and space.
    pub fn add_channel_bias(&mut self, x: Var, bias: Var) -> Var {
        let xv = as_4d(self.val(x.0));
        let bv = as_1d(self.val(bias.0));
        let mut out = xv.to_owned();
        for c in 0..bv.len() {
            out.index_axis_mut(Axis(1), c).mapv_inplace(|e| e + bv[c]);
        }
        self.binary(x, bias, out.into_dyn(), Op::AddChannelBias { x: x.0, bias: bias.0 })
    }

    /// 2-D convolution, NCHW input, OIHW weight.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Var {
        let xv = as_4d(self.val(x.0));
        let wv = as_4d(self.val(w.0));
        let out = conv::conv2d_forward(&xv, &wv, stride, pad);
        self.binary(x, w, out.into_dyn(), Op::Conv2d { x: x.0, w: w.0, stride, pad })
    }

    /// Nearest-neighbor 2x spatial upsampling of an NCHW tensor.
    pub fn nearest_up2(&mut self, x: Var) -> Var {
        let xv = as_4d(self.val(x.0));
        let (n, c, h, w) = xv.dim();
        let mut out = ndarray::Array4::<F>::zeros((n, c, 2 * h, 2 * w));
        for b in 0..n {
            for ch in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        let v = xv[[b, ch, i, j]];
                        out[[b, ch, 2 * i, 2 * j]] = v;
                        out[[b, ch, 2 * i + 1, 2 * j]] = v;
                        out[[b, ch, 2 * i, 2 * j + 1]] = v;
                        out[[b, ch, 2 * i + 1, 2 * j + 1]] = v;
                    }
                }
            }
        }
        self.unary(x, out.into_dyn(), Op::NearestUp2(x.0))
    }

    /// Concatenate NCHW tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|p| as_4d(self.val(p.0))).collect();
        let out = ndarray::concatenate(
            Axis(1),
            &views.iter().map(|v| v.view()).collect::<Vec<_>>(),
        )
        .expect("channel concat shape mismatch");
        let out = out.as_standard_layout().into_owned();
        let needs = parts.iter().any(|p| self.needs(p.0));
        self.push_node(
            out.into_dyn(),
            Op::ConcatChannels(parts.iter().map(|p| p.0).collect()),
            needs,
        )
    }

    /// Concatenate (n, d_i) tensors along the feature axis.
    pub fn concat_features(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|p| as_2d(self.val(p.0))).collect();
        let out = ndarray::concatenate(
            Axis(1),
            &views.iter().map(|v| v.view()).collect::<Vec<_>>(),
        )
        .expect("feature concat shape mismatch");
        let out = out.as_standard_layout().into_owned();
        let needs = parts.iter().any(|p| self.needs(p.0));
        self.push_node(
            out.into_dyn(),
            Op::ConcatFeatures(parts.iter().map(|p| p.0).collect()),
            needs,
        )
    }

    /// NCHW -> (n, c*h*w).
    pub fn flatten(&mut self, x: Var) -> Var {
        let xv = as_4d(self.val(x.0));
        let (n, c, h, w) = xv.dim();
        let v = xv
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n, c * h * w))
            .expect("flatten")
            .into_dyn();
        self.unary(x, v, Op::Flatten(x.0))
    }

    /// Batch normalization over (batch, height, width) per channel,
    /// using batch statistics, with learnable affine parameters.
    pub fn batch_norm_channels(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = as_4d(self.val(x.0));
        let g = as_1d(self.val(gamma.0));
        let b = as_1d(self.val(beta.0));
        let (n, c, h, w) = xv.dim();
        let count = F::from_f64((n * h * w) as f64);
        let epsf = F::from_f64(eps);
        let mut out = xv.to_owned();
        for ch in 0..c {
            let slice = xv.index_axis(Axis(1), ch);
            let mean = slice.sum() / count;
            let var = slice.mapv(|e| (e - mean) * (e - mean)).sum() / count;
            let denom = (var + epsf).sqrt();
            out.index_axis_mut(Axis(1), ch)
                .mapv_inplace(|e| (e - mean) / denom * g[ch] + b[ch]);
        }
        let needs = self.needs(x.0) || self.needs(gamma.0) || self.needs(beta.0);
        self.push_node(
            out.into_dyn(),
            Op::BatchNormChannels { x: x.0, gamma: gamma.0, beta: beta.0, eps },
            needs,
        )
    }

    /// Batch normalization of an (n, d) tensor per feature over the batch.
    pub fn batch_norm_features(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let xv = as_2d(self.val(x.0));
        let g = as_1d(self.val(gamma.0));
        let b = as_1d(self.val(beta.0));
        let (n, d) = xv.dim();
        let count = F::from_f64(n as f64);
        let epsf = F::from_f64(eps);
        let mut out = xv.to_owned();
        for j in 0..d {
            let col = xv.index_axis(Axis(1), j);
            let mean = col.sum() / count;
            let var = col.mapv(|e| (e - mean) * (e - mean)).sum() / count;
            let denom = (var + epsf).sqrt();
            out.index_axis_mut(Axis(1), j)
                .mapv_inplace(|e| (e - mean) / denom * g[j] + b[j]);
        }
        let needs = self.needs(x.0) || self.needs(gamma.0) || self.needs(beta.0);
        self.push_node(
            out.into_dyn(),
            Op::BatchNormFeatures { x: x.0, gamma: gamma.0, beta: beta.0, eps },
            needs,
        )
    }

    /// Sum of all elements, shape [1].
    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.val(x.0).sum();
        self.unary(x, scalar_array(s), Op::SumAll(x.0))
    }

    /// Mean of all elements, shape [1].
    pub fn mean_all(&mut self, x: Var) -> Var {
        let v = self.val(x.0);
        let s = v.sum() / F::from_f64(v.len() as f64);
        self.unary(x, scalar_array(s), Op::MeanAll(x.0))
    }

    /// (n, d) -> (n): sum over the feature axis.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let xv = as_2d(self.val(x.0));
        let v = xv.sum_axis(Axis(1)).into_dyn();
        self.unary(x, v, Op::SumRows(x.0))
    }

    /// Mean over pixels of -log softmax probability of the target class.
    ///
    /// `scores` is (n, m, h, w); `classes` is row-major (n, h, w) class ids.
    pub fn cross_entropy_mean(&mut self, scores: Var, classes: Vec<usize>) -> Var {
        let sv = as_4d(self.val(scores.0));
        let (n, m, h, w) = sv.dim();
        assert_eq!(classes.len(), n * h * w, "class id count mismatch");
        let mut total = F::zero();
        for b in 0..n {
            for i in 0..h {
                for j in 0..w {
                    let cls = classes[(b * h + i) * w + j];
                    debug_assert!(cls < m);
                    let mut maxv = sv[[b, 0, i, j]];
                    for c in 1..m {
                        if sv[[b, c, i, j]] > maxv {
                            maxv = sv[[b, c, i, j]];
                        }
                    }
                    let mut sumexp = F::zero();
                    for c in 0..m {
                        sumexp += (sv[[b, c, i, j]] - maxv).exp();
                    }
                    // -log p_cls = logsumexp - score_cls
                    total += maxv + sumexp.ln() - sv[[b, cls, i, j]];
                }
            }
        }
        let mean = total / F::from_f64((n * h * w) as f64);
        self.unary(
            scores,
            scalar_array(mean),
            Op::CrossEntropyMean { scores: scores.0, classes },
        )
    }

    pub(super) fn dispatch_backward(
        &self,
        id: usize,
        gout: &ArrayD<F>,
        grads: &mut [Option<ArrayD<F>>],
    ) {
        let push = |grads: &mut [Option<ArrayD<F>>], pid: usize, g: ArrayD<F>| {
            if self.nodes[pid].needs_grad {
                accumulate(grads, pid, g);
            }
        };
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                push(grads, *a, gout.clone());
                push(grads, *b, gout.clone());
            }
            Op::Sub(a, b) => {
                push(grads, *a, gout.clone());
                push(grads, *b, gout.mapv(|e| -e));
            }
            Op::Mul(a, b) => {
                push(grads, *a, gout * self.val(*b));
                push(grads, *b, gout * self.val(*a));
            }
            Op::Div(a, b) => {
                let bv = self.val(*b);
                push(grads, *a, gout / bv);
                let av = self.val(*a);
                push(grads, *b, gout.mapv(|e| -e) * av / &(bv * bv));
            }
            Op::Neg(x) => push(grads, *x, gout.mapv(|e| -e)),
            Op::Abs(x) => {
                let sign = self.val(*x).mapv(|e| {
                    if e > F::zero() {
                        F::one()
                    } else if e < F::zero() {
                        -F::one()
                    } else {
                        F::zero()
                    }
                });
                push(grads, *x, gout * &sign);
            }
            Op::Square(x) => {
                let two = F::from_f64(2.0);
                push(grads, *x, gout * &self.val(*x).mapv(|e| e * two));
            }
            Op::Sqrt(x) => {
                let half = F::from_f64(0.5);
                let y = &self.nodes[id].value;
                push(grads, *x, gout * &y.mapv(|e| half / e));
            }
            Op::Relu(x) => {
                let m = self.val(*x).mapv(|e| if e > F::zero() { F::one() } else { F::zero() });
                push(grads, *x, gout * &m);
            }
            Op::LeakyRelu(x, slope) => {
                let s = F::from_f64(*slope);
                let m = self.val(*x).mapv(|e| if e > F::zero() { F::one() } else { s });
                push(grads, *x, gout * &m);
            }
            Op::Softplus(x) => {
                let m = self.val(*x).mapv(sigmoid_stable);
                push(grads, *x, gout * &m);
            }
            Op::Sigmoid(x) => {
                let y = &self.nodes[id].value;
                let m = y.mapv(|e| e * (F::one() - e));
                push(grads, *x, gout * &m);
            }
            Op::Scale(x, k) => {
                let kf = F::from_f64(*k);
                push(grads, *x, gout.mapv(|e| e * kf));
            }
            Op::AddScalar(x) => push(grads, *x, gout.clone()),
            Op::Reshape(x) => {
                let g = gout
                    .to_owned()
                    .into_shape_with_order(self.val(*x).raw_dim())
                    .expect("reshape backward");
                push(grads, *x, g);
            }
            Op::MatMul(a, b) => {
                let av = as_2d(self.val(*a));
                let bv = as_2d(self.val(*b));
                let gv = as_2d(gout);
                if self.nodes[*a].needs_grad {
                    let mut ga = Array2::<F>::zeros(av.dim());
                    ndarray::linalg::general_mat_mul(F::one(), &gv, &bv.t(), F::zero(), &mut ga);
                    push(grads, *a, ga.into_dyn());
                }
                if self.nodes[*b].needs_grad {
                    let mut gb = Array2::<F>::zeros(bv.dim());
                    ndarray::linalg::general_mat_mul(F::one(), &av.t(), &gv, F::zero(), &mut gb);
                    push(grads, *b, gb.into_dyn());
                }
            }
            Op::AddRowBias { x, bias } => {
                push(grads, *x, gout.clone());
                if self.nodes[*bias].needs_grad {
                    let gv = as_2d(gout);
                    push(grads, *bias, gv.sum_axis(Axis(0)).into_dyn());
                }
            }
            Op::AddChannelBias { x, bias } => {
                push(grads, *x, gout.clone());
                if self.nodes[*bias].needs_grad {
                    let gv = as_4d(gout);
                    let c = gv.dim().1;
                    let mut gb = Array1::<F>::zeros(c);
                    for ch in 0..c {
                        gb[ch] = gv.index_axis(Axis(1), ch).sum();
                    }
                    push(grads, *bias, gb.into_dyn());
                }
            }
            Op::Conv2d { x, w, stride, pad } => {
                let xv = as_4d(self.val(*x));
                let wv = as_4d(self.val(*w));
                let gv = as_4d(gout);
                let (gx, gw) = conv::conv2d_backward(
                    &xv,
                    &wv,
                    &gv,
                    *stride,
                    *pad,
                    self.nodes[*x].needs_grad,
                    self.nodes[*w].needs_grad,
                );
                if let Some(gx) = gx {
                    push(grads, *x, gx.into_dyn());
                }
                if let Some(gw) = gw {
                    push(grads, *w, gw.into_dyn());
                }
            }
            Op::NearestUp2(x) => {
                let gv = as_4d(gout);
                let (n, c, h2, w2) = gv.dim();
                let (h, w) = (h2 / 2, w2 / 2);
                let mut gx = ndarray::Array4::<F>::zeros((n, c, h, w));
                for b in 0..n {
                    for ch in 0..c {
                        for i in 0..h {
                            for j in 0..w {
                                gx[[b, ch, i, j]] = gv[[b, ch, 2 * i, 2 * j]]
                                    + gv[[b, ch, 2 * i + 1, 2 * j]]
                                    + gv[[b, ch, 2 * i, 2 * j + 1]]
                                    + gv[[b, ch, 2 * i + 1, 2 * j + 1]];
                            }
                        }
                    }
                }
                push(grads, *x, gx.into_dyn());
            }
            Op::ConcatChannels(parts) => {
                let gv = as_4d(gout);
                let mut offset = 0;
                for pid in parts {
                    let c = as_4d(self.val(*pid)).dim().1;
                    let slice = gv
                        .slice(ndarray::s![.., offset..offset + c, .., ..])
                        .to_owned();
                    push(grads, *pid, slice.into_dyn());
                    offset += c;
                }
            }
            Op::ConcatFeatures(parts) => {
                let gv = as_2d(gout);
                let mut offset = 0;
                for pid in parts {
                    let d = as_2d(self.val(*pid)).dim().1;
                    let slice = gv.slice(ndarray::s![.., offset..offset + d]).to_owned();
                    push(grads, *pid, slice.into_dyn());
                    offset += d;
                }
            }
            Op::Flatten(x) => {
                let g = gout
                    .to_owned()
                    .into_shape_with_order(self.val(*x).raw_dim())
                    .expect("flatten backward");
                push(grads, *x, g);
            }
            Op::BatchNormChannels { x, gamma, beta, eps } => {
                let xv = as_4d(self.val(*x));
                let g = as_1d(self.val(*gamma));
                let gv = as_4d(gout);
                let (n, c, h, w) = xv.dim();
                let count = F::from_f64((n * h * w) as f64);
                let epsf = F::from_f64(*eps);
                let mut gx = ndarray::Array4::<F>::zeros((n, c, h, w));
                let mut ggamma = Array1::<F>::zeros(c);
                let mut gbeta = Array1::<F>::zeros(c);
                for ch in 0..c {
                    let xs = xv.index_axis(Axis(1), ch);
                    let gs = gv.index_axis(Axis(1), ch);
                    let mean = xs.sum() / count;
                    let var = xs.mapv(|e| (e - mean) * (e - mean)).sum() / count;
                    let denom = (var + epsf).sqrt();
                    // accumulate reductions
                    let mut sum_dy = F::zero();
                    let mut sum_dy_xhat = F::zero();
                    ndarray::Zip::from(&xs).and(&gs).for_each(|&xe, &ge| {
                        sum_dy += ge;
                        sum_dy_xhat += ge * (xe - mean) / denom;
                    });
                    ggamma[ch] = sum_dy_xhat;
                    gbeta[ch] = sum_dy;
                    let gch = g[ch];
                    let mut gxs = gx.index_axis_mut(Axis(1), ch);
                    ndarray::Zip::from(&mut gxs).and(&xs).and(&gs).for_each(
                        |go, &xe, &ge| {
                            let xhat = (xe - mean) / denom;
                            *go = gch / denom
                                * (ge - sum_dy / count - xhat * sum_dy_xhat / count);
                        },
                    );
                }
                push(grads, *x, gx.into_dyn());
                push(grads, *gamma, ggamma.into_dyn());
                push(grads, *beta, gbeta.into_dyn());
            }
            Op::BatchNormFeatures { x, gamma, beta, eps } => {
                let xv = as_2d(self.val(*x));
                let g = as_1d(self.val(*gamma));
                let gv = as_2d(gout);
                let (n, d) = xv.dim();
                let count = F::from_f64(n as f64);
                let epsf = F::from_f64(*eps);
                let mut gx = Array2::<F>::zeros((n, d));
                let mut ggamma = Array1::<F>::zeros(d);
                let mut gbeta = Array1::<F>::zeros(d);
                for j in 0..d {
                    let xs = xv.index_axis(Axis(1), j);
                    let gs = gv.index_axis(Axis(1), j);
                    let mean = xs.sum() / count;
                    let var = xs.mapv(|e| (e - mean) * (e - mean)).sum() / count;
                    let denom = (var + epsf).sqrt();
                    let mut sum_dy = F::zero();
                    let mut sum_dy_xhat = F::zero();
                    ndarray::Zip::from(&xs).and(&gs).for_each(|&xe, &ge| {
                        sum_dy += ge;
                        sum_dy_xhat += ge * (xe - mean) / denom;
                    });
                    ggamma[j] = sum_dy_xhat;
                    gbeta[j] = sum_dy;
                    let gch = g[j];
                    let mut gxs = gx.index_axis_mut(Axis(1), j);
                    ndarray::Zip::from(&mut gxs).and(&xs).and(&gs).for_each(
                        |go, &xe, &ge| {
                            let xhat = (xe - mean) / denom;
                            *go = gch / denom
                                * (ge - sum_dy / count - xhat * sum_dy_xhat / count);
                        },
                    );
                }
                push(grads, *x, gx.into_dyn());
                push(grads, *gamma, ggamma.into_dyn());
                push(grads, *beta, gbeta.into_dyn());
            }
            Op::SumAll(x) => {
                let g0 = gout.iter().next().copied().expect("scalar grad");
                push(grads, *x, ArrayD::from_elem(self.val(*x).raw_dim(), g0));
            }
            Op::MeanAll(x) => {
                let g0 = gout.iter().next().copied().expect("scalar grad");
                let n = F::from_f64(self.val(*x).len() as f64);
                push(grads, *x, ArrayD::from_elem(self.val(*x).raw_dim(), g0 / n));
            }
            Op::SumRows(x) => {
                let xv = as_2d(self.val(*x));
                let gv = as_1d(gout);
                let (n, d) = xv.dim();
                let mut gx = Array2::<F>::zeros((n, d));
                for r in 0..n {
                    gx.row_mut(r).fill(gv[r]);
                }
                push(grads, *x, gx.into_dyn());
            }
            Op::CrossEntropyMean { scores, classes } => {
                let sv = as_4d(self.val(*scores));
                let (n, m, h, w) = sv.dim();
                let g0 = gout.iter().next().copied().expect("scalar grad");
                let npix = F::from_f64((n * h * w) as f64);
                let mut gs = ndarray::Array4::<F>::zeros((n, m, h, w));
                for b in 0..n {
                    for i in 0..h {
                        for j in 0..w {
                            let cls = classes[(b * h + i) * w + j];
                            let mut maxv = sv[[b, 0, i, j]];
                            for c in 1..m {
                                if sv[[b, c, i, j]] > maxv {
                                    maxv = sv[[b, c, i, j]];
                                }
                            }
                            let mut sumexp = F::zero();
                            for c in 0..m {
                                sumexp += (sv[[b, c, i, j]] - maxv).exp();
                            }
                            for c in 0..m {
                                let p = (sv[[b, c, i, j]] - maxv).exp() / sumexp;
                                let delta = if c == cls { F::one() } else { F::zero() };
                                gs[[b, c, i, j]] = g0 * (p - delta) / npix;
                            }
                        }
                    }
                }
                push(grads, *scores, gs.into_dyn());
            }
        }
    }
}

fn scalar_array<F: Scalar>(v: F) -> ArrayD<F> {
    ArrayD::from_elem(IxDyn(&[1]), v)
}

fn softplus_stable<F: Scalar>(x: F) -> F {
    // ln(1 + e^x) = max(x, 0) + ln(1 + e^-|x|)
    let zero = F::zero();
    let m = if x > zero { x } else { zero };
    m + (F::one() + (-x.abs()).exp()).ln()
}

fn sigmoid_stable<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub(crate) fn as_2d<F: Scalar>(a: &ArrayD<F>) -> ndarray::ArrayView2<'_, F> {
    a.view().into_dimensionality::<Ix2>().expect("expected 2-d tensor")
}

pub(crate) fn as_4d<F: Scalar>(a: &ArrayD<F>) -> ndarray::ArrayView4<'_, F> {
    a.view().into_dimensionality::<Ix4>().expect("expected 4-d tensor")
}

pub(crate) fn as_1d<F: Scalar>(a: &ArrayD<F>) -> ndarray::ArrayView1<'_, F> {
    a.view()
        .into_dimensionality::<ndarray::Ix1>()
        .expect("expected 1-d tensor")
}
