//! Layer primitives with exact backward passes.
//!
//! Parallel strategy: every helper writes disjoint output planes (or whole
//! per-channel slices) per task, and all reductions run in a fixed
//! (batch, height, width) order inside one task — so sequential and rayon
//! execution give bitwise-identical results.

use super::{Matrix, NnError, Scalar, Tensor4};
use crate::parallel;

pub const KERNEL: usize = 3;

/// Zero-pad each spatial plane by one on every side ("same" padding for a
/// 3x3 kernel).
fn pad_spatial<S: Scalar>(x: &Tensor4<S>) -> Tensor4<S> {
    let (h, w) = (x.h, x.w);
    let (ph, pw) = (h + 2, w + 2);
    let mut out = Tensor4::zeros(x.b, x.c, ph, pw);
    parallel::for_each_chunk_mut(&mut out.data, ph * pw, |plane_idx, plane| {
        let b = plane_idx / x.c;
        let c = plane_idx % x.c;
        let src = x.plane(b, c);
        for row in 0..h {
            let dst = &mut plane[(row + 1) * pw + 1..(row + 1) * pw + 1 + w];
            dst.copy_from_slice(&src[row * w..(row + 1) * w]);
        }
    });
    out
}

pub struct ConvCache<S> {
    /// BN output zero-padded to (B, Cin, H+2, W+2); kept for the weight
    /// gradient.
    pub padded_in: Tensor4<S>,
}

/// 3x3 stride-1 same-padding cross-correlation plus bias.
pub fn conv2d_forward<S: Scalar>(
    x: &Tensor4<S>,
    weight: &[S],
    bias: &[S],
    in_c: usize,
    out_c: usize,
) -> Result<(Tensor4<S>, ConvCache<S>), NnError> {
    if x.c != in_c || weight.len() != out_c * in_c * KERNEL * KERNEL || bias.len() != out_c {
        return Err(NnError::ShapeError(format!(
            "conv2d: input {}ch, expected {}ch ({} weights, {} biases)",
            x.c,
            in_c,
            weight.len(),
            bias.len()
        )));
    }
    let (h, w) = (x.h, x.w);
    let padded = pad_spatial(x);
    let pw = w + 2;
    let mut out = Tensor4::zeros(x.b, out_c, h, w);
    parallel::for_each_chunk_mut(&mut out.data, h * w, |plane_idx, plane| {
        let b = plane_idx / out_c;
        let co = plane_idx % out_c;
        for ci in 0..in_c {
            let src = padded.plane(b, ci);
            let k = &weight[(co * in_c + ci) * 9..(co * in_c + ci) * 9 + 9];
            accumulate_taps(plane, src, k, h, w, pw);
        }
        let bv = bias[co];
        for v in plane.iter_mut() {
            *v += bv;
        }
    });
    Ok((out, ConvCache { padded_in: padded }))
}

/// dst[row, col] += sum over the 3x3 taps of k applied to the padded
/// source plane. One pass over the output; the column loop has independent
/// lanes so it vectorizes.
#[inline]
fn accumulate_taps<S: Scalar>(dst: &mut [S], src: &[S], k: &[S], h: usize, w: usize, pw: usize) {
    for row in 0..h {
        let r0 = &src[row * pw..row * pw + w + 2];
        let r1 = &src[(row + 1) * pw..(row + 1) * pw + w + 2];
        let r2 = &src[(row + 2) * pw..(row + 2) * pw + w + 2];
        let d = &mut dst[row * w..(row + 1) * w];
        for col in 0..w {
            d[col] += k[0] * r0[col]
                + k[1] * r0[col + 1]
                + k[2] * r0[col + 2]
                + k[3] * r1[col]
                + k[4] * r1[col + 1]
                + k[5] * r1[col + 2]
                + k[6] * r2[col]
                + k[7] * r2[col + 1]
                + k[8] * r2[col + 2];
        }
    }
}

/// Gradients of the convolution. `compute_dw` is false for frozen layers:
/// the input gradient still flows, the (unused) weight/bias gradients come
/// back empty.
pub fn conv2d_backward<S: Scalar>(
    cache: &ConvCache<S>,
    weight: &[S],
    dout: &Tensor4<S>,
    in_c: usize,
    out_c: usize,
    compute_dw: bool,
) -> (Tensor4<S>, Vec<S>, Vec<S>) {
    let (h, w) = (dout.h, dout.w);
    let b_count = dout.b;
    let pw = w + 2;

    let dout_pad = pad_spatial(dout);
    let mut dx = Tensor4::zeros(b_count, in_c, h, w);
    parallel::for_each_chunk_mut(&mut dx.data, h * w, |plane_idx, plane| {
        let b = plane_idx / in_c;
        let ci = plane_idx % in_c;
        for co in 0..out_c {
            let src = dout_pad.plane(b, co);
            // flipped kernel for the transposed convolution
            let wbase = (co * in_c + ci) * 9;
            let k = [
                weight[wbase + 8],
                weight[wbase + 7],
                weight[wbase + 6],
                weight[wbase + 5],
                weight[wbase + 4],
                weight[wbase + 3],
                weight[wbase + 2],
                weight[wbase + 1],
                weight[wbase],
            ];
            accumulate_taps(plane, src, &k, h, w, pw);
        }
    });

    if !compute_dw {
        return (dx, Vec::new(), Vec::new());
    }

    let mut dw = vec![S::ZERO; out_c * in_c * 9];
    parallel::for_each_chunk_mut(&mut dw, in_c * 9, |co, dw_slice| {
        for b in 0..b_count {
            let g = dout.plane(b, co);
            for ci in 0..in_c {
                let src = cache.padded_in.plane(b, ci);
                // nine independent accumulator chains, one pass over dout
                let mut acc = [S::ZERO; 9];
                for row in 0..h {
                    let g_row = &g[row * w..(row + 1) * w];
                    let r0 = &src[row * pw..row * pw + w + 2];
                    let r1 = &src[(row + 1) * pw..(row + 1) * pw + w + 2];
                    let r2 = &src[(row + 2) * pw..(row + 2) * pw + w + 2];
                    for col in 0..w {
                        let gv = g_row[col];
                        acc[0] += gv * r0[col];
                        acc[1] += gv * r0[col + 1];
                        acc[2] += gv * r0[col + 2];
                        acc[3] += gv * r1[col];
                        acc[4] += gv * r1[col + 1];
                        acc[5] += gv * r1[col + 2];
                        acc[6] += gv * r2[col];
                        acc[7] += gv * r2[col + 1];
                        acc[8] += gv * r2[col + 2];
                    }
                }
                for (slot, a) in dw_slice[ci * 9..ci * 9 + 9].iter_mut().zip(acc) {
                    *slot += a;
                }
            }
        }
    });

    let db = parallel::map_indexed(out_c, |co| {
        let mut acc = S::ZERO;
        for b in 0..b_count {
            for v in dout.plane(b, co) {
                acc += *v;
            }
        }
        acc
    });

    (dx, dw, db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

pub struct BnCache<S> {
    pub xhat: Tensor4<S>,
    pub inv_std: Vec<S>,
    pub mode: BnMode,
}

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

/// New running statistics produced by a Train-mode forward pass; the caller
/// decides when to store them.
pub struct BnRunningUpdate<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

/// Batch normalization over (batch, height, width) per channel.
///
/// Train mode normalizes by batch statistics (population variance, floored
/// at eps) and returns running stats blended with momentum 0.9; infer mode
/// uses the stored running stats and returns no update.
pub fn batchnorm_forward<S: Scalar>(
    x: &Tensor4<S>,
    gamma: &[S],
    beta: &[S],
    running_mean: &[S],
    running_var: &[S],
    mode: BnMode,
) -> Result<(Tensor4<S>, BnCache<S>, Option<BnRunningUpdate<S>>), NnError> {
    let c_count = x.c;
    if gamma.len() != c_count || beta.len() != c_count || running_mean.len() != c_count {
        return Err(NnError::ShapeError(format!(
            "batchnorm: {} channels vs {} parameters",
            c_count,
            gamma.len()
        )));
    }
    let plane = x.plane_len();
    let n = (x.b * plane) as f64;
    let eps = S::from_f64(BN_EPS);

    let mut update = None;
    let (means, inv_stds): (Vec<S>, Vec<S>) = match mode {
        BnMode::Train => {
            let stats = parallel::map_indexed(c_count, |c| {
                let mut sum = S::ZERO;
                for b in 0..x.b {
                    for v in x.plane(b, c) {
                        sum += *v;
                    }
                }
                let mean = sum / S::from_f64(n);
                let mut var_sum = S::ZERO;
                for b in 0..x.b {
                    for v in x.plane(b, c) {
                        let d = *v - mean;
                        var_sum += d * d;
                    }
                }
                (mean, var_sum / S::from_f64(n))
            });
            let momentum = S::from_f64(BN_MOMENTUM);
            let one_minus = S::ONE - momentum;
            update = Some(BnRunningUpdate {
                mean: stats
                    .iter()
                    .enumerate()
                    .map(|(c, (m, _))| momentum * running_mean[c] + one_minus * *m)
                    .collect(),
                var: stats
                    .iter()
                    .enumerate()
                    .map(|(c, (_, v))| momentum * running_var[c] + one_minus * *v)
                    .collect(),
            });
            stats
                .into_iter()
                .map(|(mean, var)| (mean, S::ONE / (var + eps).sqrt()))
                .unzip()
        }
        BnMode::Infer => (0..c_count)
            .map(|c| (running_mean[c], S::ONE / (running_var[c] + eps).sqrt()))
            .unzip(),
    };

    let mut xhat = Tensor4::zeros(x.b, x.c, x.h, x.w);
    let mut y = Tensor4::zeros(x.b, x.c, x.h, x.w);
    parallel::for_each_chunk_mut(&mut xhat.data, plane, |plane_idx, dst| {
        let b = plane_idx / c_count;
        let c = plane_idx % c_count;
        let src = x.plane(b, c);
        let (m, is) = (means[c], inv_stds[c]);
        for (d, s) in dst.iter_mut().zip(src) {
            *d = (*s - m) * is;
        }
    });
    parallel::for_each_chunk_mut(&mut y.data, plane, |plane_idx, dst| {
        let c = plane_idx % c_count;
        let src = xhat.plane(plane_idx / c_count, c);
        let (g, bt) = (gamma[c], beta[c]);
        for (d, s) in dst.iter_mut().zip(src) {
            *d = g * *s + bt;
        }
    });
    Ok((y, BnCache { xhat, inv_std: inv_stds, mode }, update))
}

/// Full batch-norm gradient, including the batch-statistics terms in Train
/// mode: dx = gamma * inv_std / N * (N dy - sum(dy) - xhat * sum(dy xhat)).
pub fn batchnorm_backward<S: Scalar>(
    cache: &BnCache<S>,
    gamma: &[S],
    dy: &Tensor4<S>,
) -> (Tensor4<S>, Vec<S>, Vec<S>) {
    let c_count = dy.c;
    let plane = dy.plane_len();
    let n = S::from_f64((dy.b * plane) as f64);

    let sums = parallel::map_indexed(c_count, |c| {
        let mut sum_dy = S::ZERO;
        let mut sum_dy_xhat = S::ZERO;
        for b in 0..dy.b {
            let g = dy.plane(b, c);
            let xh = cache.xhat.plane(b, c);
            for (gv, xv) in g.iter().zip(xh) {
                sum_dy += *gv;
                sum_dy_xhat += *gv * *xv;
            }
        }
        (sum_dy, sum_dy_xhat)
    });

    let mut dx = Tensor4::zeros(dy.b, dy.c, dy.h, dy.w);
    parallel::for_each_chunk_mut(&mut dx.data, plane, |plane_idx, dst| {
        let b = plane_idx / c_count;
        let c = plane_idx % c_count;
        let g = dy.plane(b, c);
        let xh = cache.xhat.plane(b, c);
        let scale = gamma[c] * cache.inv_std[c];
        match cache.mode {
            BnMode::Train => {
                let (sum_dy, sum_dy_xhat) = sums[c];
                let inv_n = S::ONE / n;
                for i in 0..dst.len() {
                    dst[i] = scale * inv_n * (n * g[i] - sum_dy - xh[i] * sum_dy_xhat);
                }
            }
            BnMode::Infer => {
                for i in 0..dst.len() {
                    dst[i] = scale * g[i];
                }
            }
        }
    });

    let dgamma = sums.iter().map(|&(_, s)| s).collect();
    let dbeta = sums.iter().map(|&(s, _)| s).collect();
    (dx, dgamma, dbeta)
}

/// Elementwise max(0, x).
pub fn relu_forward<S: Scalar>(x: &Tensor4<S>) -> Tensor4<S> {
    let mut y = x.clone();
    parallel::for_each_chunk_mut(&mut y.data, x.plane_len().max(1), |_, chunk| {
        for v in chunk.iter_mut() {
            *v = v.maximum(S::ZERO);
        }
    });
    y
}

/// dx = dy where the forward output was positive (derivative 0 at the kink).
pub fn relu_backward<S: Scalar>(y: &Tensor4<S>, dy: &Tensor4<S>) -> Tensor4<S> {
    let mut dx = dy.clone();
    parallel::for_each_chunk_mut(&mut dx.data, dy.plane_len().max(1), |idx, chunk| {
        let base = idx * dy.plane_len().max(1);
        for (i, v) in chunk.iter_mut().enumerate() {
            if !(y.data[base + i] > S::ZERO) {
                *v = S::ZERO;
            }
        }
    });
    dx
}

pub struct PoolCache {
    pub argmax: Vec<u32>,
    pub in_h: usize,
    pub in_w: usize,
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped
/// (floor) and a dimension of size 1 passes through unchanged. Ties pick
/// the first element in row-major scan order.
pub fn maxpool_forward<S: Scalar>(x: &Tensor4<S>) -> (Tensor4<S>, PoolCache) {
    let kh = if x.h >= 2 { 2 } else { 1 };
    let kw = if x.w >= 2 { 2 } else { 1 };
    let oh = if x.h >= 2 { x.h / 2 } else { 1 };
    let ow = if x.w >= 2 { x.w / 2 } else { 1 };
    let mut y = Tensor4::zeros(x.b, x.c, oh, ow);
    let mut argmax = vec![0u32; x.b * x.c * oh * ow];

    // one task per (b, c) plane; the argmax rows live in the same chunks
    let out_plane = oh * ow;
    parallel::for_each_chunk_mut(&mut argmax, out_plane, |plane_idx, am| {
        let b = plane_idx / x.c;
        let c = plane_idx % x.c;
        let src = x.plane(b, c);
        for o_row in 0..oh {
            for o_col in 0..ow {
                let mut best_idx = (o_row * kh) * x.w + o_col * kw;
                let mut best = src[best_idx];
                for dh in 0..kh {
                    for dw in 0..kw {
                        let idx = (o_row * kh + dh) * x.w + o_col * kw + dw;
                        if src[idx] > best {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                }
                am[o_row * ow + o_col] = best_idx as u32;
            }
        }
    });
    parallel::for_each_chunk_mut(&mut y.data, out_plane, |plane_idx, dst| {
        let b = plane_idx / x.c;
        let c = plane_idx % x.c;
        let src = x.plane(b, c);
        for (i, v) in dst.iter_mut().enumerate() {
            *v = src[argmax[plane_idx * out_plane + i] as usize];
        }
    });
    (y, PoolCache { argmax, in_h: x.h, in_w: x.w })
}

pub fn maxpool_backward<S: Scalar>(cache: &PoolCache, dy: &Tensor4<S>) -> Tensor4<S> {
    let mut dx = Tensor4::zeros(dy.b, dy.c, cache.in_h, cache.in_w);
    let in_plane = cache.in_h * cache.in_w;
    let out_plane = dy.plane_len();
    parallel::for_each_chunk_mut(&mut dx.data, in_plane, |plane_idx, dst| {
        let g = dy.plane(plane_idx / dy.c, plane_idx % dy.c);
        let am = &cache.argmax[plane_idx * out_plane..(plane_idx + 1) * out_plane];
        for (i, &idx) in am.iter().enumerate() {
            dst[idx as usize] += g[i];
        }
    });
    dx
}

/// Global average pooling: mean over (height, width) per channel.
pub fn gap_forward<S: Scalar>(x: &Tensor4<S>) -> Matrix<S> {
    let plane = x.plane_len();
    let scale = S::ONE / S::from_f64(plane as f64);
    let data = parallel::map_indexed(x.b * x.c, |plane_idx| {
        let mut acc = S::ZERO;
        for v in x.plane(plane_idx / x.c, plane_idx % x.c) {
            acc += *v;
        }
        acc * scale
    });
    Matrix::from_vec(x.b, x.c, data)
}

pub fn gap_backward<S: Scalar>(dy: &Matrix<S>, c: usize, h: usize, w: usize) -> Tensor4<S> {
    let mut dx = Tensor4::zeros(dy.rows, c, h, w);
    let plane = h * w;
    let scale = S::ONE / S::from_f64(plane as f64);
    parallel::for_each_chunk_mut(&mut dx.data, plane, |plane_idx, dst| {
        let g = dy.at(plane_idx / c, plane_idx % c) * scale;
        for v in dst.iter_mut() {
            *v = g;
        }
    });
    dx
}

/// Affine map: out = x W + b, with W stored row-major (in_dim x out_dim).
pub fn dense_forward<S: Scalar>(x: &Matrix<S>, weight: &[S], bias: &[S], out_dim: usize) -> Matrix<S> {
    assert_eq!(weight.len(), x.cols * out_dim, "dense weight shape");
    let mut out = Matrix::zeros(x.rows, out_dim);
    parallel::for_each_chunk_mut(&mut out.data, out_dim, |b, row| {
        row.copy_from_slice(bias);
        let xb = x.row(b);
        for (d, &xv) in xb.iter().enumerate() {
            let wrow = &weight[d * out_dim..(d + 1) * out_dim];
            for (r, wv) in row.iter_mut().zip(wrow) {
                *r += xv * *wv;
            }
        }
    });
    out
}

pub fn dense_backward<S: Scalar>(
    x: &Matrix<S>,
    weight: &[S],
    dout: &Matrix<S>,
) -> (Matrix<S>, Vec<S>, Vec<S>) {
    let (in_dim, out_dim) = (x.cols, dout.cols);
    let mut dx = Matrix::zeros(x.rows, in_dim);
    parallel::for_each_chunk_mut(&mut dx.data, in_dim, |b, row| {
        let g = dout.row(b);
        for (d, r) in row.iter_mut().enumerate() {
            let wrow = &weight[d * out_dim..(d + 1) * out_dim];
            let mut acc = S::ZERO;
            for (wv, gv) in wrow.iter().zip(g) {
                acc += *wv * *gv;
            }
            *r = acc;
        }
    });
    let mut dw = vec![S::ZERO; in_dim * out_dim];
    parallel::for_each_chunk_mut(&mut dw, out_dim, |d, row| {
        for b in 0..x.rows {
            let xv = x.at(b, d);
            let g = dout.row(b);
            for (r, gv) in row.iter_mut().zip(g) {
                *r += xv * *gv;
            }
        }
    });
    let mut db = vec![S::ZERO; out_dim];
    for b in 0..dout.rows {
        for (d, g) in db.iter_mut().zip(dout.row(b)) {
            *d += *g;
        }
    }
    (dx, dw, db)
}

/// Row-wise softmax with max subtraction for stability.
pub fn softmax_rows<S: Scalar>(logits: &Matrix<S>) -> Matrix<S> {
    let mut out = logits.clone();
    parallel::for_each_chunk_mut(&mut out.data, logits.cols, |_, row| {
        let mut max = row[0];
        for v in row.iter() {
            max = max.maximum(*v);
        }
        let mut sum = S::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    });
    out
}
