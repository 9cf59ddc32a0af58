//! 1D convolution (cross-correlation convention) with same-length zero
//! padding and stride 1.
//!
//! `out[b,o,i] = bias[o] + sum_{c,k} w[o,c,k] * xpad[b,c,i+k]` where `xpad`
//! is zero-padded by `(kernel-1)/2` on both sides. The kernel-3 path is
//! register-blocked over output channels; anything else falls back to a
//! plain loop.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor3;
use super::Scalar;

/// Output channels processed together in the blocked kernel-3 path.
const OUT_BLOCK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<F> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `(out, in, kernel)` row-major.
    pub weights: Vec<F>,
    pub bias: Option<Vec<F>>,
}

/// Parameter gradients of one convolution, same layout as the layer.
#[derive(Debug, Clone)]
pub struct Conv1dGrads<F> {
    pub weights: Vec<F>,
    pub bias: Option<Vec<F>>,
}

impl<F: Scalar> Conv1d<F> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize, bias: bool) -> Self {
        assert!(kernel % 2 == 1, "kernel size must be odd, got {kernel}");
        assert!(in_channels > 0 && out_channels > 0);
        Self {
            in_channels,
            out_channels,
            kernel,
            weights: vec![F::zero(); out_channels * in_channels * kernel],
            bias: bias.then(|| vec![F::zero(); out_channels]),
        }
    }

    /// Kaiming-style init: `N(0, sqrt(2 / fan_in))` weights, zero bias.
    pub fn kaiming<R: Rng>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(in_channels, out_channels, kernel, bias);
        let std = (2.0 / (in_channels * kernel) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid std");
        for w in &mut layer.weights {
            *w = F::from_f64(normal.sample(rng));
        }
        layer
    }

    #[inline]
    pub fn weight(&self, o: usize, c: usize, k: usize) -> F {
        self.weights[(o * self.in_channels + c) * self.kernel + k]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }

    pub fn forward(&self, x: &Tensor3<F>) -> Tensor3<F> {
        assert_eq!(
            x.channels, self.in_channels,
            "conv1d input has {} channels, layer expects {}",
            x.channels, self.in_channels
        );
        let mut out = Tensor3::zeros(x.batch, self.out_channels, x.len);
        if self.kernel == 3 {
            self.forward_k3(x, &mut out);
        } else {
            self.forward_generic(x, &mut out);
        }
        out
    }

    /// Blocked kernel-3 path: `OUT_BLOCK` fused output rows per pass with the
    /// length axis tiled so the output tiles stay cache-resident across the
    /// input-channel loop. Edge bins are handled per row afterwards.
    fn forward_k3(&self, x: &Tensor3<F>, out: &mut Tensor3<F>) {
        let len = x.len;
        let in_ch = self.in_channels;
        if len < 3 {
            self.forward_generic(x, out);
            return;
        }
        const TILE: usize = 1024;
        for b in 0..x.batch {
            let xb = x.item(b);
            let ob = out.item_mut(b);
            let mut o = 0;
            while o < self.out_channels {
                let block = (self.out_channels - o).min(OUT_BLOCK);
                let rows = &mut ob[o * len..(o + block) * len];
                if let Some(bias) = &self.bias {
                    for (j, row) in rows.chunks_mut(len).enumerate() {
                        row.fill(bias[o + j]);
                    }
                }
                if block == OUT_BLOCK {
                    let (r0, rest) = rows.split_at_mut(len);
                    let (r1, rest) = rest.split_at_mut(len);
                    let (r2, r3) = rest.split_at_mut(len);
                    // interior tiles: fused 4-row update, x windows in-bounds
                    let mut start = 1;
                    while start < len - 1 {
                        let end = (start + TILE).min(len - 1);
                        for c in 0..in_ch {
                            let xr = &xb[c * len..(c + 1) * len];
                            let w = [
                                self.weight_triplet(o, c),
                                self.weight_triplet(o + 1, c),
                                self.weight_triplet(o + 2, c),
                                self.weight_triplet(o + 3, c),
                            ];
                            fused_interior_k3(
                                &mut r0[start..end],
                                &mut r1[start..end],
                                &mut r2[start..end],
                                &mut r3[start..end],
                                &xr[start - 1..end + 1],
                                &w,
                            );
                        }
                        start = end;
                    }
                    // edge bins
                    for (j, row) in [&mut *r0, &mut *r1, &mut *r2, &mut *r3]
                        .into_iter()
                        .enumerate()
                    {
                        for c in 0..in_ch {
                            let xr = &xb[c * len..(c + 1) * len];
                            let w = self.weight_triplet(o + j, c);
                            row[0] = row[0] + w[1] * xr[0] + w[2] * xr[1];
                            row[len - 1] = row[len - 1] + w[0] * xr[len - 2] + w[1] * xr[len - 1];
                        }
                    }
                } else {
                    for (j, row) in rows.chunks_mut(len).enumerate() {
                        for c in 0..in_ch {
                            let xr = &xb[c * len..(c + 1) * len];
                            accumulate_k3(row, xr, self.weight_triplet(o + j, c));
                        }
                    }
                }
                o += block;
            }
        }
    }

    #[inline]
    fn weight_triplet(&self, o: usize, c: usize) -> [F; 3] {
        let base = (o * self.in_channels + c) * 3;
        [
            self.weights[base],
            self.weights[base + 1],
            self.weights[base + 2],
        ]
    }

    fn forward_generic(&self, x: &Tensor3<F>, out: &mut Tensor3<F>) {
        let len = x.len as isize;
        let pad = (self.kernel / 2) as isize;
        for b in 0..x.batch {
            for o in 0..self.out_channels {
                let bias = self.bias.as_ref().map_or(F::zero(), |bv| bv[o]);
                for i in 0..x.len {
                    let mut acc = bias;
                    for c in 0..self.in_channels {
                        let xr = x.row(b, c);
                        for k in 0..self.kernel {
                            let j = i as isize + k as isize - pad;
                            if j >= 0 && j < len {
                                acc = acc + self.weight(o, c, k) * xr[j as usize];
                            }
                        }
                    }
                    out.row_mut(b, o)[i] = acc;
                }
            }
        }
    }

    /// Exact gradients of the forward map.
    ///
    /// Returns `(grad_x, grads)` for upstream gradient `grad_out`.
    pub fn backward(&self, x: &Tensor3<F>, grad_out: &Tensor3<F>) -> (Tensor3<F>, Conv1dGrads<F>) {
        assert_eq!(x.channels, self.in_channels, "conv1d backward: input channels");
        assert_eq!(
            grad_out.shape(),
            (x.batch, self.out_channels, x.len),
            "conv1d backward: grad_out shape"
        );

        let mut grad_w = vec![F::zero(); self.weights.len()];
        let mut grad_b = self.bias.as_ref().map(|b| vec![F::zero(); b.len()]);
        let mut grad_x = Tensor3::zeros(x.batch, x.channels, x.len);

        let len = x.len as isize;
        let pad = (self.kernel / 2) as isize;

        for b in 0..x.batch {
            for o in 0..self.out_channels {
                let go = grad_out.row(b, o);
                if let Some(gb) = &mut grad_b {
                    gb[o] = gb[o] + go.iter().copied().sum::<F>();
                }
                for c in 0..self.in_channels {
                    let xr = x.row(b, c);
                    let base = (o * self.in_channels + c) * self.kernel;
                    for k in 0..self.kernel {
                        let shift = k as isize - pad;
                        // grad_w[o,c,k] += sum_i go[i] * x[i + shift]
                        let (i_lo, i_hi) = overlap(shift, len);
                        let mut acc = F::zero();
                        for i in i_lo..i_hi {
                            acc = acc + go[i as usize] * xr[(i + shift) as usize];
                        }
                        grad_w[base + k] = grad_w[base + k] + acc;
                    }
                }
            }
            // grad_x[c,j] = sum_{o,k} w[o,c,k] * go[o, j - (k - pad)]
            for c in 0..self.in_channels {
                let gx = grad_x.row_mut(b, c);
                for o in 0..self.out_channels {
                    let go = grad_out.row(b, o);
                    let base = (o * self.in_channels + c) * self.kernel;
                    for k in 0..self.kernel {
                        let shift = pad - k as isize;
                        let (j_lo, j_hi) = overlap(shift, len);
                        let w = self.weights[base + k];
                        for j in j_lo..j_hi {
                            gx[j as usize] = gx[j as usize] + w * go[(j + shift) as usize];
                        }
                    }
                }
            }
        }

        (
            grad_x,
            Conv1dGrads {
                weights: grad_w,
                bias: grad_b,
            },
        )
    }
}

/// Index range `i` such that both `i` and `i + shift` are in `[0, len)`.
#[inline]
fn overlap(shift: isize, len: isize) -> (isize, isize) {
    ((-shift).max(0), (len - shift).min(len))
}

/// Fused interior update of four output rows against one input row.
///
/// `rK[i] += wK[0]*xw[i] + wK[1]*xw[i+1] + wK[2]*xw[i+2]` where `xw` is the
/// input window starting one bin before the rows' first element. `mul_add`
/// keeps the loop on FMA units.
#[inline]
fn fused_interior_k3<F: Scalar>(
    r0: &mut [F],
    r1: &mut [F],
    r2: &mut [F],
    r3: &mut [F],
    xw: &[F],
    w: &[[F; 3]; 4],
) {
    debug_assert_eq!(xw.len(), r0.len() + 2);
    let [w0, w1, w2, w3] = w;
    let rows = r0.iter_mut().zip(r1).zip(r2).zip(r3);
    for (win, (((a, b), c), d)) in xw.windows(3).zip(rows) {
        let (xm, x0, xp) = (win[0], win[1], win[2]);
        *a = w0[2].mul_add(xp, w0[1].mul_add(x0, w0[0].mul_add(xm, *a)));
        *b = w1[2].mul_add(xp, w1[1].mul_add(x0, w1[0].mul_add(xm, *b)));
        *c = w2[2].mul_add(xp, w2[1].mul_add(x0, w2[0].mul_add(xm, *c)));
        *d = w3[2].mul_add(xp, w3[1].mul_add(x0, w3[0].mul_add(xm, *d)));
    }
}

/// `row += w[0]*x[i-1] + w[1]*x[i] + w[2]*x[i+1]` with zero padding.
#[inline]
fn accumulate_k3<F: Scalar>(row: &mut [F], x: &[F], w: [F; 3]) {
    let len = row.len();
    debug_assert_eq!(x.len(), len);
    if len == 0 {
        return;
    }
    if len == 1 {
        row[0] = row[0] + w[1] * x[0];
        return;
    }
    row[0] = row[0] + w[1] * x[0] + w[2] * x[1];
    let interior = len - 2;
    // windows of 3 over x align x[i-1], x[i], x[i+1] with row[1..len-1]
    let dst = &mut row[1..1 + interior];
    let xm1 = &x[0..interior];
    let x0 = &x[1..1 + interior];
    let xp1 = &x[2..2 + interior];
    for i in 0..interior {
        dst[i] = dst[i] + w[0] * xm1[i] + w[1] * x0[i] + w[2] * xp1[i];
    }
    row[len - 1] = row[len - 1] + w[0] * x[len - 2] + w[1] * x[len - 1];
}
