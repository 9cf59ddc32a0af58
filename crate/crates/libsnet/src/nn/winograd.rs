//! Winograd F(4,3) fast path for kernel-3 same-padding convolution chains.
//!
//! Four outputs per tile cost six multiplies in the transformed domain
//! instead of twelve, turning the channel contraction into six small matrix
//! products. Activations stay in a tile-major layout (`4 x tiles` per
//! channel) across chained layers so interleaving is paid only at the ends
//! of the chain, and the contraction + inverse transform run fused over
//! column panels that stay cache-resident.
//!
//! This path is used for eval-mode inference; training and the reference
//! forward use the direct kernels in [`super::conv`].

use super::Scalar;

/// Tile width of F(4,3): four outputs per tile.
pub const TILE: usize = 4;
/// Transform points per tile.
const POINTS: usize = 6;
/// Column panel width of the fused contraction.
const NR: usize = 64;

/// Number of tiles covering a row of length `n`, plus one zero guard tile.
pub fn tiles_for(n: usize) -> usize {
    n.div_ceil(TILE) + 1
}

fn padded(nt: usize) -> usize {
    nt.div_ceil(NR) * NR
}

/// Scatter a contiguous row into tile-major form: `out[s][t] = x[4t + s]`,
/// zero beyond `x.len()`.
pub fn pack_row<F: Scalar>(x: &[F], nt: usize, out: &mut [F]) {
    assert_eq!(out.len(), TILE * nt);
    out.fill(F::zero());
    for s in 0..TILE {
        let dst = &mut out[s * nt..(s + 1) * nt];
        let mut i = s;
        let mut t = 0;
        while i < x.len() {
            dst[t] = x[i];
            i += TILE;
            t += 1;
        }
    }
}

/// Gather tile-major form back into a contiguous row of length `n`.
pub fn unpack_row<F: Scalar>(tiles: &[F], nt: usize, out: &mut [F]) {
    assert_eq!(tiles.len(), TILE * nt);
    for s in 0..TILE {
        let src = &tiles[s * nt..(s + 1) * nt];
        let mut i = s;
        let mut t = 0;
        while i < out.len() {
            out[i] = src[t];
            i += TILE;
            t += 1;
        }
    }
}

/// `G g` for one 3-tap filter: the six transformed weights.
pub fn transform_kernel<F: Scalar>(g: [F; 3]) -> [F; POINTS] {
    let quarter = F::from_f64(0.25);
    let sixth = F::from_f64(1.0 / 6.0);
    let twelfth = F::from_f64(1.0 / 12.0);
    let twenty4 = F::from_f64(1.0 / 24.0);
    [
        g[0] * quarter,
        -(g[0] + g[1] + g[2]) * sixth,
        (-g[0] + g[1] - g[2]) * sixth,
        g[0] * twenty4 + g[1] * twelfth + g[2] * sixth,
        g[0] * twenty4 - g[1] * twelfth + g[2] * sixth,
        g[2],
    ]
}

/// One folded conv layer in the transformed domain.
#[derive(Debug, Clone)]
pub struct WinogradLayer<F> {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `POINTS` matrices of shape `(out, in)`, row-major, concatenated.
    pub v: Vec<F>,
    pub bias: Vec<F>,
    pub relu: bool,
}

impl<F: Scalar> WinogradLayer<F> {
    /// Build from direct weights `(out, in, 3)` with per-output bias;
    /// `relu` fuses the activation into the output transform.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        weights: &[F],
        bias: &[F],
        relu: bool,
    ) -> Self {
        assert_eq!(weights.len(), out_channels * in_channels * 3);
        assert_eq!(bias.len(), out_channels);
        let mut v = vec![F::zero(); POINTS * out_channels * in_channels];
        for o in 0..out_channels {
            for c in 0..in_channels {
                let base = (o * in_channels + c) * 3;
                let tk = transform_kernel([weights[base], weights[base + 1], weights[base + 2]]);
                for (j, &val) in tk.iter().enumerate() {
                    v[(j * out_channels + o) * in_channels + c] = val;
                }
            }
        }
        Self {
            in_channels,
            out_channels,
            v,
            bias: bias.to_vec(),
            relu,
        }
    }
}

/// Reusable buffers for a chain evaluation.
#[derive(Debug, Default)]
pub struct WinogradScratch<F> {
    tiles_a: Vec<F>,
    tiles_b: Vec<F>,
    u: Vec<F>,
    m_panel: Vec<F>,
}

impl<F: Scalar> WinogradScratch<F> {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Run a chain of layers over one signal row. Returns the final row of the
/// same length.
pub fn run_chain<F: Scalar>(
    layers: &[WinogradLayer<F>],
    signal: &[F],
    scratch: &mut WinogradScratch<F>,
) -> Vec<F> {
    assert!(!layers.is_empty());
    assert_eq!(layers[0].in_channels, 1, "chain starts from one channel");
    let n = signal.len();
    let nt = tiles_for(n);
    let ntp = padded(nt);
    let max_ch = layers
        .iter()
        .map(|l| l.in_channels.max(l.out_channels))
        .max()
        .unwrap();

    scratch.tiles_a.clear();
    scratch.tiles_a.resize(max_ch * TILE * nt, F::zero());
    scratch.tiles_b.clear();
    scratch.tiles_b.resize(max_ch * TILE * nt, F::zero());
    scratch.u.clear();
    scratch.u.resize(POINTS * max_ch * ntp, F::zero());
    scratch.m_panel.clear();
    scratch.m_panel.resize(POINTS * max_ch * NR, F::zero());

    pack_row(signal, nt, &mut scratch.tiles_a[..TILE * nt]);

    let mut in_buf_is_a = true;
    for layer in layers {
        let (input, output) = if in_buf_is_a {
            (&scratch.tiles_a, &mut scratch.tiles_b)
        } else {
            (&scratch.tiles_b, &mut scratch.tiles_a)
        };
        layer_forward(
            layer,
            input,
            output,
            n,
            nt,
            &mut scratch.u,
            &mut scratch.m_panel,
        );
        in_buf_is_a = !in_buf_is_a;
    }

    let last = layers.last().unwrap();
    assert_eq!(last.out_channels, 1, "chain ends in one channel");
    let final_tiles = if in_buf_is_a {
        &scratch.tiles_a
    } else {
        &scratch.tiles_b
    };
    let mut out = vec![F::zero(); n];
    unpack_row(&final_tiles[..TILE * nt], nt, &mut out);
    out
}

fn layer_forward<F: Scalar>(
    layer: &WinogradLayer<F>,
    input: &[F],
    output: &mut [F],
    n: usize,
    nt: usize,
    u: &mut [F],
    m_panel: &mut [F],
) {
    let ntp = padded(nt);
    input_transform(input, layer.in_channels, nt, ntp, u);
    let mut col = 0;
    while col < nt {
        contraction_panel(layer, u, m_panel, ntp, col);
        output_panel(layer, m_panel, output, nt, col);
        col += NR;
    }
    restore_zero_pad(layer.out_channels, output, n, nt);
}

/// `U_j[c][t] = (B^T d)_j` with `d = x[4t-1 .. 4t+4]` in tile coordinates.
/// One fused pass per channel: the four tile rows are read once, all six
/// transform rows written together. Rows are `ntp` wide; only the first
/// `nt` columns are written.
fn input_transform<F: Scalar>(tiles: &[F], channels: usize, nt: usize, ntp: usize, u: &mut [F]) {
    let two = F::from_f64(2.0);
    let four = F::from_f64(4.0);
    let five = F::from_f64(5.0);
    let stride = channels * ntp;
    for c in 0..channels {
        let base = c * TILE * nt;
        let xs0 = &tiles[base..base + nt];
        let xs1 = &tiles[base + nt..base + 2 * nt];
        let xs2 = &tiles[base + 2 * nt..base + 3 * nt];
        let xs3 = &tiles[base + 3 * nt..base + 4 * nt];
        let (u0, rest) = u[c * ntp..].split_at_mut(stride);
        let (u1, rest) = rest.split_at_mut(stride);
        let (u2, rest) = rest.split_at_mut(stride);
        let (u3, rest) = rest.split_at_mut(stride);
        let (u4, u5) = rest.split_at_mut(stride);
        let u0 = &mut u0[..nt];
        let u1 = &mut u1[..nt];
        let u2 = &mut u2[..nt];
        let u3 = &mut u3[..nt];
        let u4 = &mut u4[..nt];
        let u5 = &mut u5[..nt];
        for t in 0..nt {
            // d = [x(4t-1), x(4t) .. x(4t+3), x(4t+4)] with zero guards
            let d0 = if t == 0 { F::zero() } else { xs3[t - 1] };
            let d1 = xs0[t];
            let d2 = xs1[t];
            let d3 = xs2[t];
            let d4 = xs3[t];
            let d5 = if t + 1 < nt { xs0[t + 1] } else { F::zero() };
            u0[t] = four * d0 - five * d2 + d4;
            u1[t] = -four * d1 - four * d2 + d3 + d4;
            u2[t] = four * d1 - four * d2 - d3 + d4;
            u3[t] = -two * d1 - d2 + two * d3 + d4;
            u4[t] = two * d1 - d2 - two * d3 + d4;
            u5[t] = four * d1 - five * d3 + d5;
        }
    }
}

/// Six `(out x in) * (in x NR)` products for one column panel, written to
/// the compact `m_panel` (`POINTS x out x NR`).
fn contraction_panel<F: Scalar>(
    layer: &WinogradLayer<F>,
    u: &[F],
    m_panel: &mut [F],
    ntp: usize,
    col: usize,
) {
    let (in_ch, out_ch) = (layer.in_channels, layer.out_channels);
    for j in 0..POINTS {
        let v_j = &layer.v[j * out_ch * in_ch..(j + 1) * out_ch * in_ch];
        let u_j = &u[j * in_ch * ntp..(j + 1) * in_ch * ntp];
        let m_j = &mut m_panel[j * out_ch * NR..(j + 1) * out_ch * NR];
        let mut r = 0;
        while r + 4 <= out_ch {
            microkernel_4xnr(v_j, u_j, m_j, r, col, in_ch, ntp);
            r += 4;
        }
        for rr in r..out_ch {
            let arow = &v_j[rr * in_ch..(rr + 1) * in_ch];
            let crow: &mut [F] = &mut m_j[rr * NR..(rr + 1) * NR];
            crow.fill(F::zero());
            for (kk, &w) in arow.iter().enumerate() {
                let brow: &[F; NR] = u_j[kk * ntp + col..kk * ntp + col + NR]
                    .try_into()
                    .expect("NR columns");
                for l in 0..NR {
                    crow[l] = w.mul_add(brow[l], crow[l]);
                }
            }
        }
    }
}

/// 4 x `NR` register-blocked inner kernel, `k` unrolled by two.
#[inline(always)]
fn microkernel_4xnr<F: Scalar>(
    a: &[F],
    b: &[F],
    c: &mut [F],
    r: usize,
    col: usize,
    k: usize,
    ldb: usize,
) {
    let a0 = &a[r * k..(r + 1) * k];
    let a1 = &a[(r + 1) * k..(r + 2) * k];
    let a2 = &a[(r + 2) * k..(r + 3) * k];
    let a3 = &a[(r + 3) * k..(r + 4) * k];
    let mut acc = [[F::zero(); NR]; 4];
    let mut kk = 0;
    while kk + 2 <= k {
        let brow0: &[F; NR] = b[kk * ldb + col..kk * ldb + col + NR]
            .try_into()
            .expect("NR columns");
        let brow1: &[F; NR] = b[(kk + 1) * ldb + col..(kk + 1) * ldb + col + NR]
            .try_into()
            .expect("NR columns");
        let w0 = [a0[kk], a1[kk], a2[kk], a3[kk]];
        let w1 = [a0[kk + 1], a1[kk + 1], a2[kk + 1], a3[kk + 1]];
        for l in 0..NR {
            let x0 = brow0[l];
            let x1 = brow1[l];
            acc[0][l] = w1[0].mul_add(x1, w0[0].mul_add(x0, acc[0][l]));
            acc[1][l] = w1[1].mul_add(x1, w0[1].mul_add(x0, acc[1][l]));
            acc[2][l] = w1[2].mul_add(x1, w0[2].mul_add(x0, acc[2][l]));
            acc[3][l] = w1[3].mul_add(x1, w0[3].mul_add(x0, acc[3][l]));
        }
        kk += 2;
    }
    if kk < k {
        let brow: &[F; NR] = b[kk * ldb + col..kk * ldb + col + NR]
            .try_into()
            .expect("NR columns");
        let w = [a0[kk], a1[kk], a2[kk], a3[kk]];
        for l in 0..NR {
            let x = brow[l];
            acc[0][l] = w[0].mul_add(x, acc[0][l]);
            acc[1][l] = w[1].mul_add(x, acc[1][l]);
            acc[2][l] = w[2].mul_add(x, acc[2][l]);
            acc[3][l] = w[3].mul_add(x, acc[3][l]);
        }
    }
    for (i, acc_row) in acc.iter().enumerate() {
        c[(r + i) * NR..(r + i + 1) * NR].copy_from_slice(acc_row);
    }
}

/// `y = A^T m + bias` for one column panel, ReLU fused, written tile-major.
fn output_panel<F: Scalar>(
    layer: &WinogradLayer<F>,
    m_panel: &[F],
    output: &mut [F],
    nt: usize,
    col: usize,
) {
    let two = F::from_f64(2.0);
    let four = F::from_f64(4.0);
    let eight = F::from_f64(8.0);
    let out_ch = layer.out_channels;
    let width = NR.min(nt - col);
    for o in 0..out_ch {
        let bias = layer.bias[o];
        let row = |j: usize| -> &[F; NR] {
            m_panel[(j * out_ch + o) * NR..(j * out_ch + o + 1) * NR]
                .try_into()
                .expect("NR columns")
        };
        let (m0, m1, m2, m3, m4, m5) = (row(0), row(1), row(2), row(3), row(4), row(5));
        let base = o * TILE * nt;
        let (ys0, rest) = output[base..base + TILE * nt].split_at_mut(nt);
        let (ys1, rest) = rest.split_at_mut(nt);
        let (ys2, ys3) = rest.split_at_mut(nt);
        for l in 0..width {
            let (a, b, c, d, e, f) = (m0[l], m1[l], m2[l], m3[l], m4[l], m5[l]);
            let mut y0 = a + b + c + d + e + bias;
            let mut y1 = b - c + two * d - two * e + bias;
            let mut y2 = b + c + four * d + four * e + bias;
            let mut y3 = b - c + eight * d - eight * e + f + bias;
            if layer.relu {
                let z = F::zero();
                y0 = y0.max(z);
                y1 = y1.max(z);
                y2 = y2.max(z);
                y3 = y3.max(z);
            }
            let t = col + l;
            ys0[t] = y0;
            ys1[t] = y1;
            ys2[t] = y2;
            ys3[t] = y3;
        }
    }
}

/// Zero the guard positions beyond `n` so the next layer sees true padding.
fn restore_zero_pad<F: Scalar>(out_ch: usize, output: &mut [F], n: usize, nt: usize) {
    let first_partial_tile = n / TILE;
    for o in 0..out_ch {
        let base = o * TILE * nt;
        for s in 0..TILE {
            let ys = &mut output[base + s * nt..base + (s + 1) * nt];
            for t in first_partial_tile..nt {
                if TILE * t + s >= n {
                    ys[t] = F::zero();
                }
            }
        }
    }
}

/// Dev-bench hooks; not part of the stable API.
#[doc(hidden)]
pub fn bench_input_transform<F: Scalar>(tiles: &[F], channels: usize, nt: usize, u: &mut [F]) {
    input_transform(tiles, channels, nt, padded(nt), u);
}

#[doc(hidden)]
pub fn bench_contraction<F: Scalar>(layer: &WinogradLayer<F>, u: &[F], m: &mut [F], nt: usize) {
    let ntp = padded(nt);
    let mut col = 0;
    while col < nt {
        contraction_panel(layer, u, &mut m[..POINTS * layer.out_channels * NR], ntp, col);
        col += NR;
    }
}

#[doc(hidden)]
pub fn bench_output_transform<F: Scalar>(
    layer: &WinogradLayer<F>,
    m: &[F],
    output: &mut [F],
    n: usize,
    nt: usize,
) {
    let mut col = 0;
    while col < nt {
        output_panel(
            layer,
            &m[..POINTS * layer.out_channels * NR],
            output,
            nt,
            col,
        );
        col += NR;
    }
    restore_zero_pad(layer.out_channels, output, n, nt);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Conv1d, Tensor3};
    use crate::rng::substream;
    use rand::Rng;

    fn direct_chain(layers: &[(Conv1d<f64>, bool)], signal: &[f64]) -> Vec<f64> {
        let mut h = Tensor3::from_signal(signal);
        for (conv, relu) in layers {
            let a = conv.forward(&h);
            h = if *relu { crate::nn::relu(&a) } else { a };
        }
        h.row(0, 0).to_vec()
    }

    fn to_wino(conv: &Conv1d<f64>, relu: bool) -> WinogradLayer<f64> {
        let bias = conv
            .bias
            .clone()
            .unwrap_or_else(|| vec![0.0; conv.out_channels]);
        WinogradLayer::new(conv.in_channels, conv.out_channels, &conv.weights, &bias, relu)
    }

    #[test]
    fn pack_unpack_roundtrip() {
        for n in [1usize, 3, 4, 5, 8, 13, 16, 511] {
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.5 + 1.0).collect();
            let nt = tiles_for(n);
            let mut tiles = vec![0.0; TILE * nt];
            pack_row(&x, nt, &mut tiles);
            let mut back = vec![0.0; n];
            unpack_row(&tiles, nt, &mut back);
            assert_eq!(back, x);
        }
    }

    #[test]
    fn single_layer_matches_direct_convolution() {
        let mut rng = substream(201, 4);
        for &(in_ch, out_ch, n) in &[
            (1usize, 1usize, 8usize),
            (1, 4, 33),
            (4, 4, 512),
            (3, 5, 21),
            (1, 1, 5),
            (4, 6, 260),
        ] {
            let conv = Conv1d::<f64>::kaiming(in_ch, out_ch, 3, true, &mut rng);
            let wl = to_wino(&conv, false);
            let nt = tiles_for(n);
            let ntp = padded(nt);
            let mut input = vec![0.0; in_ch * TILE * nt];
            let x: Vec<Vec<f64>> = (0..in_ch)
                .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            for (c, row) in x.iter().enumerate() {
                pack_row(row, nt, &mut input[c * TILE * nt..(c + 1) * TILE * nt]);
            }
            let mut output = vec![0.0; out_ch * TILE * nt];
            let mut u = vec![0.0; POINTS * in_ch * ntp];
            let mut m_panel = vec![0.0; POINTS * out_ch * NR];
            layer_forward(&wl, &input, &mut output, n, nt, &mut u, &mut m_panel);

            let flat: Vec<f64> = x.concat();
            let direct = conv.forward(&Tensor3::from_vec(1, in_ch, n, flat));
            for o in 0..out_ch {
                let mut got = vec![0.0; n];
                unpack_row(&output[o * TILE * nt..(o + 1) * TILE * nt], nt, &mut got);
                for (g, d) in got.iter().zip(direct.row(0, o)) {
                    assert!(
                        (g - d).abs() < 1e-10,
                        "in={in_ch} out={out_ch} n={n}: {g} vs {d}"
                    );
                }
            }
        }
    }

    #[test]
    fn chain_matches_direct_forward() {
        let mut rng = substream(202, 4);
        for n in [12usize, 64, 130, 511, 512] {
            let first = Conv1d::<f64>::kaiming(1, 8, 3, true, &mut rng);
            let mid = Conv1d::<f64>::kaiming(8, 8, 3, true, &mut rng);
            let last = Conv1d::<f64>::kaiming(8, 1, 3, true, &mut rng);
            let signal: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();

            let direct = direct_chain(
                &[
                    (first.clone(), true),
                    (mid.clone(), true),
                    (last.clone(), false),
                ],
                &signal,
            );
            let layers = vec![
                to_wino(&first, true),
                to_wino(&mid, true),
                to_wino(&last, false),
            ];
            let mut scratch = WinogradScratch::new();
            let fast = run_chain(&layers, &signal, &mut scratch);
            for (f, d) in fast.iter().zip(&direct) {
                assert!((f - d).abs() < 1e-9, "n={n}: {f} vs {d}");
            }
        }
    }

    #[test]
    fn guard_padding_is_cleared_between_layers() {
        // identity kernel with nonzero bias on a length not divisible by 4:
        // the second layer must see zeros beyond n, not first-layer residue
        let mut id = Conv1d::<f64>::zeros(1, 1, 3, true);
        id.weights = vec![0.0, 1.0, 0.0];
        if let Some(b) = &mut id.bias {
            b[0] = 0.5;
        }
        let signal: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let direct = direct_chain(&[(id.clone(), true), (id.clone(), false)], &signal);
        let layers = vec![to_wino(&id, true), to_wino(&id, false)];
        let mut scratch = WinogradScratch::new();
        let fast = run_chain(&layers, &signal, &mut scratch);
        for (f, d) in fast.iter().zip(&direct) {
            assert!((f - d).abs() < 1e-12, "{f} vs {d}");
        }
    }

    #[test]
    fn gemm_panel_matches_naive() {
        let mut rng = substream(203, 4);
        for &(rows, k, cols) in &[(4usize, 8usize, 40usize), (5, 3, 7), (8, 16, 130), (1, 1, 1)] {
            let nt = cols;
            let ntp = padded(nt);
            let a: Vec<f64> = (0..rows * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut b = vec![0.0; k * ntp];
            for kk in 0..k {
                for t in 0..nt {
                    b[kk * ntp + t] = rng.gen_range(-1.0..1.0);
                }
            }
            let layer = WinogradLayer {
                in_channels: k,
                out_channels: rows,
                v: {
                    // replicate `a` across the six transform points
                    let mut v = Vec::new();
                    for _ in 0..POINTS {
                        v.extend_from_slice(&a);
                    }
                    v
                },
                bias: vec![0.0; rows],
                relu: false,
            };
            let mut m_panel = vec![0.0; POINTS * rows * NR];
            let mut col = 0;
            while col < nt {
                contraction_panel(&layer, &b.repeat(POINTS), &mut m_panel, ntp, col);
                let width = NR.min(nt - col);
                for j in 0..POINTS {
                    for r in 0..rows {
                        for l in 0..width {
                            let mut want = 0.0;
                            for kk in 0..k {
                                want += a[r * k + kk] * b[kk * ntp + col + l];
                            }
                            let got = m_panel[(j * rows + r) * NR + l];
                            assert!(
                                (got - want).abs() < 1e-12,
                                "j={j} r={r} l={l}: {got} vs {want}"
                            );
                        }
                    }
                }
                col += NR;
            }
        }
    }
}
