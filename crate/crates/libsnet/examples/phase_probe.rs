//! Dev probe: per-phase timing of the fast path at the full-size shape.
use libsnet::nn::winograd::*;
use std::time::Instant;

fn main() {
    let n = 5500usize;
    let nt = tiles_for(n);
    let (in_ch, out_ch) = (64usize, 64usize);
    let mut rng_state = 123456789u64;
    let mut next = || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
        ((rng_state >> 33) as f32 / 2147483648.0) - 0.5
    };
    let weights: Vec<f32> = (0..out_ch * in_ch * 3).map(|_| next() * 0.1).collect();
    let bias = vec![0.01f32; out_ch];
    let layer = WinogradLayer::new(in_ch, out_ch, &weights, &bias, true);

    let mut input = vec![0.0f32; in_ch * 4 * nt];
    for v in input.iter_mut() { *v = next().abs(); }
    let mut output = vec![0.0f32; out_ch * 4 * nt];
    let mut u = vec![0.0f32; 6 * in_ch * nt];
    let mut m = vec![0.0f32; 6 * out_ch * nt];

    let iters = 200;
    let t0 = Instant::now();
    for _ in 0..iters {
        bench_input_transform(&input, in_ch, nt, &mut u);
    }
    let t_in = t0.elapsed().as_secs_f64() / iters as f64;
    let t1 = Instant::now();
    for _ in 0..iters {
        bench_contraction(&layer, &u, &mut m, nt);
    }
    let t_gemm = t1.elapsed().as_secs_f64() / iters as f64;
    let t2 = Instant::now();
    for _ in 0..iters {
        bench_output_transform(&layer, &m, &mut output, n, nt);
    }
    let t_out = t2.elapsed().as_secs_f64() / iters as f64;
    let macs = 6.0 * (out_ch * in_ch * nt) as f64;
    println!(
        "input {:.3} ms   gemm {:.3} ms ({:.1} GFLOP/s)   output {:.3} ms   per-layer {:.3} ms  [{}]",
        t_in * 1e3,
        t_gemm * 1e3,
        2.0 * macs / t_gemm / 1e9,
        t_out * 1e3,
        (t_in + t_gemm + t_out) * 1e3,
        output[0] + u[0] + m[0]
    );
}
