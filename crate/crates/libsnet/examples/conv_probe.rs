//! Dev probe: single-shot denoiser throughput, direct vs fast path.
use libsnet::inference::FastDenoiser;
use libsnet::models::{NetConfig, PreprocNet};
use libsnet::nn::Tensor3;
use std::time::Instant;

fn main() {
    let cfg = NetConfig::full();
    let mut rng = libsnet::rng::substream(1, 2);
    let net = PreprocNet::<f32>::init(cfg.clone(), &mut rng).unwrap();
    let n = cfg.input_len;
    let signal: Vec<f32> = (0..n).map(|i| (i as f32 * 0.01).sin().abs()).collect();

    // direct path
    let x = Tensor3::from_signal(&signal);
    let runs = |iters: usize| {
        let t0 = Instant::now();
        let mut sink = 0.0f32;
        for _ in 0..iters {
            let (z, _) = net.forward_eval(&x).unwrap();
            sink += z.data()[0];
        }
        (t0.elapsed().as_secs_f64() / iters as f64, sink)
    };
    let _ = runs(2);
    let (per, s1) = runs(10);
    println!("direct:   {:6.2} ms/shot  => {:5.1} Hz  [{s1}]", per * 1e3, 1.0 / per);

    // fast path
    let mut fast = FastDenoiser::new(&net);
    let runf = |fast: &mut FastDenoiser<f32>, iters: usize| {
        let t0 = Instant::now();
        let mut sink = 0.0f32;
        for _ in 0..iters {
            let (z, _) = fast.run(&signal).unwrap();
            sink += z[0];
        }
        (t0.elapsed().as_secs_f64() / iters as f64, sink)
    };
    let _ = runf(&mut fast, 5);
    let (per, s2) = runf(&mut fast, 50);
    println!("winograd: {:6.2} ms/shot  => {:5.1} Hz  [{s2}]", per * 1e3, 1.0 / per);
}
