//! Dev probe: desk-scale denoiser training vs the identity baseline.
use std::time::Instant;

use libsnet::eval::{baseline_preproc, eval_preproc};
use libsnet::models::{NetConfig, PreprocNet};
use libsnet::simulator::*;
use libsnet::spectra::WavelengthAxis;
use libsnet::train::{fit_preproc, preproc_pairs, TrainConfig};

fn main() {
    let axis = WavelengthAxis::desk();
    let db = EmissionLineDB::builtin();
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);

    let t0 = Instant::now();
    let opts = DatasetOptions::new(2400, PreprocLevel::L1b, seed);
    let records = make_dataset(
        default_composition_sampler,
        default_param_sampler(&axis),
        &db,
        &axis,
        &opts,
    )
    .unwrap();
    let (train, test) = records.split_at(2000);
    println!("dataset: {:?}", t0.elapsed());

    let baseline = baseline_preproc(test, PreprocLevel::L1b).unwrap();
    println!("identity baseline: {:.5}", baseline.mean_residual_error);

    let cfg = NetConfig::desk();
    let mut rng = libsnet::rng::substream(seed, libsnet::rng::STREAM_INIT);
    let mut net = PreprocNet::<f32>::init(cfg, &mut rng).unwrap();
    let pairs = preproc_pairs::<f32>(train, PreprocLevel::L1b).unwrap();

    let tc = TrainConfig {
        batch_size: 16,
        epochs: 20,
        lr: 1e-3,
        seed,
        shuffle: true,
    };
    let t1 = Instant::now();
    let trace = fit_preproc(&mut net, &pairs, &tc).unwrap();
    println!(
        "train: {:?}  first epoch {:.5}  last epoch {:.5}",
        t1.elapsed(),
        trace[0],
        trace[trace.len() - 1]
    );

    let report = eval_preproc(&net, test, PreprocLevel::L1b).unwrap();
    println!(
        "test residual: {:.5}  ratio vs baseline: {:.3}",
        report.mean_residual_error,
        report.mean_residual_error / baseline.mean_residual_error
    );
}
