//! Dev probe: desk-scale end-to-end calibration vs the mean-predictor
//! baseline, plus the compositional scheme for comparison.
use std::time::Instant;

use libsnet::eval::{calib_report, eval_calib_rmse, mean_predictor_baseline};
use libsnet::models::{CalibHead, EndToEndNet, NetConfig, PreprocNet};
use libsnet::nn::{Tensor2, Tensor3};
use libsnet::simulator::*;
use libsnet::spectra::WavelengthAxis;
use libsnet::train::{calib_pairs, fit_calib, fit_e2e, fit_preproc, preproc_pairs, TrainConfig};

fn truths(records: &[libsnet::dataio::ShotRecord]) -> Tensor2<f64> {
    let c = records[0].composition.as_ref().unwrap().len();
    let mut data = Vec::new();
    for r in records {
        data.extend_from_slice(r.composition.as_ref().unwrap().values());
    }
    Tensor2::from_vec(records.len(), c, data)
}

fn predict_e2e(net: &EndToEndNet<f32>, records: &[libsnet::dataio::ShotRecord]) -> Tensor2<f64> {
    let mut rows = Vec::new();
    for chunk in records.chunks(64) {
        let signals: Vec<Vec<f32>> = chunk
            .iter()
            .map(|r| r.raw.intensities().iter().map(|&v| v as f32).collect())
            .collect();
        let refs: Vec<&[f32]> = signals.iter().map(|v| v.as_slice()).collect();
        let out = net.forward_eval(&Tensor3::from_signals(&refs)).unwrap();
        for b in 0..out.rows {
            rows.extend(out.row(b).iter().map(|&v| v as f64));
        }
    }
    Tensor2::from_vec(records.len(), records[0].composition.as_ref().unwrap().len(), rows)
}

fn main() {
    let axis = WavelengthAxis::desk();
    let db = EmissionLineDB::builtin();
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);

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

    let train_truths = truths(train);
    let test_truths = truths(test);
    let baseline = mean_predictor_baseline(&train_truths, &test_truths).unwrap();
    println!("baseline per-element RMSE: {baseline:.3?}");

    let cfg = NetConfig::desk();
    let tc = TrainConfig { batch_size: 16, epochs: 20, lr: 1e-3, seed, shuffle: true };

    // end-to-end scheme
    let mut rng = libsnet::rng::substream(seed, libsnet::rng::STREAM_INIT);
    let mut e2e = EndToEndNet::<f32>::init(cfg.clone(), &mut rng).unwrap();
    let pairs = calib_pairs::<f32>(train, true, PreprocLevel::L1b).unwrap();
    let t0 = Instant::now();
    let trace = fit_e2e(&mut e2e, &pairs, &tc).unwrap();
    println!("e2e train: {:?}  loss {:.3} -> {:.3}", t0.elapsed(), trace[0], trace[trace.len()-1]);

    let preds = predict_e2e(&e2e, test);
    let rmse = eval_calib_rmse(&preds, &test_truths).unwrap();
    println!("e2e per-element RMSE:     {rmse:.3?}");
    let wins = rmse.iter().zip(&baseline).filter(|(r, b)| **r <= 0.5 * **b).count();
    println!("elements at <= 0.5x baseline: {wins}/8");
    let total = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("e2e mean RMSE {:.3}  baseline mean {:.3}", total(&rmse), total(&baseline));

    // compositional scheme: preproc net then head on x_hat
    let mut rng = libsnet::rng::substream(seed, libsnet::rng::STREAM_INIT);
    let mut pre = PreprocNet::<f32>::init(cfg.clone(), &mut rng).unwrap();
    let ppairs = preproc_pairs::<f32>(train, PreprocLevel::L1b).unwrap();
    let t1 = Instant::now();
    fit_preproc(&mut pre, &ppairs, &tc).unwrap();
    // clean the training inputs with the trained denoiser
    let mut head = CalibHead::<f32>::init(cfg.clone(), &mut libsnet::rng::substream(seed + 500, libsnet::rng::STREAM_INIT)).unwrap();
    let mut cleaned_pairs: Vec<(Vec<f32>, Vec<f32>)> = Vec::new();
    for (chunk_idx, chunk) in train.chunks(64).enumerate() {
        let signals: Vec<Vec<f32>> = chunk
            .iter()
            .map(|r| r.raw.intensities().iter().map(|&v| v as f32).collect())
            .collect();
        let refs: Vec<&[f32]> = signals.iter().map(|v| v.as_slice()).collect();
        let (_, x_hat) = pre.forward_eval(&Tensor3::from_signals(&refs)).unwrap();
        for b in 0..chunk.len() {
            let v: Vec<f32> = chunk[b].composition.as_ref().unwrap().values().iter().map(|&x| x as f32).collect();
            cleaned_pairs.push((x_hat.row(b, 0).to_vec(), v));
        }
        let _ = chunk_idx;
    }
    fit_calib(&mut head, &cleaned_pairs, &tc).unwrap();
    println!("compositional train: {:?}", t1.elapsed());

    // predict: preprocess then head
    let mut rows = Vec::new();
    for chunk in test.chunks(64) {
        let signals: Vec<Vec<f32>> = chunk
            .iter()
            .map(|r| r.raw.intensities().iter().map(|&v| v as f32).collect())
            .collect();
        let refs: Vec<&[f32]> = signals.iter().map(|v| v.as_slice()).collect();
        let (_, x_hat) = pre.forward_eval(&Tensor3::from_signals(&refs)).unwrap();
        let out = head.forward_eval(&x_hat).unwrap();
        for b in 0..out.rows {
            rows.extend(out.row(b).iter().map(|&v| v as f64));
        }
    }
    let comp_preds = Tensor2::from_vec(test.len(), 8, rows);
    let comp_rmse = eval_calib_rmse(&comp_preds, &test_truths).unwrap();
    println!("compositional per-element RMSE: {comp_rmse:.3?}");
    println!(
        "e2e mean {:.3} vs compositional mean {:.3}",
        total(&rmse),
        total(&comp_rmse)
    );
    let report = calib_report(
        &DEFAULT_OXIDES.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        &preds,
        &test_truths,
        Some(&train_truths),
    )
    .unwrap();
    for (i, name) in report.element_names.iter().enumerate() {
        println!(
            "  {name:6} rmse {:7.3}  baseline {:7.3}  slope {:?}",
            report.rmse[i],
            report.baseline_rmse.as_ref().unwrap()[i],
            report.regression[i].map(|(s, _)| (s * 100.0).round() / 100.0)
        );
    }
}
