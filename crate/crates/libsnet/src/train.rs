//! Losses, the Adam optimizer, and the training loops for the compositional
//! and end-to-end schemes.
//!
//! All three losses are the mean over the batch of the *unsquared* per-sample
//! Euclidean norm of the error. At exactly zero error the subgradient is
//! taken as the zero vector.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::dataio::ShotRecord;
use crate::error::{Error, Result};
use crate::models::{CalibHead, EndToEndNet, PreprocNet};
use crate::nn::{Scalar, Tensor2, Tensor3};
use crate::rng;
use crate::simulator::PreprocLevel;

/// Adam moment state over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    pub lr: F,
    pub t: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            m: vec![F::zero(); param_count],
            v: vec![F::zero(); param_count],
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            eps: F::from_f64(1e-8),
            lr: F::from_f64(lr),
            t: 0,
        }
    }

    /// One bias-corrected update: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [F], grads: &[F]) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "adam: parameter count");
        assert_eq!(grads.len(), self.m.len(), "adam: gradient count");
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient at parameter index {bad}"
            )));
        }
        self.t += 1;
        let one = F::one();
        let bc1 = one - self.beta1.powi(self.t as i32);
        let bc2 = one - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 20,
            lr: 1e-3,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "batch_size must be >= 2 (batch-norm constraint), got {}",
                self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean over rows of `|| target_m - pred_m ||` plus the gradient with
/// respect to `pred`.
fn l2_loss_and_grad_rows<F: Scalar>(
    pred: &[F],
    target: &[F],
    rows: usize,
    cols: usize,
) -> (F, Vec<F>) {
    assert_eq!(pred.len(), rows * cols);
    assert_eq!(target.len(), rows * cols);
    let inv_m = F::one() / F::from_usize(rows);
    let mut grad = vec![F::zero(); pred.len()];
    let mut total = F::zero();
    for r in 0..rows {
        let p = &pred[r * cols..(r + 1) * cols];
        let t = &target[r * cols..(r + 1) * cols];
        let norm = p
            .iter()
            .zip(t)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<F>()
            .sqrt();
        total = total + norm;
        if norm > F::zero() {
            let g = &mut grad[r * cols..(r + 1) * cols];
            let scale = inv_m / norm;
            for i in 0..cols {
                g[i] = (p[i] - t[i]) * scale;
            }
        }
        // norm == 0: subgradient fixed at zero
    }
    (total * inv_m, grad)
}

pub(crate) fn l2_loss_and_grad3<F: Scalar>(pred: &Tensor3<F>, target: &Tensor3<F>) -> (F, Tensor3<F>) {
    assert_eq!(pred.shape(), target.shape(), "loss shape");
    let (loss, grad) = l2_loss_and_grad_rows(
        pred.data(),
        target.data(),
        pred.batch,
        pred.channels * pred.len,
    );
    (
        loss,
        Tensor3::from_vec(pred.batch, pred.channels, pred.len, grad),
    )
}

pub(crate) fn l2_loss_and_grad2<F: Scalar>(pred: &Tensor2<F>, target: &Tensor2<F>) -> (F, Tensor2<F>) {
    assert_eq!((pred.rows, pred.cols), (target.rows, target.cols), "loss shape");
    let (loss, grad) = l2_loss_and_grad_rows(pred.data(), target.data(), pred.rows, pred.cols);
    (loss, Tensor2::from_vec(pred.rows, pred.cols, grad))
}

/// Residual loss: mean over the batch of `||(y - x) - R(y)||`, evaluated
/// with running batch-norm statistics.
pub fn loss_preproc<F: Scalar>(
    net: &PreprocNet<F>,
    y: &Tensor3<F>,
    x: &Tensor3<F>,
) -> Result<F> {
    if y.batch == 0 {
        return Err(Error::EmptyDataset);
    }
    let z = y.sub(x);
    let (z_hat, _) = net.forward_eval(y)?;
    Ok(l2_loss_and_grad3(&z_hat, &z).0)
}

/// Calibration loss: mean over the batch of `||v - F(x)||`.
pub fn loss_calib<F: Scalar>(head: &CalibHead<F>, x: &Tensor3<F>, v: &Tensor2<F>) -> Result<F> {
    if x.batch == 0 {
        return Err(Error::EmptyDataset);
    }
    let pred = head.forward_eval(x)?;
    Ok(l2_loss_and_grad2(&pred, v).0)
}

/// End-to-end loss: mean over the batch of `||v - F'(y)||`.
pub fn loss_e2e<F: Scalar>(net: &EndToEndNet<F>, y: &Tensor3<F>, v: &Tensor2<F>) -> Result<F> {
    if y.batch == 0 {
        return Err(Error::EmptyDataset);
    }
    let pred = net.forward_eval(y)?;
    Ok(l2_loss_and_grad2(&pred, v).0)
}

// ---------------------------------------------------------------------------
// Dataset adapters
// ---------------------------------------------------------------------------

/// `(raw, clean)` intensity pairs at the requested level.
pub fn preproc_pairs<F: Scalar>(
    records: &[ShotRecord],
    level: PreprocLevel,
) -> Result<Vec<(Vec<F>, Vec<F>)>> {
    records
        .iter()
        .map(|rec| {
            let clean = match level {
                PreprocLevel::L1a => rec.clean_1a.as_ref(),
                PreprocLevel::L1b => rec.clean_1b.as_ref(),
            }
            .ok_or_else(|| {
                Error::MissingLabel(format!(
                    "shot `{}` has no clean_{level} spectrum",
                    rec.shot_id
                ))
            })?;
            Ok((
                to_scalar_vec(rec.raw.intensities()),
                to_scalar_vec(clean.intensities()),
            ))
        })
        .collect()
}

/// `(input, composition)` pairs; `input` is the raw spectrum when `use_raw`,
/// otherwise the clean label at `level`.
pub fn calib_pairs<F: Scalar>(
    records: &[ShotRecord],
    use_raw: bool,
    level: PreprocLevel,
) -> Result<Vec<(Vec<F>, Vec<F>)>> {
    records
        .iter()
        .map(|rec| {
            let comp = rec.composition.as_ref().ok_or_else(|| {
                Error::MissingLabel(format!("shot `{}` has no composition", rec.shot_id))
            })?;
            let input = if use_raw {
                rec.raw.intensities()
            } else {
                match level {
                    PreprocLevel::L1a => rec.clean_1a.as_ref(),
                    PreprocLevel::L1b => rec.clean_1b.as_ref(),
                }
                .ok_or_else(|| {
                    Error::MissingLabel(format!(
                        "shot `{}` has no clean_{level} spectrum",
                        rec.shot_id
                    ))
                })?
                .intensities()
            };
            Ok((to_scalar_vec(input), to_scalar_vec(comp.values())))
        })
        .collect()
}

fn to_scalar_vec<F: Scalar>(xs: &[f64]) -> Vec<F> {
    xs.iter().map(|&v| F::from_f64(v)).collect()
}

fn stack3<F: Scalar>(pairs: &[(Vec<F>, Vec<F>)], idx: &[usize]) -> (Tensor3<F>, Tensor3<F>) {
    let inputs: Vec<&[F]> = idx.iter().map(|&i| pairs[i].0.as_slice()).collect();
    let targets: Vec<&[F]> = idx.iter().map(|&i| pairs[i].1.as_slice()).collect();
    (
        Tensor3::from_signals(&inputs),
        Tensor3::from_signals(&targets),
    )
}

fn stack_targets2<F: Scalar>(pairs: &[(Vec<F>, Vec<F>)], idx: &[usize]) -> Tensor2<F> {
    let cols = pairs[idx[0]].1.len();
    let mut data = Vec::with_capacity(idx.len() * cols);
    for &i in idx {
        data.extend_from_slice(&pairs[i].1);
    }
    Tensor2::from_vec(idx.len(), cols, data)
}

// ---------------------------------------------------------------------------
// Fit loops
// ---------------------------------------------------------------------------

struct EpochPlan {
    indices: Vec<usize>,
    rng: rand_chacha::ChaCha8Rng,
    shuffle: bool,
    batch_size: usize,
}

impl EpochPlan {
    fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            indices: (0..n).collect(),
            rng: rng::substream(cfg.seed, rng::STREAM_SHUFFLE),
            shuffle: cfg.shuffle,
            batch_size: cfg.batch_size,
        }
    }

    /// Batches of the next epoch; a final batch smaller than 2 is dropped.
    fn batches(&mut self) -> Vec<Vec<usize>> {
        if self.shuffle {
            self.indices.shuffle(&mut self.rng);
        }
        self.indices
            .chunks(self.batch_size)
            .filter(|c| c.len() >= 2)
            .map(|c| c.to_vec())
            .collect()
    }
}

fn numeric_error(epoch: usize, batch: usize, what: &str) -> Error {
    Error::NonFinite(format!("{what} at epoch {epoch}, batch {batch}"))
}

/// Train the residual denoiser on `(raw, clean)` pairs. Returns per-epoch
/// mean training loss.
pub fn fit_preproc<F: Scalar>(
    net: &mut PreprocNet<F>,
    pairs: &[(Vec<F>, Vec<F>)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut adam = AdamState::<F>::new(net.param_count(), cfg.lr);
    let mut plan = EpochPlan::new(pairs.len(), cfg);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0f64;
        let mut used = 0usize;
        for (batch_no, batch) in plan.batches().into_iter().enumerate() {
            let (y, x) = stack3(pairs, &batch);
            let z = y.sub(&x);
            let (z_hat, _x_hat, tape) = net.forward_train(&y)?;
            let (loss, grad) = l2_loss_and_grad3(&z_hat, &z);
            if !loss.is_finite() {
                return Err(numeric_error(epoch, batch_no, "loss"));
            }
            let (_gy, grads) = net.backward(&tape, &grad);
            let mut params = net.flatten_params();
            adam.step(&mut params, &grads).map_err(|e| {
                Error::NonFinite(format!("{e} (epoch {epoch}, batch {batch_no})"))
            })?;
            net.load_params(&params)?;
            loss_sum += loss.as_f64() * batch.len() as f64;
            used += batch.len();
        }
        if used == 0 {
            return Err(Error::EmptyDataset);
        }
        trace.push(loss_sum / used as f64);
    }
    Ok(trace)
}

/// Train the calibration head on `(spectrum, composition)` pairs.
pub fn fit_calib<F: Scalar>(
    head: &mut CalibHead<F>,
    pairs: &[(Vec<F>, Vec<F>)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut adam = AdamState::<F>::new(head.param_count(), cfg.lr);
    let mut plan = EpochPlan::new(pairs.len(), cfg);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0f64;
        let mut used = 0usize;
        for (batch_no, batch) in plan.batches().into_iter().enumerate() {
            let inputs: Vec<&[F]> = batch.iter().map(|&i| pairs[i].0.as_slice()).collect();
            let x = Tensor3::from_signals(&inputs);
            let v = stack_targets2(pairs, &batch);
            let (pred, tape) = head.forward_train(&x)?;
            let (loss, grad) = l2_loss_and_grad2(&pred, &v);
            if !loss.is_finite() {
                return Err(numeric_error(epoch, batch_no, "loss"));
            }
            let (_gx, grads) = head.backward(&tape, &grad);
            let mut params = head.flatten_params();
            adam.step(&mut params, &grads).map_err(|e| {
                Error::NonFinite(format!("{e} (epoch {epoch}, batch {batch_no})"))
            })?;
            head.load_params(&params)?;
            loss_sum += loss.as_f64() * batch.len() as f64;
            used += batch.len();
        }
        if used == 0 {
            return Err(Error::EmptyDataset);
        }
        trace.push(loss_sum / used as f64);
    }
    Ok(trace)
}

/// Train the fused network on `(raw, composition)` pairs; gradients flow
/// through trunk and head jointly.
pub fn fit_e2e<F: Scalar>(
    net: &mut EndToEndNet<F>,
    pairs: &[(Vec<F>, Vec<F>)],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut adam = AdamState::<F>::new(net.param_count(), cfg.lr);
    let mut plan = EpochPlan::new(pairs.len(), cfg);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0f64;
        let mut used = 0usize;
        for (batch_no, batch) in plan.batches().into_iter().enumerate() {
            let inputs: Vec<&[F]> = batch.iter().map(|&i| pairs[i].0.as_slice()).collect();
            let y = Tensor3::from_signals(&inputs);
            let v = stack_targets2(pairs, &batch);
            let (pred, tape) = net.forward_train(&y)?;
            let (loss, grad) = l2_loss_and_grad2(&pred, &v);
            if !loss.is_finite() {
                return Err(numeric_error(epoch, batch_no, "loss"));
            }
            let grads = net.backward(&tape, &grad);
            let mut params = net.flatten_params();
            adam.step(&mut params, &grads).map_err(|e| {
                Error::NonFinite(format!("{e} (epoch {epoch}, batch {batch_no})"))
            })?;
            net.load_params(&params)?;
            loss_sum += loss.as_f64() * batch.len() as f64;
            used += batch.len();
        }
        if used == 0 {
            return Err(Error::EmptyDataset);
        }
        trace.push(loss_sum / used as f64);
    }
    Ok(trace)
}

/// Write an `epoch,split,loss` trace.
pub fn write_loss_trace(path: &Path, split: &str, trace: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,split,loss\n");
    for (epoch, loss) in trace.iter().enumerate() {
        let _ = writeln!(out, "{epoch},{split},{loss}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::NetConfig;
    use crate::rng::substream;

    fn tiny_cfg() -> NetConfig {
        NetConfig {
            depth_d: 3,
            width: 4,
            kernel: 3,
            num_elements: 2,
            input_len: 16,
        }
    }

    #[test]
    fn adam_first_step_matches_hand_derivation() {
        // theta0 = 1, grad 1, lr 0.1: m_hat = 1, v_hat = 1
        // theta1 = 1 - 0.1 / (1 + 1e-8)
        let mut adam = AdamState::<f64>::new(1, 0.1);
        let mut theta = vec![1.0];
        adam.step(&mut theta, &[1.0]).unwrap();
        let expect = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((theta[0] - expect).abs() < 1e-15);
        assert!((theta[0] - 0.9).abs() < 1e-8);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut adam = AdamState::<f64>::new(3, 0.5);
        let mut theta = vec![1.0, -2.0, 0.25];
        adam.step(&mut theta, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 0.25]);
    }

    #[test]
    fn adam_minimizes_quadratic_within_200_steps() {
        let mut adam = AdamState::<f64>::new(1, 0.1);
        let mut theta = vec![1.0];
        for _ in 0..200 {
            let grad = vec![2.0 * theta[0]];
            adam.step(&mut theta, &grad).unwrap();
        }
        assert!(theta[0].abs() < 1e-3, "theta = {}", theta[0]);
    }

    #[test]
    fn adam_rejects_nan_gradient_with_index() {
        let mut adam = AdamState::<f64>::new(3, 0.1);
        let mut theta = vec![0.0; 3];
        let err = adam.step(&mut theta, &[0.0, f64::NAN, 0.0]).unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
    }

    #[test]
    fn l2_loss_examples() {
        // single pair, error [1, 0] -> 1.0
        let pred = Tensor3::from_vec(1, 1, 2, vec![0.0, 0.0]);
        let target = Tensor3::from_vec(1, 1, 2, vec![1.0, 0.0]);
        let (loss, _) = l2_loss_and_grad3(&pred, &target);
        assert_eq!(loss, 1.0);

        // two rows with norms 1 and 3 -> 2.0
        let pred = Tensor3::from_vec(2, 1, 2, vec![0.0, 0.0, 0.0, 0.0]);
        let target = Tensor3::from_vec(2, 1, 2, vec![0.0, 1.0, 3.0, 0.0]);
        let (loss, _) = l2_loss_and_grad3(&pred, &target);
        assert_eq!(loss, 2.0);

        // perfect prediction -> 0 with zero subgradient
        let (loss, grad) = l2_loss_and_grad3(&target.clone(), &target);
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));

        // 3-4-5 on composition vectors
        let pred = Tensor2::from_vec(1, 3, vec![13.0, 4.0, 0.0]);
        let truth = Tensor2::from_vec(1, 3, vec![10.0, 0.0, 0.0]);
        let (loss, _) = l2_loss_and_grad2(&pred, &truth);
        assert_eq!(loss, 5.0);
    }

    #[test]
    fn loss_is_invariant_to_sample_order() {
        let pred = Tensor2::<f64>::from_vec(2, 2, vec![1.0, 2.0, -1.0, 0.5]);
        let truth = Tensor2::from_vec(2, 2, vec![0.0, 1.0, 1.0, 1.0]);
        let (a, _) = l2_loss_and_grad2(&pred, &truth);
        let pred_swapped = Tensor2::from_vec(2, 2, vec![-1.0, 0.5, 1.0, 2.0]);
        let truth_swapped = Tensor2::from_vec(2, 2, vec![1.0, 1.0, 0.0, 1.0]);
        let (b, _) = l2_loss_and_grad2(&pred_swapped, &truth_swapped);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn loss_preproc_zero_for_perfect_residual() {
        let cfg = tiny_cfg();
        let mut rng = substream(31, 2);
        let mut net = PreprocNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
        net.zero_last(); // R == 0
        let y = Tensor3::from_vec(2, 1, 16, vec![0.5; 32]);
        // x == y so z == 0 == R(y)
        let loss = loss_preproc(&net, &y, &y).unwrap();
        assert_eq!(loss, 0.0);

        // y - x = [1, 0, ..] per item, R = 0 -> loss 1
        let mut x_data = vec![0.5; 32];
        x_data[0] -= 1.0;
        x_data[16] -= 1.0;
        let x = Tensor3::from_vec(2, 1, 16, x_data);
        let loss = loss_preproc(&net, &y, &x).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
    }

    fn tiny_preproc_pairs(n: usize, len: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut r = substream(seed, 7);
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..len).map(|_| rand::Rng::gen_range(&mut r, 0.0..1.0)).collect();
                let y: Vec<f64> = x
                    .iter()
                    .map(|v| v + rand::Rng::gen_range(&mut r, 0.0..0.2))
                    .collect();
                (y, x)
            })
            .collect()
    }

    #[test]
    fn fit_with_zero_lr_keeps_parameters() {
        let cfg = tiny_cfg();
        let mut rng = substream(32, 2);
        let mut net = PreprocNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let before = net.flatten_params();
        let pairs = tiny_preproc_pairs(8, 16, 1);
        let tc = TrainConfig {
            batch_size: 4,
            epochs: 2,
            lr: 0.0,
            seed: 3,
            shuffle: true,
        };
        fit_preproc(&mut net, &pairs, &tc).unwrap();
        assert_eq!(net.flatten_params(), before);
    }

    #[test]
    fn fit_is_deterministic_under_fixed_seed() {
        let cfg = tiny_cfg();
        let pairs = tiny_preproc_pairs(12, 16, 2);
        let tc = TrainConfig {
            batch_size: 4,
            epochs: 3,
            lr: 1e-3,
            seed: 11,
            shuffle: true,
        };
        let run = || {
            let mut rng = substream(33, 2);
            let mut net = PreprocNet::<f64>::init(tiny_cfg(), &mut rng).unwrap();
            fit_preproc(&mut net, &pairs, &tc).unwrap();
            net.flatten_params()
        };
        let a = run();
        let b = run();
        let bits_a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b, "training must be bit-reproducible");
        let _ = cfg;
    }

    #[test]
    fn eval_mode_loss_is_independent_of_shuffle_order() {
        let cfg = tiny_cfg();
        let mut rng = substream(34, 2);
        let net = PreprocNet::<f64>::init(cfg, &mut rng).unwrap();
        let pairs = tiny_preproc_pairs(6, 16, 3);
        let full_loss = |order: &[usize]| {
            let (y, x) = stack3(&pairs, order);
            loss_preproc(&net, &y, &x).unwrap()
        };
        let a = full_loss(&[0, 1, 2, 3, 4, 5]);
        let b = full_loss(&[5, 3, 1, 0, 2, 4]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn incomplete_tiny_final_batch_is_dropped() {
        let mut plan = EpochPlan::new(
            9,
            &TrainConfig {
                batch_size: 4,
                epochs: 1,
                lr: 1e-3,
                seed: 0,
                shuffle: false,
            },
        );
        let batches = plan.batches();
        // 4 + 4 + 1 -> the singleton is dropped
        assert_eq!(batches.len(), 2);
        assert!(batches.iter().all(|b| b.len() >= 2));

        let mut plan = EpochPlan::new(
            10,
            &TrainConfig {
                batch_size: 4,
                epochs: 1,
                lr: 1e-3,
                seed: 0,
                shuffle: false,
            },
        );
        // 4 + 4 + 2 -> the final pair is kept
        assert_eq!(plan.batches().len(), 3);
    }

    #[test]
    fn calib_and_e2e_fit_smoke() {
        let cfg = tiny_cfg();
        let mut rng = substream(35, 2);
        let mut head = CalibHead::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let mut r = substream(36, 7);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
            .map(|_| {
                let x: Vec<f64> =
                    (0..16).map(|_| rand::Rng::gen_range(&mut r, 0.0..1.0)).collect();
                let v = vec![
                    rand::Rng::gen_range(&mut r, 0.0..50.0),
                    rand::Rng::gen_range(&mut r, 0.0..50.0),
                ];
                (x, v)
            })
            .collect();
        let tc = TrainConfig {
            batch_size: 5,
            epochs: 2,
            lr: 1e-3,
            seed: 4,
            shuffle: true,
        };
        let trace = fit_calib(&mut head, &pairs, &tc).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(trace.iter().all(|l| l.is_finite()));

        let mut net = EndToEndNet::<f64>::init(cfg, &mut rng).unwrap();
        let trace = fit_e2e(&mut net, &pairs, &tc).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(trace.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn loss_trace_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_loss_trace(&path, "train", &[0.5, 0.25]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,split,loss\n0,train,0.5\n1,train,0.25\n");
    }
}
