//! Finite-difference verification suites.
//!
//! Each component packs its parameters (and inputs, where gradients w.r.t.
//! inputs exist) into one flat coordinate vector, evaluates a scalar
//! projection of the forward map, and compares the analytic gradient against
//! central differences in double precision. Instances are tiny on purpose;
//! each full run takes well under a minute.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{CalibHead, EndToEndNet, NetConfig, PreprocNet};
use crate::nn::gradcheck::{grad_check, GradCheckReport};
use crate::nn::{
    relu, relu_backward, BatchNorm1d, Conv1d, Dense, Mode, Tensor2, Tensor3,
};
use crate::rng::substream;
use crate::train;

pub const DEFAULT_STEP: f64 = 1e-6;

pub const COMPONENTS: [&str; 8] = [
    "conv1d",
    "batchnorm",
    "relu",
    "dense",
    "conv_bn_relu",
    "loss_preproc",
    "loss_calib",
    "loss_e2e",
];

/// Run one named component; see [`COMPONENTS`].
pub fn run_component(name: &str, h: f64) -> Result<GradCheckReport> {
    let (max_rel_err, tolerance) = match name {
        "conv1d" => (check_conv1d(h), 1e-5),
        "batchnorm" => (check_batchnorm(h), 1e-5),
        "relu" => (check_relu(h), 1e-8),
        "dense" => (check_dense(h), 1e-7),
        "conv_bn_relu" => (check_stack(h), 1e-5),
        "loss_preproc" => (check_loss_preproc(h), 1e-4),
        "loss_calib" => (check_loss_calib(h), 1e-4),
        "loss_e2e" => (check_loss_e2e(h), 1e-4),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown gradcheck component `{other}` (expected one of {COMPONENTS:?})"
            )))
        }
    };
    Ok(GradCheckReport {
        component: name.to_string(),
        max_rel_err,
        tolerance,
    })
}

/// Run the full suite in a stable order.
pub fn run_all(h: f64) -> Vec<GradCheckReport> {
    COMPONENTS
        .iter()
        .map(|name| run_component(name, h).expect("known component"))
        .collect()
}

fn rand_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Random projection weights bounded away from zero.
fn projection(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let mag = rng.gen_range(0.5..1.5);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_conv1d(h: f64) -> f64 {
    let (in_ch, out_ch, len, batch) = (2usize, 3usize, 12usize, 2usize);
    let mut rng = substream(101, 4);
    let n_w = out_ch * in_ch * 3;
    let point: Vec<f64> = rand_vec(&mut rng, n_w + out_ch + batch * in_ch * len, -1.0, 1.0);
    let r = projection(&mut rng, batch * out_ch * len);

    let eval = |theta: &[f64]| -> (Conv1d<f64>, Tensor3<f64>) {
        let mut layer = Conv1d::<f64>::zeros(in_ch, out_ch, 3, true);
        layer.weights.copy_from_slice(&theta[..n_w]);
        layer
            .bias
            .as_mut()
            .expect("bias")
            .copy_from_slice(&theta[n_w..n_w + out_ch]);
        let x = Tensor3::from_vec(batch, in_ch, len, theta[n_w + out_ch..].to_vec());
        (layer, x)
    };

    let mut f = |theta: &[f64]| -> f64 {
        let (layer, x) = eval(theta);
        dot(layer.forward(&x).data(), &r)
    };

    let (layer, x) = eval(&point);
    let grad_out = Tensor3::from_vec(batch, out_ch, len, r.clone());
    let (gx, grads) = layer.backward(&x, &grad_out);
    let mut analytic = grads.weights.clone();
    analytic.extend_from_slice(grads.bias.as_ref().expect("bias"));
    analytic.extend_from_slice(gx.data());

    grad_check(&mut f, &point, &analytic, h)
}

fn check_batchnorm(h: f64) -> f64 {
    let (channels, len, batch) = (3usize, 5usize, 2usize);
    let mut rng = substream(102, 4);
    let mut point = rand_vec(&mut rng, channels, 0.5, 1.5); // gamma
    point.extend(rand_vec(&mut rng, channels, -0.5, 0.5)); // beta
    point.extend(rand_vec(&mut rng, batch * channels * len, -1.0, 1.0)); // x
    let r = projection(&mut rng, batch * channels * len);

    let build = |theta: &[f64]| -> (BatchNorm1d<f64>, Tensor3<f64>) {
        let mut bn = BatchNorm1d::<f64>::new(channels);
        bn.gamma.copy_from_slice(&theta[..channels]);
        bn.beta.copy_from_slice(&theta[channels..2 * channels]);
        let x = Tensor3::from_vec(batch, channels, len, theta[2 * channels..].to_vec());
        (bn, x)
    };

    let mut f = |theta: &[f64]| -> f64 {
        let (mut bn, x) = build(theta);
        let (y, _) = bn.forward(&x, Mode::Train);
        dot(y.data(), &r)
    };

    let (mut bn, x) = build(&point);
    let (_, cache) = bn.forward(&x, Mode::Train);
    let grad_out = Tensor3::from_vec(batch, channels, len, r.clone());
    let (gx, grads) = bn.backward(cache.as_ref().expect("train cache"), &grad_out);
    let mut analytic = grads.gamma.clone();
    analytic.extend_from_slice(&grads.beta);
    analytic.extend_from_slice(gx.data());

    grad_check(&mut f, &point, &analytic, h)
}

fn check_relu(h: f64) -> f64 {
    let n = 24usize;
    let mut rng = substream(103, 4);
    // keep every coordinate away from the kink
    let point: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.gen_range(0.2..1.5);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let r = projection(&mut rng, n);

    let mut f = |theta: &[f64]| -> f64 {
        let x = Tensor3::from_vec(1, 1, n, theta.to_vec());
        dot(relu(&x).data(), &r)
    };

    let x = Tensor3::from_vec(1, 1, n, point.clone());
    let grad_out = Tensor3::from_vec(1, 1, n, r.clone());
    let analytic = relu_backward(&x, &grad_out).into_data();

    grad_check(&mut f, &point, &analytic, h)
}

fn check_dense(h: f64) -> f64 {
    let (inf, outf, batch) = (5usize, 4usize, 2usize);
    let mut rng = substream(104, 4);
    let n_w = outf * inf;
    // modest magnitudes keep the exactly-linear map's finite-difference
    // roundoff comfortably below the 1e-9 tolerance
    let point = rand_vec(&mut rng, n_w + outf + batch * inf, -0.5, 0.5);
    let r: Vec<f64> = projection(&mut rng, batch * outf)
        .into_iter()
        .map(|v| 0.5 * v)
        .collect();

    let build = |theta: &[f64]| -> (Dense<f64>, Tensor2<f64>) {
        let mut layer = Dense::<f64>::zeros(inf, outf);
        layer.weights.copy_from_slice(&theta[..n_w]);
        layer.bias.copy_from_slice(&theta[n_w..n_w + outf]);
        let x = Tensor2::from_vec(batch, inf, theta[n_w + outf..].to_vec());
        (layer, x)
    };

    let mut f = |theta: &[f64]| -> f64 {
        let (layer, x) = build(theta);
        dot(layer.forward(&x).data(), &r)
    };

    let (layer, x) = build(&point);
    let grad_out = Tensor2::from_vec(batch, outf, r.clone());
    let (gx, grads) = layer.backward(&x, &grad_out);
    let mut analytic = grads.weights.clone();
    analytic.extend_from_slice(&grads.bias);
    analytic.extend_from_slice(gx.data());

    grad_check(&mut f, &point, &analytic, h)
}

fn check_stack(h: f64) -> f64 {
    let (in_ch, mid, len, batch) = (2usize, 3usize, 10usize, 2usize);
    let mut rng = substream(105, 4);
    let n_w = mid * in_ch * 3;
    let mut point = rand_vec(&mut rng, n_w, -1.0, 1.0);
    point.extend(rand_vec(&mut rng, mid, 0.5, 1.5)); // gamma
    point.extend(rand_vec(&mut rng, mid, -0.5, 0.5)); // beta
    point.extend(rand_vec(&mut rng, batch * in_ch * len, -1.0, 1.0)); // x
    let r = projection(&mut rng, batch * mid * len);

    let build = |theta: &[f64]| -> (Conv1d<f64>, BatchNorm1d<f64>, Tensor3<f64>) {
        let mut conv = Conv1d::<f64>::zeros(in_ch, mid, 3, false);
        conv.weights.copy_from_slice(&theta[..n_w]);
        let mut bn = BatchNorm1d::<f64>::new(mid);
        bn.gamma.copy_from_slice(&theta[n_w..n_w + mid]);
        bn.beta.copy_from_slice(&theta[n_w + mid..n_w + 2 * mid]);
        let x = Tensor3::from_vec(batch, in_ch, len, theta[n_w + 2 * mid..].to_vec());
        (conv, bn, x)
    };

    let mut f = |theta: &[f64]| -> f64 {
        let (conv, mut bn, x) = build(theta);
        let a = conv.forward(&x);
        let (b, _) = bn.forward(&a, Mode::Train);
        dot(relu(&b).data(), &r)
    };

    let (conv, mut bn, x) = build(&point);
    let a = conv.forward(&x);
    let (b, cache) = bn.forward(&a, Mode::Train);
    let grad_out = Tensor3::from_vec(batch, mid, len, r.clone());
    let g_b = relu_backward(&b, &grad_out);
    let (g_a, bn_grads) = bn.backward(cache.as_ref().expect("cache"), &g_b);
    let (g_x, conv_grads) = conv.backward(&x, &g_a);
    let mut analytic = conv_grads.weights.clone();
    analytic.extend_from_slice(&bn_grads.gamma);
    analytic.extend_from_slice(&bn_grads.beta);
    analytic.extend_from_slice(g_x.data());

    grad_check(&mut f, &point, &analytic, h)
}

fn tiny_cfg() -> NetConfig {
    NetConfig {
        depth_d: 3,
        width: 4,
        kernel: 3,
        num_elements: 2,
        input_len: 32,
    }
}

fn check_loss_preproc(h: f64) -> f64 {
    let cfg = tiny_cfg();
    let batch = 2usize;
    let mut rng = substream(106, 4);
    let net = PreprocNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
    let point = net.flatten_params();

    let y = Tensor3::from_vec(
        batch,
        1,
        cfg.input_len,
        rand_vec(&mut rng, batch * cfg.input_len, 0.0, 1.0),
    );
    let x = Tensor3::from_vec(
        batch,
        1,
        cfg.input_len,
        rand_vec(&mut rng, batch * cfg.input_len, 0.0, 1.0),
    );
    let z = y.sub(&x);

    let mut f = |theta: &[f64]| -> f64 {
        let mut net = net.clone();
        net.load_params(theta).unwrap();
        let (z_hat, _, _) = net.forward_train(&y).unwrap();
        train::l2_loss_and_grad3(&z_hat, &z).0
    };

    let mut net_at = net.clone();
    net_at.load_params(&point).unwrap();
    let (z_hat, _, tape) = net_at.forward_train(&y).unwrap();
    let (_, grad) = train::l2_loss_and_grad3(&z_hat, &z);
    let (_, analytic) = net_at.backward(&tape, &grad);

    grad_check(&mut f, &point, &analytic, h)
}

fn check_loss_calib(h: f64) -> f64 {
    let cfg = tiny_cfg();
    let batch = 2usize;
    let mut rng = substream(107, 4);
    let head = CalibHead::<f64>::init(cfg.clone(), &mut rng).unwrap();
    let point = head.flatten_params();

    let x = Tensor3::from_vec(
        batch,
        1,
        cfg.input_len,
        rand_vec(&mut rng, batch * cfg.input_len, 0.0, 1.0),
    );
    let v = Tensor2::from_vec(
        batch,
        cfg.num_elements,
        rand_vec(&mut rng, batch * cfg.num_elements, 0.0, 50.0),
    );

    let mut f = |theta: &[f64]| -> f64 {
        let mut head = head.clone();
        head.load_params(theta).unwrap();
        let (pred, _) = head.forward_train(&x).unwrap();
        train::l2_loss_and_grad2(&pred, &v).0
    };

    let (pred, tape) = head.forward_train(&x).unwrap();
    let (_, grad) = train::l2_loss_and_grad2(&pred, &v);
    let (_, analytic) = head.backward(&tape, &grad);

    grad_check(&mut f, &point, &analytic, h)
}

fn check_loss_e2e(h: f64) -> f64 {
    let cfg = tiny_cfg();
    let batch = 2usize;
    let mut rng = substream(108, 4);
    let net = EndToEndNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
    let point = net.flatten_params();

    let y = Tensor3::from_vec(
        batch,
        1,
        cfg.input_len,
        rand_vec(&mut rng, batch * cfg.input_len, 0.0, 1.0),
    );
    let v = Tensor2::from_vec(
        batch,
        cfg.num_elements,
        rand_vec(&mut rng, batch * cfg.num_elements, 0.0, 50.0),
    );

    let mut f = |theta: &[f64]| -> f64 {
        let mut net = net.clone();
        net.load_params(theta).unwrap();
        let (pred, _) = net.forward_train(&y).unwrap();
        train::l2_loss_and_grad2(&pred, &v).0
    };

    let mut net_at = net.clone();
    let (pred, tape) = net_at.forward_train(&y).unwrap();
    let (_, grad) = train::l2_loss_and_grad2(&pred, &v);
    let analytic = net_at.backward(&tape, &grad);

    grad_check(&mut f, &point, &analytic, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_component_passes_at_its_tolerance() {
        for report in run_all(DEFAULT_STEP) {
            assert!(
                report.passed(),
                "{}: max rel err {} exceeds {}",
                report.component,
                report.max_rel_err,
                report.tolerance
            );
        }
    }

    #[test]
    fn unknown_component_is_rejected() {
        assert!(run_component("warp_drive", DEFAULT_STEP).is_err());
    }
}
