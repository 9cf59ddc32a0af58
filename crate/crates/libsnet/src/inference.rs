//! Fast single-shot inference.
//!
//! [`FastDenoiser`] freezes a trained [`PreprocNet`] for deployment: the
//! eval-mode batch-norm affine is folded into the convolution weights and
//! the whole chain runs through the Winograd F(4,3) path. Results agree
//! with the reference eval forward up to floating-point reassociation.

use crate::error::Result;
use crate::models::{CalibHead, NetConfig, PreprocNet};
use crate::nn::winograd::{run_chain, WinogradLayer, WinogradScratch};
use crate::nn::{Scalar, Tensor3};

/// A denoiser frozen for deployment.
pub struct FastDenoiser<F> {
    cfg: NetConfig,
    layers: Vec<WinogradLayer<F>>,
    scratch: WinogradScratch<F>,
}

impl<F: Scalar> FastDenoiser<F> {
    pub fn new(net: &PreprocNet<F>) -> Self {
        let (first, body, last) = net.layers_for_inference();
        let mut layers = Vec::with_capacity(body.len() + 2);
        layers.push(WinogradLayer::new(
            first.in_channels,
            first.out_channels,
            &first.weights,
            first.bias.as_ref().expect("first conv has bias"),
            true,
        ));
        for (conv, bn) in body {
            // BN eval is per-channel affine: fold scale into the (bias-free)
            // conv weights and shift into a bias
            let ch = conv.out_channels;
            let mut weights = conv.weights.clone();
            let mut bias = vec![F::zero(); ch];
            for o in 0..ch {
                let scale = bn.gamma[o] / (bn.running_var[o] + bn.eps).sqrt();
                bias[o] = bn.beta[o] - scale * bn.running_mean[o];
                let row = &mut weights[o * conv.in_channels * 3..(o + 1) * conv.in_channels * 3];
                for w in row {
                    *w = *w * scale;
                }
            }
            layers.push(WinogradLayer::new(conv.in_channels, ch, &weights, &bias, true));
        }
        layers.push(WinogradLayer::new(
            last.in_channels,
            last.out_channels,
            &last.weights,
            last.bias.as_ref().expect("last conv has bias"),
            false,
        ));
        Self {
            cfg: net.config().clone(),
            layers,
            scratch: WinogradScratch::new(),
        }
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// One shot: returns `(z_hat, x_hat)`.
    pub fn run(&mut self, signal: &[F]) -> Result<(Vec<F>, Vec<F>)> {
        if signal.len() != self.cfg.input_len {
            return Err(crate::Error::LengthMismatch {
                context: "denoiser input length",
                expected: self.cfg.input_len,
                got: signal.len(),
            });
        }
        let z_hat = run_chain(&self.layers, signal, &mut self.scratch);
        let x_hat = signal
            .iter()
            .zip(&z_hat)
            .map(|(&y, &z)| y - z)
            .collect();
        Ok((z_hat, x_hat))
    }
}

/// Frozen two-stage pipeline: fast denoiser followed by the calibration
/// head, matching the fused network's wiring.
pub struct FastPipeline<F> {
    pub denoiser: FastDenoiser<F>,
    head: CalibHead<F>,
}

impl<F: Scalar> FastPipeline<F> {
    pub fn new(trunk: &PreprocNet<F>, head: CalibHead<F>) -> Self {
        Self {
            denoiser: FastDenoiser::new(trunk),
            head,
        }
    }

    /// One shot raw spectrum -> composition estimates.
    pub fn run(&mut self, signal: &[F]) -> Result<Vec<F>> {
        let (_, x_hat) = self.denoiser.run(signal)?;
        let out = self.head.forward_eval(&Tensor3::from_signal(&x_hat))?;
        Ok(out.row(0).to_vec())
    }
}
