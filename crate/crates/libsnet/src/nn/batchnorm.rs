//! Batch normalization over `(batch, length)` per channel.

use super::tensor::Tensor3;
use super::{Mode, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d<F> {
    pub channels: usize,
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    pub eps: F,
    pub momentum: F,
}

/// Forward-pass intermediates needed by [`BatchNorm1d::backward`].
#[derive(Debug, Clone)]
pub struct BnCache<F> {
    /// Normalized input (before the affine transform).
    pub x_hat: Tensor3<F>,
    /// Per-channel `1 / sqrt(var + eps)`.
    pub inv_std: Vec<F>,
}

impl<F: Scalar> BatchNorm1d<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![F::one(); channels],
            beta: vec![F::zero(); channels],
            running_mean: vec![F::zero(); channels],
            running_var: vec![F::one(); channels],
            eps: F::from_f64(1e-5),
            momentum: F::from_f64(0.1),
        }
    }

    pub fn param_count(&self) -> usize {
        2 * self.channels
    }

    /// Train mode normalizes with batch statistics (biased variance) and
    /// updates the running statistics (unbiased variance, momentum 0.1).
    /// Eval mode normalizes with the running statistics.
    pub fn forward(&mut self, x: &Tensor3<F>, mode: Mode) -> (Tensor3<F>, Option<BnCache<F>>) {
        assert_eq!(x.channels, self.channels, "batchnorm channel mismatch");
        match mode {
            Mode::Train => {
                let (out, cache) = self.forward_train(x);
                (out, Some(cache))
            }
            Mode::Eval => (self.forward_eval(x), None),
        }
    }

    fn forward_train(&mut self, x: &Tensor3<F>) -> (Tensor3<F>, BnCache<F>) {
        assert!(
            x.batch >= 2,
            "degenerate batch statistics: batch normalization needs batch >= 2 in train mode"
        );
        let n = F::from_usize(x.batch * x.len);
        let mut out = Tensor3::zeros(x.batch, x.channels, x.len);
        let mut x_hat = Tensor3::zeros(x.batch, x.channels, x.len);
        let mut inv_std = vec![F::zero(); self.channels];

        for c in 0..self.channels {
            let mut sum = F::zero();
            for b in 0..x.batch {
                sum = sum + x.row(b, c).iter().copied().sum::<F>();
            }
            let mean = sum / n;
            let mut sq = F::zero();
            for b in 0..x.batch {
                for &v in x.row(b, c) {
                    let d = v - mean;
                    sq = sq + d * d;
                }
            }
            let var = sq / n;
            let istd = F::one() / (var + self.eps).sqrt();
            inv_std[c] = istd;

            let g = self.gamma[c];
            let be = self.beta[c];
            for b in 0..x.batch {
                let xr = x.row(b, c);
                let hr = x_hat.row_mut(b, c);
                for i in 0..xr.len() {
                    hr[i] = (xr[i] - mean) * istd;
                }
                let or = out.row_mut(b, c);
                let hr = x_hat.row(b, c);
                for i in 0..or.len() {
                    or[i] = g * hr[i] + be;
                }
            }

            let one = F::one();
            let unbiased = var * n / (n - one);
            self.running_mean[c] = (one - self.momentum) * self.running_mean[c] + self.momentum * mean;
            self.running_var[c] = (one - self.momentum) * self.running_var[c] + self.momentum * unbiased;
        }

        (out, BnCache { x_hat, inv_std })
    }

    pub fn forward_eval(&self, x: &Tensor3<F>) -> Tensor3<F> {
        assert_eq!(x.channels, self.channels, "batchnorm channel mismatch");
        let mut out = Tensor3::zeros(x.batch, x.channels, x.len);
        for c in 0..self.channels {
            let istd = F::one() / (self.running_var[c] + self.eps).sqrt();
            let mean = self.running_mean[c];
            let g = self.gamma[c];
            let be = self.beta[c];
            for b in 0..x.batch {
                let xr = x.row(b, c);
                let or = out.row_mut(b, c);
                for i in 0..xr.len() {
                    or[i] = g * (xr[i] - mean) * istd + be;
                }
            }
        }
        out
    }

    /// Exact gradients of the train-mode forward.
    pub fn backward(
        &self,
        cache: &BnCache<F>,
        grad_out: &Tensor3<F>,
    ) -> (Tensor3<F>, BnGrads<F>) {
        let x_hat = &cache.x_hat;
        assert_eq!(grad_out.shape(), x_hat.shape(), "batchnorm backward shape");
        let n = F::from_usize(x_hat.batch * x_hat.len);
        let mut grad_x = Tensor3::zeros(x_hat.batch, x_hat.channels, x_hat.len);
        let mut grad_gamma = vec![F::zero(); self.channels];
        let mut grad_beta = vec![F::zero(); self.channels];

        for c in 0..self.channels {
            let mut sum_go = F::zero();
            let mut sum_go_xhat = F::zero();
            for b in 0..x_hat.batch {
                let go = grad_out.row(b, c);
                let hr = x_hat.row(b, c);
                for i in 0..go.len() {
                    sum_go = sum_go + go[i];
                    sum_go_xhat = sum_go_xhat + go[i] * hr[i];
                }
            }
            grad_beta[c] = sum_go;
            grad_gamma[c] = sum_go_xhat;

            // grad_x = gamma * inv_std / n * (n*go - sum(go) - x_hat * sum(go*x_hat))
            let scale = self.gamma[c] * cache.inv_std[c] / n;
            for b in 0..x_hat.batch {
                let go = grad_out.row(b, c);
                let hr = x_hat.row(b, c);
                let gx = grad_x.row_mut(b, c);
                for i in 0..go.len() {
                    gx[i] = scale * (n * go[i] - sum_go - hr[i] * sum_go_xhat);
                }
            }
        }

        (
            grad_x,
            BnGrads {
                gamma: grad_gamma,
                beta: grad_beta,
            },
        )
    }
}

#[derive(Debug, Clone)]
pub struct BnGrads<F> {
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_two_point_batch_to_unit_spread() {
        // one channel, batch values 1 and 3: mean 2, biased var 1
        let mut bn = BatchNorm1d::<f64>::new(1);
        let x = Tensor3::from_vec(2, 1, 1, vec![1.0, 3.0]);
        let (y, _) = bn.forward(&x, Mode::Train);
        let expect = 1.0 / (1.0_f64 + 1e-5).sqrt();
        assert!((y.data()[0] + expect).abs() < 1e-12);
        assert!((y.data()[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_gamma_outputs_constant_beta() {
        let mut bn = BatchNorm1d::<f64>::new(2);
        bn.gamma = vec![0.0, 0.0];
        bn.beta = vec![0.5, -1.5];
        let x = Tensor3::from_vec(2, 2, 3, (0..12).map(|i| i as f64).collect());
        let (y, _) = bn.forward(&x, Mode::Train);
        for b in 0..2 {
            assert!(y.row(b, 0).iter().all(|&v| v == 0.5));
            assert!(y.row(b, 1).iter().all(|&v| v == -1.5));
        }
    }

    #[test]
    fn eval_with_default_running_stats_is_near_identity() {
        let bn = BatchNorm1d::<f64>::new(1);
        let x = Tensor3::from_vec(1, 1, 4, vec![0.5, -2.0, 3.0, 0.0]);
        let y = bn.forward_eval(&x);
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-5 * b.abs().max(1.0) * 2.0);
        }
    }

    #[test]
    fn running_stats_updated_with_momentum() {
        let mut bn = BatchNorm1d::<f64>::new(1);
        let x = Tensor3::from_vec(2, 1, 1, vec![1.0, 3.0]);
        let _ = bn.forward(&x, Mode::Train);
        // mean 2, unbiased var = 1 * 2/(2-1) = 2
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-12);
        assert!((bn.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn grad_beta_is_per_channel_sum_of_grad_out() {
        let mut bn = BatchNorm1d::<f64>::new(2);
        let x = Tensor3::from_vec(2, 2, 3, (0..12).map(|i| (i as f64).sin()).collect());
        let (_, cache) = bn.forward(&x, Mode::Train);
        let go = Tensor3::from_vec(2, 2, 3, (0..12).map(|i| 0.1 * i as f64).collect());
        let (_, grads) = bn.backward(cache.as_ref().unwrap(), &go);
        let mut expect = [0.0; 2];
        for b in 0..2 {
            for c in 0..2 {
                expect[c] += go.row(b, c).iter().sum::<f64>();
            }
        }
        assert!((grads.beta[0] - expect[0]).abs() < 1e-12);
        assert!((grads.beta[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn backward_zero_grad_out_gives_zeros() {
        let mut bn = BatchNorm1d::<f64>::new(1);
        let x = Tensor3::from_vec(2, 1, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let (_, cache) = bn.forward(&x, Mode::Train);
        let go = Tensor3::zeros(2, 1, 2);
        let (gx, grads) = bn.backward(cache.as_ref().unwrap(), &go);
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(grads.gamma.iter().chain(&grads.beta).all(|&v| v == 0.0));
    }

    #[test]
    #[should_panic(expected = "degenerate batch statistics")]
    fn train_mode_rejects_batch_of_one() {
        let mut bn = BatchNorm1d::<f64>::new(1);
        let x = Tensor3::from_vec(1, 1, 4, vec![1.0, 2.0, 3.0, 4.0]);
        let _ = bn.forward(&x, Mode::Train);
    }
}
