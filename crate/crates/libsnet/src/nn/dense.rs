//! Fully connected layer `y = W x + b`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Tensor2;
use super::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub in_features: usize,
    pub out_features: usize,
    /// `(out, in)` row-major.
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<F> {
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weights: vec![F::zero(); out_features * in_features],
            bias: vec![F::zero(); out_features],
        }
    }

    pub fn kaiming<R: Rng>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(in_features, out_features);
        let std = (2.0 / in_features as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid std");
        for w in &mut layer.weights {
            *w = F::from_f64(normal.sample(rng));
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &Tensor2<F>) -> Tensor2<F> {
        assert_eq!(
            x.cols, self.in_features,
            "dense input has {} features, layer expects {}",
            x.cols, self.in_features
        );
        let mut out = Tensor2::zeros(x.rows, self.out_features);
        for r in 0..x.rows {
            let xr = x.row(r);
            let or = out.row_mut(r);
            for o in 0..self.out_features {
                let wrow = &self.weights[o * self.in_features..(o + 1) * self.in_features];
                let mut acc = self.bias[o];
                for i in 0..self.in_features {
                    acc = acc + wrow[i] * xr[i];
                }
                or[o] = acc;
            }
        }
        out
    }

    pub fn backward(&self, x: &Tensor2<F>, grad_out: &Tensor2<F>) -> (Tensor2<F>, DenseGrads<F>) {
        assert_eq!(x.cols, self.in_features, "dense backward: input features");
        assert_eq!(
            (grad_out.rows, grad_out.cols),
            (x.rows, self.out_features),
            "dense backward: grad_out shape"
        );
        let mut grad_w = vec![F::zero(); self.weights.len()];
        let mut grad_b = vec![F::zero(); self.bias.len()];
        let mut grad_x = Tensor2::zeros(x.rows, self.in_features);

        for r in 0..x.rows {
            let xr = x.row(r);
            let go = grad_out.row(r);
            let gx = grad_x.row_mut(r);
            for o in 0..self.out_features {
                let g = go[o];
                grad_b[o] = grad_b[o] + g;
                let wrow = &self.weights[o * self.in_features..(o + 1) * self.in_features];
                let gw = &mut grad_w[o * self.in_features..(o + 1) * self.in_features];
                for i in 0..self.in_features {
                    gw[i] = gw[i] + g * xr[i];
                    gx[i] = gx[i] + g * wrow[i];
                }
            }
        }

        (
            grad_x,
            DenseGrads {
                weights: grad_w,
                bias: grad_b,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut layer = Dense::<f64>::zeros(3, 3);
        for i in 0..3 {
            layer.weights[i * 3 + i] = 1.0;
        }
        let x = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]);
        let y = layer.forward(&x);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut layer = Dense::<f64>::zeros(4, 2);
        layer.bias = vec![3.5, -1.0];
        let x = Tensor2::from_vec(1, 4, vec![9.0, 9.0, 9.0, 9.0]);
        let y = layer.forward(&x);
        assert_eq!(y.row(0), &[3.5, -1.0]);
    }

    #[test]
    #[should_panic(expected = "features")]
    fn forward_rejects_feature_mismatch() {
        let layer = Dense::<f64>::zeros(3, 2);
        let x = Tensor2::<f64>::zeros(1, 4);
        let _ = layer.forward(&x);
    }
}
