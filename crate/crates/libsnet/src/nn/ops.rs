//! Elementwise and pooling ops.

use super::tensor::{Tensor2, Tensor3};
use super::Scalar;

/// `max(0, x)`.
pub fn relu<F: Scalar>(x: &Tensor3<F>) -> Tensor3<F> {
    let data = x.data().iter().map(|&v| v.max(F::zero())).collect();
    Tensor3::from_vec(x.batch, x.channels, x.len, data)
}

/// Passes gradient where `x > 0`; zero elsewhere, including at `x == 0`.
pub fn relu_backward<F: Scalar>(x: &Tensor3<F>, grad_out: &Tensor3<F>) -> Tensor3<F> {
    assert_eq!(x.shape(), grad_out.shape(), "relu backward shape");
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > F::zero() { g } else { F::zero() })
        .collect();
    Tensor3::from_vec(x.batch, x.channels, x.len, data)
}

pub fn relu2<F: Scalar>(x: &Tensor2<F>) -> Tensor2<F> {
    let data = x.data().iter().map(|&v| v.max(F::zero())).collect();
    Tensor2::from_vec(x.rows, x.cols, data)
}

pub fn relu2_backward<F: Scalar>(x: &Tensor2<F>, grad_out: &Tensor2<F>) -> Tensor2<F> {
    assert_eq!((x.rows, x.cols), (grad_out.rows, grad_out.cols));
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > F::zero() { g } else { F::zero() })
        .collect();
    Tensor2::from_vec(x.rows, x.cols, data)
}

/// Mean over the length axis: `(b, c, l) -> (b, c)`.
pub fn global_avg_pool<F: Scalar>(x: &Tensor3<F>) -> Tensor2<F> {
    assert!(x.len > 0, "cannot pool over empty length");
    let inv = F::one() / F::from_usize(x.len);
    let mut out = Tensor2::zeros(x.batch, x.channels);
    for b in 0..x.batch {
        for c in 0..x.channels {
            out.row_mut(b)[c] = x.row(b, c).iter().copied().sum::<F>() * inv;
        }
    }
    out
}

pub fn global_avg_pool_backward<F: Scalar>(grad_out: &Tensor2<F>, len: usize) -> Tensor3<F> {
    let inv = F::one() / F::from_usize(len);
    let mut out = Tensor3::zeros(grad_out.rows, grad_out.cols, len);
    for b in 0..grad_out.rows {
        for c in 0..grad_out.cols {
            let g = grad_out.row(b)[c] * inv;
            out.row_mut(b, c).fill(g);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor3::from_signal(&[-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).row(0, 0), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_backward_gates_on_sign_and_kills_the_kink() {
        let x = Tensor3::from_signal(&[-1.0, 2.0, 0.0]);
        let go = Tensor3::from_signal(&[5.0, 5.0, 5.0]);
        assert_eq!(relu_backward(&x, &go).row(0, 0), &[0.0, 5.0, 0.0]);
    }

    #[test]
    fn relu_is_idempotent() {
        let x = Tensor3::from_signal(&[-3.0, -0.5, 0.0, 0.5, 3.0]);
        let once = relu(&x);
        let twice = relu(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn global_avg_pool_means_and_spreads_back() {
        let x = Tensor3::from_vec(1, 2, 4, vec![1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 2.0, 2.0]);
        let p = global_avg_pool(&x);
        assert_eq!(p.row(0), &[2.5, 1.0]);
        let go = Tensor2::from_vec(1, 2, vec![4.0, 8.0]);
        let gx = global_avg_pool_backward(&go, 4);
        assert!(gx.row(0, 0).iter().all(|&v| v == 1.0));
        assert!(gx.row(0, 1).iter().all(|&v| v == 2.0));
    }
}
