//! Dense tensors in `(batch, channels, length)` and `(batch, features)`
//! layout, row-major, contiguous.

use super::Scalar;

/// `(batch, channels, length)` tensor backing all 1D signal ops.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<F> {
    pub batch: usize,
    pub channels: usize,
    pub len: usize,
    data: Vec<F>,
}

impl<F: Scalar> Tensor3<F> {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Self {
            batch,
            channels,
            len,
            data: vec![F::zero(); batch * channels * len],
        }
    }

    pub fn from_vec(batch: usize, channels: usize, len: usize, data: Vec<F>) -> Self {
        assert_eq!(
            data.len(),
            batch * channels * len,
            "tensor data length {} does not match shape ({batch}, {channels}, {len})",
            data.len()
        );
        Self {
            batch,
            channels,
            len,
            data,
        }
    }

    /// One signal as a `(1, 1, len)` tensor.
    pub fn from_signal(signal: &[F]) -> Self {
        Self::from_vec(1, 1, signal.len(), signal.to_vec())
    }

    /// Stack `batch` signals of equal length into a `(batch, 1, len)` tensor.
    pub fn from_signals(signals: &[&[F]]) -> Self {
        assert!(!signals.is_empty(), "cannot stack zero signals");
        let len = signals[0].len();
        let mut data = Vec::with_capacity(signals.len() * len);
        for s in signals {
            assert_eq!(s.len(), len, "signals have unequal lengths");
            data.extend_from_slice(s);
        }
        Self::from_vec(signals.len(), 1, len, data)
    }

    #[inline]
    pub fn row(&self, b: usize, c: usize) -> &[F] {
        let start = (b * self.channels + c) * self.len;
        &self.data[start..start + self.len]
    }

    #[inline]
    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [F] {
        let start = (b * self.channels + c) * self.len;
        &mut self.data[start..start + self.len]
    }

    /// Contiguous block of all channel rows of one batch item.
    #[inline]
    pub fn item(&self, b: usize) -> &[F] {
        let start = b * self.channels * self.len;
        &self.data[start..start + self.channels * self.len]
    }

    #[inline]
    pub fn item_mut(&mut self, b: usize) -> &mut [F] {
        let start = b * self.channels * self.len;
        &mut self.data[start..start + self.channels * self.len]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.len)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape(), "tensor shape mismatch in sub");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Self {
            batch: self.batch,
            channels: self.channels,
            len: self.len,
            data,
        }
    }

    pub fn neg(&self) -> Self {
        let data = self.data.iter().map(|&a| -a).collect();
        Self {
            batch: self.batch,
            channels: self.channels,
            len: self.len,
            data,
        }
    }
}

/// `(batch, features)` tensor for the dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2<F> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Tensor2<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "tensor data length {} does not match shape ({rows}, {cols})",
            data.len()
        );
        Self { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
