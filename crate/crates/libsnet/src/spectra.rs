//! Spectrum representation, wavelength-band masking and normalization.
//!
//! A [`Spectrum`] is an intensity vector bound to a shared [`WavelengthAxis`].
//! Both are immutable after construction; every operation returns a new value,
//! so spectra can be shared freely across threads.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A strictly increasing wavelength grid in nanometers.
///
/// The axis does not have to be contiguous: detector gaps are represented
/// simply as absent wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthAxis {
    values: Vec<f64>,
    detector_boundaries: Option<Vec<DetectorBand>>,
}

/// Labeled index range of one detector segment (UV/VIS/NIR), end exclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorBand {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl WavelengthAxis {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("wavelength axis is empty".into()));
        }
        for w in &values {
            if !w.is_finite() {
                return Err(Error::NonFinite("wavelength axis".into()));
            }
        }
        for pair in values.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidArgument(format!(
                    "wavelength axis not strictly increasing at {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self {
            values,
            detector_boundaries: None,
        })
    }

    pub fn with_detector_bands(mut self, bands: Vec<DetectorBand>) -> Result<Self> {
        for b in &bands {
            if b.start >= b.end || b.end > self.values.len() {
                return Err(Error::InvalidArgument(format!(
                    "detector band `{}` range {}..{} out of bounds for axis of length {}",
                    b.label,
                    b.start,
                    b.end,
                    self.values.len()
                )));
            }
        }
        self.detector_boundaries = Some(bands);
        Ok(self)
    }

    /// Evenly spaced axis with `n` bins covering `[lo_nm, hi_nm]` inclusive.
    pub fn linspace(lo_nm: f64, hi_nm: f64, n: usize) -> Result<Arc<Self>> {
        if n < 2 || !(hi_nm > lo_nm) {
            return Err(Error::InvalidArgument(format!(
                "linspace needs n >= 2 and hi > lo, got n={n}, lo={lo_nm}, hi={hi_nm}"
            )));
        }
        let step = (hi_nm - lo_nm) / (n - 1) as f64;
        let values = (0..n).map(|i| lo_nm + step * i as f64).collect();
        Ok(Arc::new(Self::new(values)?))
    }

    /// 512-bin axis over 240-905 nm, the default for desk-scale experiments.
    pub fn desk() -> Arc<Self> {
        Self::linspace(240.0, 905.0, 512).expect("static axis")
    }

    /// 5500-bin axis over 240-905 nm, mimicking a full-resolution instrument.
    pub fn full_resolution() -> Arc<Self> {
        Self::linspace(240.0, 905.0, 5500).expect("static axis")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_nm(&self) -> f64 {
        self.values[0]
    }

    pub fn max_nm(&self) -> f64 {
        *self.values.last().expect("axis non-empty")
    }

    pub fn detector_bands(&self) -> Option<&[DetectorBand]> {
        self.detector_boundaries.as_deref()
    }
}

/// Set of closed wavelength intervals `[lo_nm, hi_nm]` to exclude.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BandMask {
    excluded: Vec<(f64, f64)>,
}

impl BandMask {
    pub fn new(excluded: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &excluded {
            if !(lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "band mask interval [{lo}, {hi}] has lo > hi"
                )));
            }
        }
        Ok(Self { excluded })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Bands commonly excluded from lab calibration-standard spectra.
    pub fn standard_exclusions() -> Self {
        Self {
            excluded: vec![
                (240.811, 246.635),
                (338.457, 340.797),
                (382.13, 387.859),
                (473.184, 492.427),
                (849.0, 905.574),
            ],
        }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.excluded
    }

    /// True when `nm` is inside any excluded interval (endpoints inclusive).
    pub fn excludes(&self, nm: f64) -> bool {
        self.excluded.iter().any(|&(lo, hi)| nm >= lo && nm <= hi)
    }
}

/// Which per-shot normalization a dataset uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Scale so the maximum intensity is exactly one.
    MaxOne,
    /// Scale to unit Euclidean norm.
    UnitL2,
    /// Leave intensities untouched.
    None,
}

impl Normalization {
    pub fn apply(self, s: &Spectrum) -> Result<Spectrum> {
        match self {
            Normalization::MaxOne => s.normalize_max(),
            Normalization::UnitL2 => s.normalize_l2(),
            Normalization::None => Ok(s.clone()),
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Normalization::MaxOne),
            "l2" => Ok(Normalization::UnitL2),
            "none" => Ok(Normalization::None),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalization `{other}` (expected max, l2 or none)"
            ))),
        }
    }
}

/// Intensity vector bound to a wavelength axis. Values are finite `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    axis: Arc<WavelengthAxis>,
    intensities: Vec<f64>,
}

impl Spectrum {
    pub fn new(axis: Arc<WavelengthAxis>, intensities: Vec<f64>) -> Result<Self> {
        if intensities.len() != axis.len() {
            return Err(Error::LengthMismatch {
                context: "spectrum vs axis",
                expected: axis.len(),
                got: intensities.len(),
            });
        }
        if intensities.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectrum intensities".into()));
        }
        Ok(Self { axis, intensities })
    }

    pub fn zeros(axis: Arc<WavelengthAxis>) -> Self {
        let n = axis.len();
        Self {
            axis,
            intensities: vec![0.0; n],
        }
    }

    pub fn axis(&self) -> &Arc<WavelengthAxis> {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn same_axis(&self, other: &Spectrum) -> bool {
        Arc::ptr_eq(&self.axis, &other.axis) || self.axis == other.axis
    }

    pub fn l2_norm(&self) -> f64 {
        self.intensities.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_intensity(&self) -> f64 {
        self.intensities.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Scale so the maximum intensity is exactly one.
    pub fn normalize_max(&self) -> Result<Spectrum> {
        let max = self.max_intensity();
        if !(max > 0.0) {
            return Err(Error::DegenerateSpectrum(
                "maximum intensity is not positive, cannot normalize",
            ));
        }
        let intensities = self.intensities.iter().map(|v| v / max).collect();
        Ok(Spectrum {
            axis: Arc::clone(&self.axis),
            intensities,
        })
    }

    /// Scale to unit Euclidean norm.
    pub fn normalize_l2(&self) -> Result<Spectrum> {
        let norm = self.l2_norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateSpectrum(
                "zero norm, cannot normalize",
            ));
        }
        let intensities = self.intensities.iter().map(|v| v / norm).collect();
        Ok(Spectrum {
            axis: Arc::clone(&self.axis),
            intensities,
        })
    }

    /// Drop every bin whose wavelength falls inside an excluded interval.
    ///
    /// Returns a spectrum on a freshly built (still strictly increasing) axis.
    /// An empty result is allowed.
    pub fn apply_band_mask(&self, mask: &BandMask) -> Spectrum {
        let mut values = Vec::with_capacity(self.len());
        let mut intensities = Vec::with_capacity(self.len());
        for (w, v) in self.axis.values().iter().zip(&self.intensities) {
            if !mask.excludes(*w) {
                values.push(*w);
                intensities.push(*v);
            }
        }
        let axis = Arc::new(WavelengthAxis {
            values,
            detector_boundaries: None,
        });
        Spectrum { axis, intensities }
    }

    /// Euclidean norm of the difference `self - other`.
    pub fn l2_distance(&self, other: &Spectrum) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                context: "l2_distance",
                expected: self.len(),
                got: other.len(),
            });
        }
        if !self.same_axis(other) {
            return Err(Error::AxisMismatch(
                "l2_distance operands are on different axes".into(),
            ));
        }
        Ok(self
            .intensities
            .iter()
            .zip(&other.intensities)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Replace the intensity vector, keeping the axis. Lengths must match.
    pub fn with_intensities(&self, intensities: Vec<f64>) -> Result<Spectrum> {
        Spectrum::new(Arc::clone(&self.axis), intensities)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn axis(n: usize) -> Arc<WavelengthAxis> {
        WavelengthAxis::linspace(240.0, 905.0, n).unwrap()
    }

    fn spec(vals: &[f64]) -> Spectrum {
        Spectrum::new(axis(vals.len()), vals.to_vec()).unwrap()
    }

    #[test]
    fn normalize_max_scales_by_maximum() {
        let s = spec(&[2.0, 4.0]).normalize_max().unwrap();
        assert_eq!(s.intensities(), &[0.5, 1.0]);

        let s = spec(&[1.0, 1.0, 1.0]).normalize_max().unwrap();
        assert_eq!(s.intensities(), &[1.0, 1.0, 1.0]);

        let s = spec(&[0.3, 0.6, 0.15]).normalize_max().unwrap();
        assert_eq!(s.intensities(), &[0.5, 1.0, 0.25]);
    }

    #[test]
    fn normalize_max_rejects_degenerate_input() {
        assert!(matches!(
            spec(&[0.0, 0.0]).normalize_max(),
            Err(Error::DegenerateSpectrum(_))
        ));
        assert!(matches!(
            spec(&[-1.0, -0.5]).normalize_max(),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn normalize_l2_examples() {
        let s = spec(&[3.0, 4.0]).normalize_l2().unwrap();
        assert!((s.intensities()[0] - 0.6).abs() < 1e-15);
        assert!((s.intensities()[1] - 0.8).abs() < 1e-15);

        let s = spec(&[1.0, 0.0, 0.0]).normalize_l2().unwrap();
        assert_eq!(s.intensities(), &[1.0, 0.0, 0.0]);

        let s = spec(&[2.0, 2.0, 2.0, 2.0]).normalize_l2().unwrap();
        assert_eq!(s.intensities(), &[0.5, 0.5, 0.5, 0.5]);

        assert!(spec(&[0.0, 0.0]).normalize_l2().is_err());
    }

    #[test]
    fn band_mask_drops_bins_inside_closed_intervals() {
        let ax = Arc::new(WavelengthAxis::new(vec![240.0, 245.0, 250.0]).unwrap());
        let s = Spectrum::new(ax, vec![1.0, 2.0, 3.0]).unwrap();
        let mask = BandMask::new(vec![(240.811, 246.635)]).unwrap();
        let out = s.apply_band_mask(&mask);
        assert_eq!(out.axis().values(), &[240.0, 250.0]);
        assert_eq!(out.intensities(), &[1.0, 3.0]);

        // empty mask is the identity
        let out = s.apply_band_mask(&BandMask::empty());
        assert_eq!(out.intensities(), s.intensities());

        // idempotence
        let once = s.apply_band_mask(&mask);
        let twice = once.apply_band_mask(&mask);
        assert_eq!(once.intensities(), twice.intensities());
        assert_eq!(once.axis().values(), twice.axis().values());
    }

    #[test]
    fn band_mask_endpoints_are_inclusive() {
        let ax = Arc::new(WavelengthAxis::new(vec![100.0, 200.0, 300.0]).unwrap());
        let s = Spectrum::new(ax, vec![1.0, 1.0, 1.0]).unwrap();
        let mask = BandMask::new(vec![(100.0, 200.0)]).unwrap();
        let out = s.apply_band_mask(&mask);
        assert_eq!(out.axis().values(), &[300.0]);
    }

    #[test]
    fn band_mask_may_empty_a_spectrum() {
        let s = spec(&[1.0, 2.0]);
        let mask = BandMask::new(vec![(0.0, 1e4)]).unwrap();
        let out = s.apply_band_mask(&mask);
        assert!(out.is_empty());
    }

    #[test]
    fn l2_distance_examples() {
        let a = spec(&[1.0, 3.0]);
        assert_eq!(a.l2_distance(&a).unwrap(), 0.0);

        let ax = axis(2);
        let b = Spectrum::new(Arc::clone(&ax), vec![1.0, 0.0]).unwrap();
        let z = Spectrum::new(Arc::clone(&ax), vec![0.0, 0.0]).unwrap();
        assert_eq!(b.l2_distance(&z).unwrap(), 1.0);

        let c = Spectrum::new(Arc::clone(&ax), vec![1.0, 3.0]).unwrap();
        assert!((c.l2_distance(&z).unwrap() - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn l2_distance_rejects_length_mismatch() {
        let a = spec(&[1.0, 2.0]);
        let b = spec(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            a.l2_distance(&b),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn spectrum_rejects_non_finite_and_bad_lengths() {
        assert!(Spectrum::new(axis(3), vec![1.0, f64::NAN, 0.0]).is_err());
        assert!(Spectrum::new(axis(3), vec![1.0, 2.0]).is_err());
        assert!(WavelengthAxis::new(vec![1.0, 1.0]).is_err());
        assert!(BandMask::new(vec![(2.0, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn normalize_l2_is_idempotent(vals in prop::collection::vec(0.001f64..10.0, 2..40)) {
            let s = spec(&vals);
            let once = s.normalize_l2().unwrap();
            let twice = once.normalize_l2().unwrap();
            for (a, b) in once.intensities().iter().zip(twice.intensities()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            prop_assert!((once.l2_norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn normalize_max_is_scale_invariant(
            vals in prop::collection::vec(0.001f64..10.0, 2..40),
            c in 0.01f64..100.0,
        ) {
            let s = spec(&vals);
            let scaled = s.with_intensities(vals.iter().map(|v| v * c).collect()).unwrap();
            let a = s.normalize_max().unwrap();
            let b = scaled.normalize_max().unwrap();
            for (x, y) in a.intensities().iter().zip(b.intensities()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn band_mask_output_axis_strictly_increasing(
            vals in prop::collection::vec(0.0f64..5.0, 2..50),
            lo in 240.0f64..900.0,
            width in 0.0f64..200.0,
        ) {
            let s = spec(&vals);
            let mask = BandMask::new(vec![(lo, lo + width)]).unwrap();
            let out = s.apply_band_mask(&mask);
            for pair in out.axis().values().windows(2) {
                prop_assert!(pair[1] > pair[0]);
            }
            prop_assert_eq!(out.len(), out.axis().len());
        }

        #[test]
        fn l2_distance_triangle_inequality(
            a in prop::collection::vec(-5.0f64..5.0, 8),
            b in prop::collection::vec(-5.0f64..5.0, 8),
            c in prop::collection::vec(-5.0f64..5.0, 8),
        ) {
            let ax = axis(8);
            let sa = Spectrum::new(Arc::clone(&ax), a).unwrap();
            let sb = Spectrum::new(Arc::clone(&ax), b).unwrap();
            let sc = Spectrum::new(Arc::clone(&ax), c).unwrap();
            let ab = sa.l2_distance(&sb).unwrap();
            let bc = sb.l2_distance(&sc).unwrap();
            let ac = sa.l2_distance(&sc).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
