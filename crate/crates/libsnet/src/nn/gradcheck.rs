//! Central finite-difference gradient verification.
//!
//! The comparison runs a scalar-valued function twice per coordinate, so it
//! is meant for tiny instances in double precision. Components register a
//! closure over a flat coordinate vector (parameters and/or inputs) plus the
//! analytic gradient at that point.

/// Relative error between an analytic and a numeric derivative.
///
/// The denominator is floored so coordinates whose true gradient is ~0 are
/// compared on an absolute scale instead of amplifying finite-difference
/// noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-4);
    (analytic - numeric).abs() / denom
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_diff_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut point = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Worst relative error of `analytic` against central differences of `f`.
pub fn grad_check(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    h: f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let numeric = central_diff_grad(f, x, h);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Outcome of one component's finite-difference check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub component: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<24} max rel err {:>12.3e}  (tolerance {:.0e})  {}",
            self.component,
            self.max_rel_err,
            self.tolerance,
            if self.passed() { "ok" } else { "FAIL" }
        )
    }
}
