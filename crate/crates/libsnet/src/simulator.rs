//! Synthetic LIBS shot generator.
//!
//! The forward model builds a clean spectrum as a sum of Gaussian emission
//! lines weighted by oxide composition, applies the multiplicative effects
//! (instrument response, inverse-square distance attenuation), and adds the
//! additive ones (dark level, decaying continuum, white noise):
//!
//! ```text
//! raw = (clean . irf) / d^2  +  dark + continuum + white
//! ```
//!
//! The level-1a label keeps the multiplicative effects (only additive terms
//! removed); the level-1b label is the fully clean spectrum. Everything is
//! driven by per-shot RNG substreams, so datasets are reproducible and
//! schedule-independent.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::dataio::ShotRecord;
use crate::error::{Error, Result};
use crate::rng;
use crate::spectra::{Normalization, Spectrum, WavelengthAxis};

/// The eight major oxides reported by default.
pub const DEFAULT_OXIDES: [&str; 8] = [
    "SiO2", "TiO2", "Al2O3", "FeOT", "MgO", "CaO", "Na2O", "K2O",
];

/// One Gaussian emission line; `strength` is the peak height at the center
/// for a pure (100 wt.%) sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLine {
    pub center_nm: f64,
    pub width_nm: f64,
    pub strength: f64,
}

/// Per-element emission line lists, in a stable element order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLineDB {
    elements: Vec<(String, Vec<EmissionLine>)>,
}

impl EmissionLineDB {
    pub fn new(elements: Vec<(String, Vec<EmissionLine>)>) -> Result<Self> {
        for (name, lines) in &elements {
            if lines.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "element `{name}` has no emission lines"
                )));
            }
            for l in lines {
                if !(l.width_nm > 0.0) || !(l.strength > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "element `{name}` line at {} nm needs positive width and strength",
                        l.center_nm
                    )));
                }
                if !l.center_nm.is_finite() {
                    return Err(Error::NonFinite("emission line center".into()));
                }
            }
        }
        Ok(Self { elements })
    }

    /// The database shipped with the crate: 3-6 lines per default oxide,
    /// with both isolated and overlapping peaks.
    pub fn builtin() -> Self {
        Self::from_csv_str(include_str!("../data/default_lines.csv"), "<builtin>")
            .expect("builtin line database is valid")
    }

    /// Parse the `element,center_nm,width_nm,strength` CSV format.
    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                path: origin.into(),
                line: 1,
                msg: "empty file".into(),
            })?
            .1
            .trim();
        if header != "element,center_nm,width_nm,strength" {
            return Err(Error::Parse {
                path: origin.into(),
                line: 1,
                msg: format!(
                    "expected header `element,center_nm,width_nm,strength`, got `{header}`"
                ),
            });
        }
        let mut elements: Vec<(String, Vec<EmissionLine>)> = Vec::new();
        for (idx, raw) in lines {
            let lineno = idx + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: lineno,
                    msg: format!("expected 4 columns, got {}", fields.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: origin.into(),
                    line: lineno,
                    msg: format!("bad {what} `{s}`: {e}"),
                })
            };
            let name = fields[0].trim();
            if name.is_empty() {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: lineno,
                    msg: "empty element name".into(),
                });
            }
            let line = EmissionLine {
                center_nm: parse(fields[1], "center_nm")?,
                width_nm: parse(fields[2], "width_nm")?,
                strength: parse(fields[3], "strength")?,
            };
            match elements.iter_mut().find(|(n, _)| n == name) {
                Some((_, ls)) => ls.push(line),
                None => elements.push((name.to_string(), vec![line])),
            }
        }
        Self::new(elements)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("element,center_nm,width_nm,strength\n");
        for (name, lines) in &self.elements {
            for l in lines {
                out.push_str(&format!(
                    "{name},{},{},{}\n",
                    l.center_nm, l.width_nm, l.strength
                ));
            }
        }
        out
    }

    pub fn element_names(&self) -> Vec<&str> {
        self.elements.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn lines_for(&self, element: &str) -> Option<&[EmissionLine]> {
        self.elements
            .iter()
            .find(|(n, _)| n == element)
            .map(|(_, ls)| ls.as_slice())
    }

    /// All line centers must fall inside the axis wavelength range.
    pub fn validate_for_axis(&self, axis: &WavelengthAxis) -> Result<()> {
        let (lo, hi) = (axis.min_nm(), axis.max_nm());
        for (name, lines) in &self.elements {
            for l in lines {
                if l.center_nm < lo || l.center_nm > hi {
                    return Err(Error::InvalidArgument(format!(
                        "line `{name}` at {} nm lies outside the axis range [{lo}, {hi}]",
                        l.center_nm
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Oxide weight-percent vector with its element names.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    element_names: Vec<String>,
    oxide_wt_pct: Vec<f64>,
}

impl Composition {
    pub fn new(element_names: Vec<String>, oxide_wt_pct: Vec<f64>) -> Result<Self> {
        if element_names.len() != oxide_wt_pct.len() {
            return Err(Error::LengthMismatch {
                context: "composition names vs values",
                expected: element_names.len(),
                got: oxide_wt_pct.len(),
            });
        }
        let mut sum = 0.0;
        for (name, &v) in element_names.iter().zip(&oxide_wt_pct) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("composition entry {name}")));
            }
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "composition entry {name} = {v} outside [0, 100] wt.%"
                )));
            }
            sum += v;
        }
        if sum > 100.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "composition sums to {sum} > 100 wt.%"
            )));
        }
        Ok(Self {
            element_names,
            oxide_wt_pct,
        })
    }

    pub fn default_oxides(oxide_wt_pct: Vec<f64>) -> Result<Self> {
        Self::new(
            DEFAULT_OXIDES.iter().map(|s| s.to_string()).collect(),
            oxide_wt_pct,
        )
    }

    pub fn names(&self) -> &[String] {
        &self.element_names
    }

    pub fn values(&self) -> &[f64] {
        &self.oxide_wt_pct
    }

    pub fn len(&self) -> usize {
        self.oxide_wt_pct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oxide_wt_pct.is_empty()
    }
}

/// Per-shot acquisition settings of the forward model.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionParams {
    pub dark_level: f64,
    pub continuum_amplitude: f64,
    pub continuum_decay_nm: f64,
    pub noise_sigma: f64,
    pub distance_m: f64,
    /// Per-bin multiplicative gain, strictly positive, same length as the axis.
    pub irf: Vec<f64>,
    pub rng_seed: u64,
}

impl AcquisitionParams {
    /// Unit gain, no noise, 1 m distance: the identity acquisition.
    pub fn pristine(axis: &WavelengthAxis) -> Self {
        Self {
            dark_level: 0.0,
            continuum_amplitude: 0.0,
            continuum_decay_nm: 100.0,
            noise_sigma: 0.0,
            distance_m: 1.0,
            irf: vec![1.0; axis.len()],
            rng_seed: 0,
        }
    }

    pub fn validate(&self, axis: &WavelengthAxis) -> Result<()> {
        if self.irf.len() != axis.len() {
            return Err(Error::LengthMismatch {
                context: "irf vs axis",
                expected: axis.len(),
                got: self.irf.len(),
            });
        }
        if self.irf.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidArgument(
                "irf must be strictly positive everywhere".into(),
            ));
        }
        if !(1.0..=7.0).contains(&self.distance_m) {
            return Err(Error::InvalidArgument(format!(
                "distance_m = {} outside the operating range [1, 7]",
                self.distance_m
            )));
        }
        if self.dark_level < 0.0
            || self.continuum_amplitude < 0.0
            || self.noise_sigma < 0.0
            || !(self.continuum_decay_nm > 0.0)
        {
            return Err(Error::InvalidArgument(
                "noise parameters must be non-negative with positive decay".into(),
            ));
        }
        Ok(())
    }
}

/// Smooth instrument response: a broad mid-band bump plus a red-end shoulder.
pub fn default_irf(axis: &WavelengthAxis) -> Vec<f64> {
    axis.values()
        .iter()
        .map(|&w| {
            0.85 + 0.30 * (-((w - 420.0) / 180.0).powi(2)).exp()
                + 0.15 * (-((w - 780.0) / 120.0).powi(2)).exp()
        })
        .collect()
}

/// Sum of Gaussian lines weighted by `wt% / 100`, peak-height normalized.
pub fn synth_clean(
    c: &Composition,
    db: &EmissionLineDB,
    axis: &Arc<WavelengthAxis>,
) -> Result<Spectrum> {
    db.validate_for_axis(axis)?;
    let values = axis.values();
    let mut intensities = vec![0.0f64; values.len()];
    for (name, &wt) in c.names().iter().zip(c.values()) {
        let lines = db
            .lines_for(name)
            .ok_or_else(|| Error::UnknownElement(name.clone()))?;
        if wt == 0.0 {
            continue;
        }
        let frac = wt / 100.0;
        for line in lines {
            add_gaussian(values, &mut intensities, line, frac);
        }
    }
    Spectrum::new(Arc::clone(axis), intensities)
}

/// Add `scale * strength * exp(-(w-center)^2 / (2 width^2))`, truncated at
/// six sigma where it is numerically negligible.
fn add_gaussian(axis: &[f64], out: &mut [f64], line: &EmissionLine, scale: f64) {
    let lo = line.center_nm - 6.0 * line.width_nm;
    let hi = line.center_nm + 6.0 * line.width_nm;
    let start = axis.partition_point(|&w| w < lo);
    let amp = scale * line.strength;
    let inv2w2 = 1.0 / (2.0 * line.width_nm * line.width_nm);
    for i in start..axis.len() {
        let w = axis[i];
        if w > hi {
            break;
        }
        let d = w - line.center_nm;
        out[i] += amp * (-d * d * inv2w2).exp();
    }
}

/// Additive noise: dark level + decaying continuum + Gaussian white noise.
pub fn synth_noise<R: Rng>(
    p: &AcquisitionParams,
    axis: &Arc<WavelengthAxis>,
    rng: &mut R,
) -> Spectrum {
    let lambda_min = axis.min_nm();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let intensities = axis
        .values()
        .iter()
        .map(|&w| {
            let continuum =
                p.continuum_amplitude * (-(w - lambda_min) / p.continuum_decay_nm).exp();
            let white = if p.noise_sigma > 0.0 {
                p.noise_sigma * normal.sample(rng)
            } else {
                0.0
            };
            p.dark_level + continuum + white
        })
        .collect();
    Spectrum::new(Arc::clone(axis), intensities).expect("noise spectrum is finite")
}

/// Element-wise product with the instrument response.
pub fn apply_irf(s: &Spectrum, p: &AcquisitionParams) -> Result<Spectrum> {
    if p.irf.len() != s.len() {
        return Err(Error::LengthMismatch {
            context: "irf vs spectrum",
            expected: s.len(),
            got: p.irf.len(),
        });
    }
    let intensities = s
        .intensities()
        .iter()
        .zip(&p.irf)
        .map(|(v, g)| v * g)
        .collect();
    s.with_intensities(intensities)
}

/// Inverse-square attenuation `1 / d^2`.
pub fn apply_distance(s: &Spectrum, distance_m: f64) -> Result<Spectrum> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {distance_m}"
        )));
    }
    let scale = 1.0 / (distance_m * distance_m);
    s.with_intensities(s.intensities().iter().map(|v| v * scale).collect())
}

/// Which corruption the clean label removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PreprocLevel {
    /// Additive effects removed only (dark, continuum, white noise).
    L1a,
    /// Additionally compensates instrument response and distance.
    L1b,
}

impl std::fmt::Display for PreprocLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PreprocLevel::L1a => write!(f, "1a"),
            PreprocLevel::L1b => write!(f, "1b"),
        }
    }
}

impl std::str::FromStr for PreprocLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1a" | "l1a" | "L1a" => Ok(PreprocLevel::L1a),
            "1b" | "l1b" | "L1b" => Ok(PreprocLevel::L1b),
            other => Err(Error::InvalidArgument(format!(
                "unknown preprocessing level `{other}` (expected 1a or 1b)"
            ))),
        }
    }
}

/// One synthesized `(raw, clean)` pair at the requested level, both put
/// through `norm`.
pub fn make_shot(
    c: &Composition,
    p: &AcquisitionParams,
    db: &EmissionLineDB,
    axis: &Arc<WavelengthAxis>,
    level: PreprocLevel,
    norm: Normalization,
) -> Result<(Spectrum, Spectrum)> {
    p.validate(axis)?;
    let x = synth_clean(c, db, axis)?;
    let effects = apply_distance(&apply_irf(&x, p)?, p.distance_m)?;
    let mut noise_rng = rng::substream(p.rng_seed, 0);
    let z = synth_noise(p, axis, &mut noise_rng);
    let raw_un = effects.with_intensities(
        effects
            .intensities()
            .iter()
            .zip(z.intensities())
            .map(|(a, b)| a + b)
            .collect(),
    )?;
    let clean_un = match level {
        PreprocLevel::L1a => effects,
        PreprocLevel::L1b => x,
    };
    Ok((norm.apply(&raw_un)?, norm.apply(&clean_un)?))
}

/// Dataset generation knobs beyond the samplers themselves.
#[derive(Debug, Clone)]
pub struct DatasetOptions {
    pub n_shots: usize,
    pub level: PreprocLevel,
    pub norm: Normalization,
    pub seed: u64,
    /// Consecutive shots sharing one sampled composition and target id.
    pub shots_per_target: usize,
}

impl DatasetOptions {
    pub fn new(n_shots: usize, level: PreprocLevel, seed: u64) -> Self {
        Self {
            n_shots,
            level,
            norm: Normalization::UnitL2,
            seed,
            shots_per_target: 4,
        }
    }
}

/// Dirichlet concentration of the default composition sampler. Values
/// below one favor sparse mixtures, matching rocks dominated by a few
/// oxides.
pub const DEFAULT_DIRICHLET_ALPHA: f64 = 0.35;

/// Draws Dirichlet(alpha) shares scaled to a total mass in `[55, 95]` wt.%.
pub fn default_composition_sampler(rng: &mut ChaCha8Rng) -> Result<Composition> {
    let gamma = Gamma::new(DEFAULT_DIRICHLET_ALPHA, 1.0).expect("valid shape");
    let shares: Vec<f64> = (0..DEFAULT_OXIDES.len())
        .map(|_| {
            let e: f64 = gamma.sample(rng);
            e.max(1e-12)
        })
        .collect();
    let sum: f64 = shares.iter().sum();
    let total = rng.gen_range(55.0..95.0);
    Composition::default_oxides(shares.iter().map(|s| s / sum * total).collect())
}

/// Distance-aware default acquisition: plasma-side terms (continuum, white
/// noise) scale with collected light, the small dark level does not.
pub fn default_param_sampler(axis: &WavelengthAxis) -> impl Fn(&mut ChaCha8Rng) -> AcquisitionParams + '_ {
    move |rng: &mut ChaCha8Rng| {
        let distance_m = rng.gen_range(1.0..7.0);
        let light = 1.0 / (distance_m * distance_m);
        AcquisitionParams {
            dark_level: rng.gen_range(0.0002..0.001),
            continuum_amplitude: rng.gen_range(0.05..0.25) * light,
            continuum_decay_nm: rng.gen_range(80.0..250.0),
            noise_sigma: rng.gen_range(0.001..0.004) * light,
            distance_m,
            irf: default_irf(axis),
            rng_seed: rng.gen(),
        }
    }
}

/// Generate `opts.n_shots` reproducible records. Sampler randomness comes
/// from per-shot substreams of `opts.seed`, so the result does not depend on
/// generation order.
pub fn make_dataset<CS, PS>(
    mut composition_sampler: CS,
    mut param_sampler: PS,
    db: &EmissionLineDB,
    axis: &Arc<WavelengthAxis>,
    opts: &DatasetOptions,
) -> Result<Vec<ShotRecord>>
where
    CS: FnMut(&mut ChaCha8Rng) -> Result<Composition>,
    PS: FnMut(&mut ChaCha8Rng) -> AcquisitionParams,
{
    if opts.n_shots == 0 {
        return Err(Error::EmptyDataset);
    }
    let per_target = opts.shots_per_target.max(1);
    let mut records = Vec::with_capacity(opts.n_shots);
    let mut composition: Option<Composition> = None;
    for i in 0..opts.n_shots {
        let target_idx = i / per_target;
        let mut shot_rng = rng::shot_stream(opts.seed, i as u64);
        if i % per_target == 0 {
            let mut target_rng = rng::shot_stream(opts.seed, (1 << 40) | target_idx as u64);
            composition = Some(composition_sampler(&mut target_rng)?);
        }
        let comp = composition.clone().expect("composition sampled");
        let params = param_sampler(&mut shot_rng);
        let (raw, clean) = make_shot(&comp, &params, db, axis, opts.level, opts.norm)?;
        let (clean_1a, clean_1b) = match opts.level {
            PreprocLevel::L1a => (Some(clean), None),
            PreprocLevel::L1b => (None, Some(clean)),
        };
        records.push(ShotRecord {
            shot_id: format!("shot{i:06}"),
            target_id: format!("target{target_idx:05}"),
            session: format!("synthetic-seed{}", opts.seed),
            distance_m: params.distance_m,
            raw,
            clean_1a,
            clean_1b,
            composition: Some(comp),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis() -> Arc<WavelengthAxis> {
        WavelengthAxis::desk()
    }

    fn single_line_db() -> EmissionLineDB {
        EmissionLineDB::new(vec![(
            "X".into(),
            vec![EmissionLine {
                center_nm: 400.0,
                width_nm: 2.0,
                strength: 1.0,
            }],
        )])
        .unwrap()
    }

    #[test]
    fn zero_composition_gives_zero_spectrum() {
        let db = EmissionLineDB::builtin();
        let c = Composition::default_oxides(vec![0.0; 8]).unwrap();
        let s = synth_clean(&c, &db, &axis()).unwrap();
        assert!(s.intensities().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_sample_peaks_at_line_height() {
        // axis containing 400.0 exactly
        let ax = WavelengthAxis::linspace(240.0, 560.0, 321).unwrap();
        assert!(ax.values().iter().any(|&w| w == 400.0));
        let db = single_line_db();
        let c = Composition::new(vec!["X".into()], vec![100.0]).unwrap();
        let s = synth_clean(&c, &db, &ax).unwrap();
        let peak = s.max_intensity();
        assert!((peak - 1.0).abs() < 1e-12, "peak = {peak}");
        let idx = ax.values().iter().position(|&w| w == 400.0).unwrap();
        assert_eq!(s.intensities()[idx], peak);
        assert!(s.intensities().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn synth_clean_is_linear_in_composition() {
        let db = EmissionLineDB::builtin();
        let ax = axis();
        let mut a = vec![0.0; 8];
        a[0] = 50.0;
        let mut b = vec![0.0; 8];
        b[5] = 50.0;
        let ca = Composition::default_oxides(a).unwrap();
        let cb = Composition::default_oxides(b).unwrap();
        let mut full_a = vec![0.0; 8];
        full_a[0] = 100.0;
        let mut full_b = vec![0.0; 8];
        full_b[5] = 100.0;
        let fa = synth_clean(&Composition::default_oxides(full_a).unwrap(), &db, &ax).unwrap();
        let fb = synth_clean(&Composition::default_oxides(full_b).unwrap(), &db, &ax).unwrap();
        let mut both = vec![0.0; 8];
        both[0] = 50.0;
        both[5] = 50.0;
        let s = synth_clean(&Composition::default_oxides(both).unwrap(), &db, &ax).unwrap();
        let _ = (ca, cb);
        for i in 0..s.len() {
            let expect = 0.5 * (fa.intensities()[i] + fb.intensities()[i]);
            assert!((s.intensities()[i] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn synth_clean_rejects_unknown_elements() {
        let db = single_line_db();
        let c = Composition::new(vec!["Nope".into()], vec![10.0]).unwrap();
        assert!(matches!(
            synth_clean(&c, &db, &axis()),
            Err(Error::UnknownElement(_))
        ));
    }

    #[test]
    fn noise_components_compose() {
        let ax = axis();
        let mut p = AcquisitionParams::pristine(&ax);
        p.dark_level = 0.1;
        let mut r = rng::substream(1, 0);
        let z = synth_noise(&p, &ax, &mut r);
        assert!(z.intensities().iter().all(|&v| (v - 0.1).abs() < 1e-15));

        let p0 = AcquisitionParams::pristine(&ax);
        let z0 = synth_noise(&p0, &ax, &mut r);
        assert!(z0.intensities().iter().all(|&v| v == 0.0));

        let mut pc = AcquisitionParams::pristine(&ax);
        pc.continuum_amplitude = 1.0;
        pc.continuum_decay_nm = 100.0;
        let zc = synth_noise(&pc, &ax, &mut r);
        assert!((zc.intensities()[0] - 1.0).abs() < 1e-12);
        // one decay constant further down the axis
        let idx = ax
            .values()
            .iter()
            .position(|&w| (w - 340.0).abs() < 0.7)
            .unwrap();
        let expect = (-(ax.values()[idx] - 240.0) / 100.0f64).exp();
        assert!((zc.intensities()[idx] - expect).abs() < 1e-12);
    }

    #[test]
    fn white_noise_mean_is_centered() {
        let ax = WavelengthAxis::linspace(240.0, 905.0, 100_000).unwrap();
        let mut p = AcquisitionParams::pristine(&ax);
        p.noise_sigma = 0.5;
        let mut r = rng::substream(42, 0);
        let z = synth_noise(&p, &ax, &mut r);
        let mean = z.intensities().iter().sum::<f64>() / z.len() as f64;
        let bound = 3.0 * 0.5 / (z.len() as f64).sqrt();
        assert!(mean.abs() < bound, "mean {mean} vs bound {bound}");
    }

    #[test]
    fn irf_examples() {
        let ax = WavelengthAxis::linspace(240.0, 905.0, 2).unwrap();
        let s = Spectrum::new(Arc::clone(&ax), vec![1.0, 2.0]).unwrap();
        let mut p = AcquisitionParams::pristine(&ax);
        let out = apply_irf(&s, &p).unwrap();
        assert_eq!(out.intensities(), s.intensities());

        p.irf = vec![0.5, 2.0];
        let out = apply_irf(&s, &p).unwrap();
        assert_eq!(out.intensities(), &[0.5, 4.0]);

        let undone: Vec<f64> = out
            .intensities()
            .iter()
            .zip(&p.irf)
            .map(|(v, g)| v / g)
            .collect();
        for (u, orig) in undone.iter().zip(s.intensities()) {
            assert!((u - orig).abs() < 1e-12);
        }

        p.irf = vec![1.0];
        assert!(apply_irf(&s, &p).is_err());
    }

    #[test]
    fn distance_examples() {
        let ax = WavelengthAxis::linspace(240.0, 905.0, 3).unwrap();
        let s = Spectrum::new(Arc::clone(&ax), vec![4.0, 8.0, 49.0]).unwrap();
        assert_eq!(
            apply_distance(&s, 1.0).unwrap().intensities(),
            s.intensities()
        );
        assert_eq!(
            apply_distance(&s, 2.0).unwrap().intensities(),
            &[1.0, 2.0, 12.25]
        );
        assert!((apply_distance(&s, 7.0).unwrap().intensities()[2] - 1.0).abs() < 1e-12);
        assert!(apply_distance(&s, 0.0).is_err());
        assert!(apply_distance(&s, -1.0).is_err());
    }

    #[test]
    fn pristine_shot_has_equal_raw_and_clean() {
        let ax = axis();
        let db = EmissionLineDB::builtin();
        let mut w = vec![0.0; 8];
        w[0] = 40.0;
        w[4] = 30.0;
        let c = Composition::default_oxides(w).unwrap();
        let p = AcquisitionParams::pristine(&ax);
        for level in [PreprocLevel::L1a, PreprocLevel::L1b] {
            let (raw, clean) =
                make_shot(&c, &p, &db, &ax, level, Normalization::MaxOne).unwrap();
            assert_eq!(raw.intensities(), clean.intensities());
            let x = synth_clean(&c, &db, &ax).unwrap().normalize_max().unwrap();
            assert_eq!(raw.intensities(), x.intensities());
        }
    }

    #[test]
    fn level1b_raw_minus_z_recovers_attenuated_clean() {
        let ax = axis();
        let db = EmissionLineDB::builtin();
        let mut w = vec![0.0; 8];
        w[2] = 55.0;
        let c = Composition::default_oxides(w).unwrap();
        let mut p = AcquisitionParams::pristine(&ax);
        p.dark_level = 0.05;
        p.continuum_amplitude = 0.2;
        p.distance_m = 2.5;
        p.irf = default_irf(&ax);
        // sigma = 0 so z is fully deterministic
        let (raw, clean) =
            make_shot(&c, &p, &db, &ax, PreprocLevel::L1b, Normalization::None).unwrap();
        let mut r = rng::substream(p.rng_seed, 0);
        let z = synth_noise(&p, &ax, &mut r);
        let effects = apply_distance(&apply_irf(&clean, &p).unwrap(), p.distance_m).unwrap();
        for i in 0..raw.len() {
            let lhs = raw.intensities()[i] - z.intensities()[i];
            assert!((lhs - effects.intensities()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn shots_are_deterministic_given_seed() {
        let ax = axis();
        let db = EmissionLineDB::builtin();
        let mut w = vec![0.0; 8];
        w[1] = 25.0;
        w[6] = 25.0;
        let c = Composition::default_oxides(w).unwrap();
        let mut p = AcquisitionParams::pristine(&ax);
        p.noise_sigma = 0.01;
        p.continuum_amplitude = 0.1;
        p.rng_seed = 99;
        let a = make_shot(&c, &p, &db, &ax, PreprocLevel::L1b, Normalization::UnitL2).unwrap();
        let b = make_shot(&c, &p, &db, &ax, PreprocLevel::L1b, Normalization::UnitL2).unwrap();
        assert_eq!(a.0.intensities(), b.0.intensities());
        assert_eq!(a.1.intensities(), b.1.intensities());
    }

    #[test]
    fn dataset_generation_is_reproducible_and_valid() {
        let ax = axis();
        let db = EmissionLineDB::builtin();
        let opts = DatasetOptions::new(50, PreprocLevel::L1b, 7);
        let ds1 = make_dataset(
            default_composition_sampler,
            default_param_sampler(&ax),
            &db,
            &ax,
            &opts,
        )
        .unwrap();
        let ds2 = make_dataset(
            default_composition_sampler,
            default_param_sampler(&ax),
            &db,
            &ax,
            &opts,
        )
        .unwrap();
        assert_eq!(ds1.len(), 50);
        for (a, b) in ds1.iter().zip(&ds2) {
            assert_eq!(a.raw.intensities(), b.raw.intensities());
            assert_eq!(a.shot_id, b.shot_id);
        }

        let bad = DatasetOptions::new(0, PreprocLevel::L1b, 7);
        assert!(matches!(
            make_dataset(
                default_composition_sampler,
                default_param_sampler(&ax),
                &db,
                &ax,
                &bad,
            ),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn generated_compositions_satisfy_invariants() {
        let ax = axis();
        let db = EmissionLineDB::builtin();
        let opts = DatasetOptions::new(1000, PreprocLevel::L1b, 3);
        let ds = make_dataset(
            default_composition_sampler,
            default_param_sampler(&ax),
            &db,
            &ax,
            &opts,
        )
        .unwrap();
        assert_eq!(ds.len(), 1000);
        for rec in &ds {
            let c = rec.composition.as_ref().unwrap();
            let sum: f64 = c.values().iter().sum();
            assert!(sum <= 100.0 + 1e-9);
            assert!(c.values().iter().all(|&v| (0.0..=100.0).contains(&v)));
            assert!((1.0..=7.0).contains(&rec.distance_m));
        }
    }
}
