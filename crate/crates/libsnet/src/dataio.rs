//! Dataset ingestion, the two partition schemes, and model serialization.
//!
//! On-disk formats:
//!
//! - Spectrum CSV: `wavelength_nm,intensity`, header required, one bin per
//!   line, `.` decimal separator.
//! - Manifest: JSON-lines, one object per shot with keys `shot_id,
//!   target_id, session, distance_m, raw_path, clean_1a_path?,
//!   clean_1b_path?, composition?`. An optional object carrying
//!   `manifest_meta` holds provenance and the axis file reference.
//! - Model file: magic bytes, a little-endian `u32` header length, an ASCII
//!   JSON header (version, kind, config, parameter-block table), then the
//!   raw little-endian IEEE-754 64-bit parameter arrays in declared order.
//!
//! Floating-point values in the text formats are printed with Rust's
//! shortest round-trip formatting, so save/load reproduces them exactly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CalibHead, EndToEndNet, NetConfig, PreprocNet};
use crate::nn::Scalar;
use crate::rng;
use crate::simulator::Composition;
use crate::spectra::{Spectrum, WavelengthAxis};

/// One laser shot with its metadata and labels.
#[derive(Debug, Clone)]
pub struct ShotRecord {
    pub shot_id: String,
    pub target_id: String,
    pub session: String,
    pub distance_m: f64,
    pub raw: Spectrum,
    pub clean_1a: Option<Spectrum>,
    pub clean_1b: Option<Spectrum>,
    pub composition: Option<Composition>,
}

/// A loaded dataset: records plus provenance.
#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub records: Vec<ShotRecord>,
    pub provenance: Option<String>,
}

impl DatasetManifest {
    pub fn new(records: Vec<ShotRecord>, provenance: Option<String>) -> Result<Self> {
        let manifest = Self {
            records,
            provenance,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for rec in &self.records {
            if !seen.insert(rec.shot_id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate shot_id `{}`",
                    rec.shot_id
                )));
            }
            if !(rec.distance_m > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "shot `{}` has non-positive distance {}",
                    rec.shot_id, rec.distance_m
                )));
            }
            for (label, s) in [
                ("clean_1a", rec.clean_1a.as_ref()),
                ("clean_1b", rec.clean_1b.as_ref()),
            ] {
                if let Some(s) = s {
                    if !s.same_axis(&rec.raw) {
                        return Err(Error::AxisMismatch(format!(
                            "shot `{}`: {label} spectrum is on a different axis than raw",
                            rec.shot_id
                        )));
                    }
                }
            }
            if let Some(first) = self.records.first() {
                if !rec.raw.same_axis(&first.raw) {
                    return Err(Error::AxisMismatch(format!(
                        "shot `{}` is on a different axis than shot `{}`",
                        rec.shot_id, first.shot_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Spectrum CSV
// ---------------------------------------------------------------------------

pub fn format_spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::with_capacity(s.len() * 24 + 32);
    out.push_str("wavelength_nm,intensity\n");
    for (w, v) in s.axis().values().iter().zip(s.intensities()) {
        let _ = writeln!(out, "{w},{v}");
    }
    out
}

/// Parse the two-column spectrum format. The returned spectrum owns a fresh
/// axis; callers binding several spectra together should re-anchor them to a
/// shared axis (see [`load_manifest`]).
pub fn parse_spectrum_csv(text: &str, origin: &str) -> Result<Spectrum> {
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
    if header != "wavelength_nm,intensity" {
        return Err(Error::Parse {
            path: origin.into(),
            line: 1,
            msg: format!("expected header `wavelength_nm,intensity`, got `{header}`"),
        });
    }
    let mut wavelengths = Vec::new();
    let mut intensities = Vec::new();
    for (idx, raw) in lines {
        let lineno = idx + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let mut fields = row.split(',');
        let (w, v) = match (fields.next(), fields.next(), fields.next()) {
            (Some(w), Some(v), None) => (w, v),
            _ => {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: lineno,
                    msg: format!(
                        "expected 2 columns, got {}",
                        row.split(',').count()
                    ),
                })
            }
        };
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: origin.into(),
                line: lineno,
                msg: format!("bad {what} `{s}`: {e}"),
            })
        };
        wavelengths.push(parse(w, "wavelength")?);
        intensities.push(parse(v, "intensity")?);
    }
    let axis = Arc::new(WavelengthAxis::new(wavelengths).map_err(|e| Error::Parse {
        path: origin.into(),
        line: 1,
        msg: format!("bad wavelength axis: {e}"),
    })?);
    Spectrum::new(axis, intensities).map_err(|e| Error::Parse {
        path: origin.into(),
        line: 1,
        msg: format!("bad intensities: {e}"),
    })
}

pub fn write_spectrum_csv(s: &Spectrum, path: &Path) -> Result<()> {
    std::fs::write(path, format_spectrum_csv(s))?;
    Ok(())
}

pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum> {
    let text = std::fs::read_to_string(path)?;
    parse_spectrum_csv(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Manifest JSONL
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct MetaRow {
    manifest_meta: MetaBody,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaBody {
    version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_path: Option<String>,
}

/// One shot row of the JSON-lines manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRow {
    pub shot_id: String,
    pub target_id: String,
    pub session: String,
    pub distance_m: f64,
    pub raw_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean_1a_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clean_1b_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composition: Option<serde_json::Map<String, serde_json::Value>>,
}

/// Parse one manifest line into a shot row (meta lines return `None`).
pub fn parse_manifest_line(line: &str, origin: &str, lineno: usize) -> Result<Option<ManifestRow>> {
    let trimmed = line.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    let value: serde_json::Value =
        serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            path: origin.into(),
            line: lineno,
            msg: format!("bad JSON: {e}"),
        })?;
    if value.get("manifest_meta").is_some() {
        return Ok(None);
    }
    let row: ManifestRow = serde_json::from_value(value).map_err(|e| Error::Parse {
        path: origin.into(),
        line: lineno,
        msg: format!("bad manifest row: {e}"),
    })?;
    Ok(Some(row))
}

fn composition_to_json(c: &Composition) -> serde_json::Map<String, serde_json::Value> {
    let mut map = serde_json::Map::new();
    for (name, &v) in c.names().iter().zip(c.values()) {
        map.insert(name.clone(), serde_json::json!(v));
    }
    map
}

fn composition_from_json(
    map: &serde_json::Map<String, serde_json::Value>,
    origin: &str,
    lineno: usize,
) -> Result<Composition> {
    let mut names = Vec::with_capacity(map.len());
    let mut values = Vec::with_capacity(map.len());
    for (k, v) in map {
        let x = v.as_f64().ok_or_else(|| Error::Parse {
            path: origin.into(),
            line: lineno,
            msg: format!("composition entry `{k}` is not a number"),
        })?;
        names.push(k.clone());
        values.push(x);
    }
    Composition::new(names, values).map_err(|e| Error::Parse {
        path: origin.into(),
        line: lineno,
        msg: format!("bad composition: {e}"),
    })
}

/// Write `manifest.jsonl`, `axis.csv` and per-shot spectrum CSVs under `dir`.
/// Returns the manifest path.
pub fn save_manifest(manifest: &DatasetManifest, dir: &Path) -> Result<PathBuf> {
    manifest.validate()?;
    let spectra_dir = dir.join("spectra");
    std::fs::create_dir_all(&spectra_dir)?;

    let axis_rel = "axis.csv";
    if let Some(first) = manifest.records.first() {
        let mut axis_text = String::from("wavelength_nm\n");
        for w in first.raw.axis().values() {
            let _ = writeln!(axis_text, "{w}");
        }
        std::fs::write(dir.join(axis_rel), axis_text)?;
    }

    let mut out = String::new();
    let meta = MetaRow {
        manifest_meta: MetaBody {
            version: 1,
            provenance: manifest.provenance.clone(),
            axis_path: manifest.records.first().map(|_| axis_rel.to_string()),
        },
    };
    let _ = writeln!(out, "{}", serde_json::to_string(&meta).expect("meta serializes"));

    for rec in &manifest.records {
        let raw_rel = format!("spectra/{}.raw.csv", rec.shot_id);
        write_spectrum_csv(&rec.raw, &dir.join(&raw_rel))?;
        let clean_1a_path = match &rec.clean_1a {
            Some(s) => {
                let rel = format!("spectra/{}.clean1a.csv", rec.shot_id);
                write_spectrum_csv(s, &dir.join(&rel))?;
                Some(rel)
            }
            None => None,
        };
        let clean_1b_path = match &rec.clean_1b {
            Some(s) => {
                let rel = format!("spectra/{}.clean1b.csv", rec.shot_id);
                write_spectrum_csv(s, &dir.join(&rel))?;
                Some(rel)
            }
            None => None,
        };
        let row = ManifestRow {
            shot_id: rec.shot_id.clone(),
            target_id: rec.target_id.clone(),
            session: rec.session.clone(),
            distance_m: rec.distance_m,
            raw_path: raw_rel,
            clean_1a_path,
            clean_1b_path,
            composition: rec.composition.as_ref().map(composition_to_json),
        };
        let _ = writeln!(out, "{}", serde_json::to_string(&row).expect("row serializes"));
    }

    let manifest_path = dir.join("manifest.jsonl");
    std::fs::write(&manifest_path, out)?;
    Ok(manifest_path)
}

/// Load a manifest and every referenced spectrum. All spectra are re-anchored
/// to one shared axis; a mismatch anywhere is an error naming the shot.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let origin = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut provenance = None;
    let mut records = Vec::new();
    let mut shared_axis: Option<Arc<WavelengthAxis>> = None;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Ok(meta) = serde_json::from_str::<MetaRow>(trimmed) {
            provenance = meta.manifest_meta.provenance;
            continue;
        }
        let row = match parse_manifest_line(line, &origin, lineno)? {
            Some(row) => row,
            None => continue,
        };

        let mut load_spectrum = |rel: &str| -> Result<Spectrum> {
            let s = read_spectrum_csv(&dir.join(rel))?;
            match &shared_axis {
                None => {
                    shared_axis = Some(Arc::clone(s.axis()));
                    Ok(s)
                }
                Some(axis) => {
                    if s.axis().as_ref() == axis.as_ref() {
                        Spectrum::new(Arc::clone(axis), s.intensities().to_vec())
                    } else {
                        Err(Error::AxisMismatch(format!(
                            "{origin}:{lineno}: shot `{}`: `{rel}` disagrees with the dataset axis",
                            row.shot_id
                        )))
                    }
                }
            }
        };

        let raw = load_spectrum(&row.raw_path)?;
        let clean_1a = row
            .clean_1a_path
            .as_deref()
            .map(&mut load_spectrum)
            .transpose()?;
        let clean_1b = row
            .clean_1b_path
            .as_deref()
            .map(&mut load_spectrum)
            .transpose()?;
        let composition = row
            .composition
            .as_ref()
            .map(|m| composition_from_json(m, &origin, lineno))
            .transpose()?;

        records.push(ShotRecord {
            shot_id: row.shot_id,
            target_id: row.target_id,
            session: row.session,
            distance_m: row.distance_m,
            raw,
            clean_1a,
            clean_1b,
            composition,
        });
    }

    DatasetManifest::new(records, provenance)
}

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

/// Random split by shot: `floor(frac * n)` shots go to train, the rest to
/// test. Deterministic in `(manifest, frac, seed)`.
pub fn partition_random(
    manifest: &DatasetManifest,
    train_frac: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must be in (0, 1), got {train_frac}"
        )));
    }
    let n = manifest.records.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot partition {n} shot(s)"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rng::substream(seed, rng::STREAM_SHUFFLE);
    indices.shuffle(&mut rng);
    let n_train = ((train_frac * n as f64).floor() as usize).clamp(1, n - 1);
    let (train_idx, test_idx) = indices.split_at(n_train);
    Ok((
        subset(manifest, train_idx),
        subset(manifest, test_idx),
    ))
}

/// Split by target so no target spans both sides. Targets are taken in
/// descending shot-count order (ties broken by a seeded shuffle) and added
/// to train while the train fraction stays at or below `train_frac`;
/// remaining targets go to test.
pub fn partition_by_target(
    manifest: &DatasetManifest,
    train_frac: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must be in (0, 1), got {train_frac}"
        )));
    }
    let mut targets: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, rec) in manifest.records.iter().enumerate() {
        match targets.iter_mut().find(|(t, _)| *t == rec.target_id) {
            Some((_, idxs)) => idxs.push(i),
            None => targets.push((rec.target_id.clone(), vec![i])),
        }
    }
    if targets.len() < 2 {
        return Err(Error::CannotSplitByTarget(format!(
            "need at least 2 distinct targets, found {}",
            targets.len()
        )));
    }

    let mut rng = rng::substream(seed, rng::STREAM_SHUFFLE);
    targets.shuffle(&mut rng);
    // stable by-size ordering on top of the shuffled tie order
    targets.sort_by(|a, b| b.1.len().cmp(&a.1.len()));

    let total = manifest.records.len() as f64;
    let budget = train_frac * total + 1e-9;
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    let mut train_count = 0usize;
    for (_, idxs) in &targets {
        if (train_count + idxs.len()) as f64 <= budget {
            train_count += idxs.len();
            train_idx.extend_from_slice(idxs);
        } else {
            test_idx.extend_from_slice(idxs);
        }
    }
    // both sides must stay populated: move the smallest group if necessary
    if train_idx.is_empty() {
        let (_, idxs) = targets.last().expect("at least two targets");
        let take: HashSet<usize> = idxs.iter().copied().collect();
        test_idx.retain(|i| !take.contains(i));
        train_idx = idxs.clone();
    } else if test_idx.is_empty() {
        let (_, idxs) = targets.last().expect("at least two targets");
        let take: HashSet<usize> = idxs.iter().copied().collect();
        train_idx.retain(|i| !take.contains(i));
        test_idx = idxs.clone();
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((
        subset(manifest, &train_idx),
        subset(manifest, &test_idx),
    ))
}

fn subset(manifest: &DatasetManifest, indices: &[usize]) -> DatasetManifest {
    DatasetManifest {
        records: indices
            .iter()
            .map(|&i| manifest.records[i].clone())
            .collect(),
        provenance: manifest.provenance.clone(),
    }
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 8] = b"LSNETMDL";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Preproc,
    Calib,
    EndToEnd,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Preproc => write!(f, "preproc"),
            ModelKind::Calib => write!(f, "calib"),
            ModelKind::EndToEnd => write!(f, "e2e"),
        }
    }
}

/// A deserializable network of any kind.
#[derive(Debug, Clone)]
pub enum Model<F> {
    Preproc(PreprocNet<F>),
    Calib(CalibHead<F>),
    EndToEnd(EndToEndNet<F>),
}

impl<F: Scalar> Model<F> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Preproc(_) => ModelKind::Preproc,
            Model::Calib(_) => ModelKind::Calib,
            Model::EndToEnd(_) => ModelKind::EndToEnd,
        }
    }

    pub fn config(&self) -> &NetConfig {
        match self {
            Model::Preproc(n) => n.config(),
            Model::Calib(n) => n.config(),
            Model::EndToEnd(n) => n.config(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Preproc(n) => n.param_count(),
            Model::Calib(n) => n.param_count(),
            Model::EndToEnd(n) => n.param_count(),
        }
    }

    fn state_blocks(&self) -> Vec<(String, Vec<f64>)> {
        match self {
            Model::Preproc(n) => n.state_blocks(),
            Model::Calib(n) => n.state_blocks(),
            Model::EndToEnd(n) => n.state_blocks(),
        }
    }

    fn from_parts(kind: ModelKind, cfg: NetConfig, blocks: &[(String, Vec<f64>)]) -> Result<Self> {
        let mut init_rng = rng::substream(0, rng::STREAM_INIT);
        Ok(match kind {
            ModelKind::Preproc => {
                let mut net = PreprocNet::init(cfg, &mut init_rng)?;
                net.load_state_blocks(blocks)?;
                Model::Preproc(net)
            }
            ModelKind::Calib => {
                let mut net = CalibHead::init(cfg, &mut init_rng)?;
                net.load_state_blocks(blocks)?;
                Model::Calib(net)
            }
            ModelKind::EndToEnd => {
                let mut net = EndToEndNet::init(cfg, &mut init_rng)?;
                net.load_state_blocks(blocks)?;
                Model::EndToEnd(net)
            }
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    kind: ModelKind,
    config: NetConfig,
    precision: String,
    blocks: Vec<BlockEntry>,
    total_len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockEntry {
    name: String,
    len: usize,
}

pub fn model_to_bytes<F: Scalar>(model: &Model<F>) -> Vec<u8> {
    let blocks = model.state_blocks();
    let header = ModelHeader {
        format: "libsnet-model".into(),
        version: MODEL_VERSION,
        kind: model.kind(),
        config: model.config().clone(),
        precision: F::NAME.into(),
        blocks: blocks
            .iter()
            .map(|(name, data)| BlockEntry {
                name: name.clone(),
                len: data.len(),
            })
            .collect(),
        total_len: blocks.iter().map(|(_, d)| d.len()).sum(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + 4 + header_json.len() + header.total_len * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for (_, data) in &blocks {
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parse a model file image. Rejects bad magic, truncated data and
/// inconsistent block tables.
pub fn model_from_bytes<F: Scalar>(bytes: &[u8]) -> Result<Model<F>> {
    if bytes.len() < 12 {
        return Err(Error::ModelFormat("file too short".into()));
    }
    if &bytes[..8] != MODEL_MAGIC {
        return Err(Error::ModelFormat(
            "bad magic bytes (not a model file)".into(),
        ));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let header_end = 12usize
        .checked_add(header_len)
        .ok_or_else(|| Error::ModelFormat("header length overflows".into()))?;
    if bytes.len() < header_end {
        return Err(Error::ModelFormat("truncated header".into()));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| Error::ModelFormat(format!("bad header JSON: {e}")))?;
    if header.format != "libsnet-model" {
        return Err(Error::ModelFormat(format!(
            "unknown format `{}`",
            header.format
        )));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported version {} (expected {MODEL_VERSION})",
            header.version
        )));
    }
    header
        .config
        .validate()
        .map_err(|e| Error::ModelFormat(format!("bad config in header: {e}")))?;
    let declared: usize = header.blocks.iter().map(|b| b.len).sum();
    if declared != header.total_len {
        return Err(Error::ModelFormat(format!(
            "block table sums to {declared}, header declares {}",
            header.total_len
        )));
    }
    let body = &bytes[header_end..];
    let expected_bytes = header
        .total_len
        .checked_mul(8)
        .ok_or_else(|| Error::ModelFormat("parameter count overflows".into()))?;
    if body.len() != expected_bytes {
        return Err(Error::ModelFormat(format!(
            "parameter body has {} bytes, expected {expected_bytes}",
            body.len()
        )));
    }
    let mut blocks = Vec::with_capacity(header.blocks.len());
    let mut offset = 0usize;
    for entry in &header.blocks {
        let mut data = Vec::with_capacity(entry.len);
        for i in 0..entry.len {
            let at = (offset + i) * 8;
            let raw: [u8; 8] = body[at..at + 8].try_into().expect("8 bytes");
            let v = f64::from_le_bytes(raw);
            if !v.is_finite() {
                return Err(Error::ModelFormat(format!(
                    "non-finite value in block `{}`",
                    entry.name
                )));
            }
            data.push(v);
        }
        offset += entry.len;
        blocks.push((entry.name.clone(), data));
    }
    Model::from_parts(header.kind, header.config, &blocks)
}

pub fn save_model<F: Scalar>(model: &Model<F>, path: &Path) -> Result<()> {
    let bytes = model_to_bytes(model);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn load_model<F: Scalar>(path: &Path) -> Result<Model<F>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    model_from_bytes(&bytes)
}

/// Load a model and insist on its kind (and config when given); a mismatch
/// reports both sides.
pub fn load_model_expecting<F: Scalar>(
    path: &Path,
    kind: ModelKind,
    cfg: Option<&NetConfig>,
) -> Result<Model<F>> {
    let model = load_model::<F>(path)?;
    if model.kind() != kind {
        return Err(Error::ConfigMismatch {
            expected: format!("kind {kind}"),
            found: format!("kind {}", model.kind()),
        });
    }
    if let Some(cfg) = cfg {
        if model.config() != cfg {
            return Err(Error::ConfigMismatch {
                expected: format!("{cfg:?}"),
                found: format!("{:?}", model.config()),
            });
        }
    }
    Ok(model)
}
