//! Feature-bundle encodings (CSV and a small binary container), zoo
//! manifests, and the embedded benchmark score tables.

use crate::Matrix;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"ZOOD";
const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("file does not start with a recognized header")]
    BadMagic,
    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),
    #[error("file ends before the declared contents")]
    TruncatedFile,
    #[error("label or domain value outside the declared range")]
    RangeViolation,
    #[error("malformed content: {0}")]
    Malformed(String),
    #[error("invalid bundle: {0}")]
    InvalidBundle(&'static str),
    #[error("unknown fixture dataset '{0}'")]
    UnknownDataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest parse failed: {0}")]
    ManifestParse(#[from] serde_json::Error),
    #[error("manifest lists a duplicate model id or path: {0}")]
    ManifestDuplicate(String),
}

/// One model's extracted features with labels and domain assignments.
#[derive(Debug, Clone)]
pub struct FeatureBundle {
    pub model_id: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub domains: Vec<usize>,
    /// For concatenated ensembles: (source model, source column) per column.
    pub column_provenance: Option<Vec<(String, usize)>>,
}

impl FeatureBundle {
    pub fn validate(&self) -> Result<(), IoError> {
        let n = self.features.nrows();
        if self.labels.len() != n || self.domains.len() != n {
            return Err(IoError::InvalidBundle(
                "labels and domains must match the feature row count",
            ));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(IoError::InvalidBundle("features must be finite"));
        }
        if let Some(p) = &self.column_provenance {
            if p.len() != self.features.ncols() {
                return Err(IoError::InvalidBundle(
                    "provenance must match the feature column count",
                ));
            }
        }
        Ok(())
    }
}

/// Dataset-level index of bundle files, stored as JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZooManifest {
    pub dataset_name: String,
    pub models: Vec<ManifestEntry>,
    pub class_count: usize,
    pub domain_count: usize,
    pub domain_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub model_id: String,
    pub path: String,
}

impl ZooManifest {
    pub fn validate(&self) -> Result<(), IoError> {
        let mut ids: Vec<&str> = self.models.iter().map(|m| m.model_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(IoError::ManifestDuplicate(w[0].to_string()));
        }
        let mut paths: Vec<&str> = self.models.iter().map(|m| m.path.as_str()).collect();
        paths.sort_unstable();
        if let Some(w) = paths.windows(2).find(|w| w[0] == w[1]) {
            return Err(IoError::ManifestDuplicate(w[0].to_string()));
        }
        Ok(())
    }
}

pub fn read_manifest(path: &Path) -> Result<ZooManifest, IoError> {
    let manifest: ZooManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &ZooManifest, path: &Path) -> Result<(), IoError> {
    manifest.validate()?;
    fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

fn model_id_from(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string())
}

/// Load a bundle, detecting the encoding from the content: the binary
/// container by its magic bytes, otherwise the CSV header. The model id is
/// the file stem.
pub fn read_bundle(path: &Path) -> Result<FeatureBundle, IoError> {
    let bytes = fs::read(path)?;
    let model_id = model_id_from(path);
    if bytes.starts_with(MAGIC) {
        return parse_binary(&bytes, model_id);
    }
    let text = std::str::from_utf8(&bytes).map_err(|_| IoError::BadMagic)?;
    if text.trim_start().starts_with("domain,label") {
        return parse_csv(text, model_id);
    }
    Err(IoError::BadMagic)
}

/// Write a bundle, choosing CSV for a `.csv` extension and the binary
/// container otherwise.
pub fn write_bundle(bundle: &FeatureBundle, path: &Path) -> Result<(), IoError> {
    bundle.validate()?;
    let csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if csv {
        write_csv(bundle, path)
    } else {
        write_binary(bundle, path)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], IoError> {
        let end = self.pos.checked_add(len).ok_or(IoError::TruncatedFile)?;
        if end > self.bytes.len() {
            return Err(IoError::TruncatedFile);
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, IoError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn parse_binary(bytes: &[u8], model_id: String) -> Result<FeatureBundle, IoError> {
    let mut cur = Cursor { bytes, pos: MAGIC.len() };
    let version = cur.u16()?;
    if version != FORMAT_VERSION {
        return Err(IoError::VersionUnsupported(version));
    }
    let n = cur.u32()? as usize;
    let d = cur.u32()? as usize;
    let class_count = cur.u32()? as usize;
    let domain_count = cur.u32()? as usize;
    let mut labels = Vec::with_capacity(n);
    let mut domains = Vec::with_capacity(n);
    for _ in 0..n {
        let domain = cur.u32()? as usize;
        let label = cur.u32()? as usize;
        if domain >= domain_count || label >= class_count {
            return Err(IoError::RangeViolation);
        }
        domains.push(domain);
        labels.push(label);
    }
    let cells = n.checked_mul(d).ok_or(IoError::TruncatedFile)?;
    let raw = cur.take(cells * 8)?;
    // stored row-major; DMatrix is column-major, so place elements explicitly
    let mut features = Matrix::zeros(n, d);
    for r in 0..n {
        for c in 0..d {
            let off = (r * d + c) * 8;
            features[(r, c)] = f64::from_le_bytes(raw[off..off + 8].try_into().unwrap());
        }
    }
    let bundle = FeatureBundle {
        model_id,
        features,
        labels,
        domains,
        column_provenance: None,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn write_binary(bundle: &FeatureBundle, path: &Path) -> Result<(), IoError> {
    let n = bundle.features.nrows();
    let d = bundle.features.ncols();
    let class_count = bundle.labels.iter().max().map_or(0, |m| m + 1);
    let domain_count = bundle.domains.iter().max().map_or(0, |m| m + 1);
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [n, d, class_count, domain_count] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for r in 0..n {
        out.write_all(&(bundle.domains[r] as u32).to_le_bytes())?;
        out.write_all(&(bundle.labels[r] as u32).to_le_bytes())?;
    }
    for r in 0..n {
        for c in 0..d {
            out.write_all(&bundle.features[(r, c)].to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_csv(text: &str, model_id: String) -> Result<FeatureBundle, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| IoError::Malformed("empty file".into()))?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 2 || cols[0] != "domain" || cols[1] != "label" {
        return Err(IoError::Malformed("header must start with domain,label".into()));
    }
    for (i, c) in cols[2..].iter().enumerate() {
        if *c != format!("f{i}") {
            return Err(IoError::Malformed(format!(
                "feature column {} is named '{}'",
                i + 2,
                c
            )));
        }
    }
    let d = cols.len() - 2;
    let mut labels = Vec::new();
    let mut domains = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (lineno, line) in lines {
        let cells: Vec<&str> = line.trim().split(',').collect();
        if cells.len() != d + 2 {
            return Err(IoError::Malformed(format!(
                "line {}: expected {} cells, found {}",
                lineno + 1,
                d + 2,
                cells.len()
            )));
        }
        let bad = |what: &str| IoError::Malformed(format!("line {}: bad {what}", lineno + 1));
        domains.push(cells[0].parse::<usize>().map_err(|_| bad("domain"))?);
        labels.push(cells[1].parse::<usize>().map_err(|_| bad("label"))?);
        for cell in &cells[2..] {
            values.push(cell.parse::<f64>().map_err(|_| bad("feature value"))?);
        }
    }
    let n = labels.len();
    let features = Matrix::from_row_slice(n, d, &values);
    let bundle = FeatureBundle {
        model_id,
        features,
        labels,
        domains,
        column_provenance: None,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn write_csv(bundle: &FeatureBundle, path: &Path) -> Result<(), IoError> {
    let n = bundle.features.nrows();
    let d = bundle.features.ncols();
    let mut out = BufWriter::new(fs::File::create(path)?);
    let mut header = String::from("domain,label");
    for c in 0..d {
        header.push_str(&format!(",f{c}"));
    }
    writeln!(out, "{header}")?;
    for r in 0..n {
        let mut line = format!("{},{}", bundle.domains[r], bundle.labels[r]);
        for c in 0..d {
            line.push(',');
            line.push_str(&format!("{}", bundle.features[(r, c)]));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// One benchmark table: published transfer scores and fine-tuned accuracy
/// per model. Missing method cells mark models without classification heads.
#[derive(Debug, Clone)]
pub struct FixtureTable {
    pub dataset_name: String,
    pub rows: Vec<FixtureRow>,
}

#[derive(Debug, Clone)]
pub struct FixtureRow {
    pub model_number: u32,
    pub leep: Option<f64>,
    pub nce: Option<f64>,
    pub h_score: Option<f64>,
    pub knn: Option<f64>,
    pub logme: Option<f64>,
    pub zood: Option<f64>,
    pub accuracy: f64,
}

pub const FIXTURE_DATASETS: [&str; 7] = [
    "pacs",
    "vlcs",
    "office_home",
    "terra_incognita",
    "nico_animals",
    "nico_vehicles",
    "domainnet",
];

/// Load one of the embedded score tables by dataset name.
pub fn load_fixture(dataset_name: &str) -> Result<FixtureTable, IoError> {
    let text = match dataset_name {
        "pacs" => include_str!("fixtures/pacs.csv"),
        "vlcs" => include_str!("fixtures/vlcs.csv"),
        "office_home" => include_str!("fixtures/office_home.csv"),
        "terra_incognita" => include_str!("fixtures/terra_incognita.csv"),
        "nico_animals" => include_str!("fixtures/nico_animals.csv"),
        "nico_vehicles" => include_str!("fixtures/nico_vehicles.csv"),
        "domainnet" => include_str!("fixtures/domainnet.csv"),
        other => return Err(IoError::UnknownDataset(other.to_string())),
    };
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(IoError::Malformed(format!(
                "fixture row has {} cells",
                cells.len()
            )));
        }
        let opt = |s: &str| -> Result<Option<f64>, IoError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| IoError::Malformed(format!("bad fixture cell '{s}'")))
            }
        };
        rows.push(FixtureRow {
            model_number: cells[0]
                .parse()
                .map_err(|_| IoError::Malformed("bad model number".into()))?,
            leep: opt(cells[1])?,
            nce: opt(cells[2])?,
            h_score: opt(cells[3])?,
            knn: opt(cells[4])?,
            logme: opt(cells[5])?,
            zood: opt(cells[6])?,
            accuracy: cells[7]
                .parse()
                .map_err(|_| IoError::Malformed("bad accuracy".into()))?,
        });
    }
    Ok(FixtureTable {
        dataset_name: dataset_name.to_string(),
        rows,
    })
}
