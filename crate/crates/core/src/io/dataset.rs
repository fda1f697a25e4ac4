//! Datasets: a JSON header plus one payload file per domain.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::table::{fmt_f64, matrix_columns, parse_f64, read_csv, read_json, write_csv, write_json};
use super::FORMAT_VERSION;
use crate::adapt::{Labels, LabeledCovarianceSet};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

pub const DATASET_HEADER: &str = "dataset.json";
const DATASET_FORMAT: &str = "spd-dataset";

/// First bytes of a binary payload file.
pub const BINARY_MAGIC: [u8; 8] = *b"SPDMAT\0\x01";

/// Largest relative asymmetry `max|aᵢⱼ − aⱼᵢ| / max|aᵢⱼ|` accepted without a
/// warning. Matrices are always symmetrized on load.
pub const ASYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Csv,
    Binary,
}

impl Encoding {
    fn extension(self) -> &'static str {
        match self {
            Encoding::Csv => "csv",
            Encoding::Binary => "bin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Class,
    Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub n_domains: usize,
    pub encoding: Encoding,
    pub domains: Vec<DatasetDomain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDomain {
    pub domain_id: String,
    pub count: usize,
    /// Payload file, relative to the header.
    pub file: String,
    pub labels: Option<LabelKind>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

fn file_stem(k: usize, id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{k:03}-{clean}")
}

fn common_dim(sets: &[LabeledCovarianceSet]) -> Result<usize> {
    let mut dim = None;
    for s in sets {
        if let Some(n) = s.dim() {
            match dim {
                None => dim = Some(n),
                Some(m) if m != n => return Err(Error::DimensionMismatch { expected: m, found: n }),
                _ => {}
            }
        }
    }
    dim.ok_or_else(|| Error::EmptyInput("dataset has no matrices".into()))
}

/// Writes `sets` under `dir` and returns the paths written, header first.
pub fn write_dataset(dir: &Path, sets: &[LabeledCovarianceSet], encoding: Encoding) -> Result<Vec<PathBuf>> {
    let n = common_dim(sets)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut domains = Vec::with_capacity(sets.len());
    let mut written = vec![dir.join(DATASET_HEADER)];
    for (k, set) in sets.iter().enumerate() {
        let file = format!("{}.{}", file_stem(k, set.domain_id()), encoding.extension());
        let path = dir.join(&file);
        match encoding {
            Encoding::Csv => write_domain_csv(&path, set, n)?,
            Encoding::Binary => write_domain_binary(&path, set, n)?,
        }
        written.push(path);
        domains.push(DatasetDomain {
            domain_id: set.domain_id().to_string(),
            count: set.len(),
            file,
            labels: set.labels().map(|l| match l {
                Labels::Class(_) => LabelKind::Class,
                Labels::Real(_) => LabelKind::Real,
            }),
            metadata: set.metadata.clone(),
        });
    }
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: FORMAT_VERSION,
        dim: n,
        n_domains: sets.len(),
        encoding,
        domains,
    };
    write_json(&written[0], &header)?;
    Ok(written)
}

fn label_text(labels: &Labels, i: usize) -> String {
    match labels {
        Labels::Class(v) => v[i].to_string(),
        Labels::Real(v) => fmt_f64(v[i]),
    }
}

fn write_domain_csv(path: &Path, set: &LabeledCovarianceSet, n: usize) -> Result<()> {
    let mut header = Vec::new();
    if set.labels().is_some() {
        header.push("label".to_string());
    }
    header.extend(matrix_columns("m", n));
    let rows = set.matrices().iter().enumerate().map(|(i, p)| {
        let mut row = Vec::with_capacity(n * n + 1);
        if let Some(l) = set.labels() {
            row.push(label_text(l, i));
        }
        row.extend(p.as_sym().to_row_major().into_iter().map(fmt_f64));
        row
    });
    write_csv(path, &header, rows)
}

fn write_domain_binary(path: &Path, set: &LabeledCovarianceSet, n: usize) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = Vec::with_capacity(32 + set.len() * (n * n + 1) * 8);
    buf.extend_from_slice(&BINARY_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    match set.labels() {
        None => buf.push(0),
        Some(Labels::Class(v)) => {
            buf.push(1);
            v.iter().for_each(|&c| buf.extend_from_slice(&(c as u64).to_le_bytes()));
        }
        Some(Labels::Real(v)) => {
            buf.push(2);
            v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        }
    }
    for p in set.matrices() {
        for x in p.as_sym().to_row_major() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Raw payload of one domain before validation.
struct RawDomain {
    labels: Option<Labels>,
    entries: Vec<Vec<f64>>,
}

/// `path` may be the dataset directory or its header file.
pub fn read_dataset(path: &Path) -> Result<Vec<LabeledCovarianceSet>> {
    let header_path = if path.is_dir() { path.join(DATASET_HEADER) } else { path.to_path_buf() };
    let dir = header_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let header: DatasetHeader = read_json(&header_path)?;
    if header.format != DATASET_FORMAT {
        return Err(Error::format(&header_path, format!("not a dataset header (format `{}`)", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::format(&header_path, format!("unsupported version {}", header.version)));
    }
    if header.n_domains != header.domains.len() {
        return Err(Error::format(
            &header_path,
            format!("declares {} domains but lists {}", header.n_domains, header.domains.len()),
        ));
    }
    let n = header.dim;
    header
        .domains
        .iter()
        .map(|d| {
            let path = dir.join(&d.file);
            let raw = match header.encoding {
                Encoding::Csv => read_domain_csv(&path, d, n)?,
                Encoding::Binary => read_domain_binary(&path, d, n)?,
            };
            if raw.entries.len() != d.count {
                return Err(Error::format(
                    &path,
                    format!("domain `{}` declares {} items, file has {}", d.domain_id, d.count, raw.entries.len()),
                ));
            }
            let matrices = raw
                .entries
                .iter()
                .enumerate()
                .map(|(i, v)| to_spd(&d.domain_id, i, n, v))
                .collect::<Result<_>>()?;
            let mut set = LabeledCovarianceSet::new(d.domain_id.clone(), matrices, raw.labels)?;
            set.metadata = d.metadata.clone();
            Ok(set)
        })
        .collect()
}

pub(super) fn to_spd(domain: &str, index: usize, n: usize, values: &[f64]) -> Result<SpdMatrix> {
    let context = |msg: String| Error::InvalidInput(format!("domain `{domain}`, item {index}: {msg}"));
    if let Some(k) = values.iter().position(|x| !x.is_finite()) {
        return Err(context(format!("entry ({}, {}) is {}", k / n, k % n, values[k])));
    }
    let m = DMatrix::from_row_slice(n, n, values);
    let scale = m.amax();
    let asym = (&m - m.transpose()).amax();
    if scale > 0.0 && asym > ASYMMETRY_TOLERANCE * scale {
        log::warn!(
            "domain `{domain}`, item {index}: relative asymmetry {:e} symmetrized",
            asym / scale
        );
    }
    SpdMatrix::from_matrix(&m).map_err(|e| context(e.to_string()))
}

fn read_domain_csv(path: &Path, d: &DatasetDomain, n: usize) -> Result<RawDomain> {
    let (header, rows) = read_csv(path)?;
    let offset = usize::from(d.labels.is_some());
    if header.len() != n * n + offset {
        return Err(Error::format(path, format!("expected {} columns, found {}", n * n + offset, header.len())));
    }
    let mut class = Vec::new();
    let mut real = Vec::new();
    let mut entries = Vec::with_capacity(rows.len());
    for (r, rec) in rows.iter().enumerate() {
        match d.labels {
            Some(LabelKind::Class) => class.push(
                rec[0]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::format(path, format!("row {r}: bad class label `{}`", &rec[0])))?,
            ),
            Some(LabelKind::Real) => real.push(parse_f64(path, &rec[0], r)?),
            None => {}
        }
        entries.push(rec.iter().skip(offset).map(|f| parse_f64(path, f, r)).collect::<Result<Vec<_>>>()?);
    }
    let labels = d.labels.map(|k| match k {
        LabelKind::Class => Labels::Class(class),
        LabelKind::Real => Labels::Real(real),
    });
    Ok(RawDomain { labels, entries })
}

fn read_domain_binary(path: &Path, d: &DatasetDomain, n: usize) -> Result<RawDomain> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    if cur.take(8)? != BINARY_MAGIC {
        return Err(Error::format(path, "bad magic bytes"));
    }
    let version = u32::from_le_bytes(cur.array()?);
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(cur.array()?) as usize;
    if dim != n {
        return Err(Error::DimensionMismatch { expected: n, found: dim });
    }
    let count = u64::from_le_bytes(cur.array()?) as usize;
    let kind = cur.take(1)?[0];
    let expected = match d.labels {
        None => 0,
        Some(LabelKind::Class) => 1,
        Some(LabelKind::Real) => 2,
    };
    if kind != expected {
        return Err(Error::format(path, format!("label kind {kind} does not match the header")));
    }
    let labels = match kind {
        1 => Some(Labels::Class(
            (0..count).map(|_| Ok(u64::from_le_bytes(cur.array()?) as usize)).collect::<Result<_>>()?,
        )),
        2 => Some(Labels::Real((0..count).map(|_| cur.f64()).collect::<Result<_>>()?)),
        _ => None,
    };
    let entries = (0..count)
        .map(|_| (0..n * n).map(|_| cur.f64()).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    if cur.pos != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(RawDomain { labels, entries })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.bytes.len() {
            return Err(Error::format(self.path, "unexpected end of file"));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        Ok(self.take(K)?.try_into().expect("length checked"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    fn sets() -> Vec<LabeledCovarianceSet> {
        let mut rng = random::rng(3);
        let a: Vec<SpdMatrix> = (0..4).map(|_| random::spd(&mut rng, 3, 1e3)).collect();
        let b: Vec<SpdMatrix> = (0..3).map(|_| random::spd(&mut rng, 3, 1e3)).collect();
        let mut first = LabeledCovarianceSet::new("a/1", a, Some(Labels::Class(vec![0, 1, 1, 0]))).unwrap();
        first.metadata.insert("seed".into(), "3".into());
        vec![
            first,
            LabeledCovarianceSet::new("b", b.clone(), Some(Labels::Real(vec![-0.1, 1.0 / 3.0, 2e-300]))).unwrap(),
            LabeledCovarianceSet::new("c", b, None).unwrap(),
        ]
    }

    fn bits(sets: &[LabeledCovarianceSet]) -> Vec<u64> {
        sets.iter()
            .flat_map(|s| s.matrices().iter().flat_map(|p| p.as_sym().to_row_major()))
            .map(f64::to_bits)
            .collect()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let original = sets();
        for enc in [Encoding::Csv, Encoding::Binary] {
            let dir = tempfile::tempdir().unwrap();
            let files = write_dataset(dir.path(), &original, enc).unwrap();
            assert_eq!(files.len(), 4);
            let back = read_dataset(dir.path()).unwrap();
            assert_eq!(bits(&back), bits(&original));
            for (x, y) in back.iter().zip(&original) {
                assert_eq!(x.domain_id(), y.domain_id());
                assert_eq!(x.labels(), y.labels());
                assert_eq!(x.metadata, y.metadata);
            }
        }
    }

    #[test]
    fn nan_entry_names_domain_and_index() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_dataset(dir.path(), &sets(), Encoding::Csv).unwrap();
        let text = std::fs::read_to_string(&files[2]).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let mut fields: Vec<&str> = lines[3].split(',').collect();
        fields[5] = "NaN";
        lines[3] = fields.join(",");
        std::fs::write(&files[2], lines.join("\n")).unwrap();
        let err = read_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        let msg = err.to_string();
        assert!(msg.contains("domain `b`") && msg.contains("item 2"), "{msg}");
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let m = [2.0, 0.5, 0.5 + 1e-6, 3.0];
        let p = to_spd("d", 0, 2, &m).unwrap();
        assert_eq!(p.as_sym().get(0, 1), p.as_sym().get(1, 0));
        assert!((p.as_sym().get(0, 1) - (0.5 + 0.5e-6)).abs() < 1e-15);
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &sets(), Encoding::Binary).unwrap();
        let hp = dir.path().join(DATASET_HEADER);
        let mut h: DatasetHeader = read_json(&hp).unwrap();
        h.domains[0].count = 5;
        write_json(&hp, &h).unwrap();
        assert!(matches!(read_dataset(&hp), Err(Error::Format { .. })));
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_dataset(dir.path(), &sets(), Encoding::Binary).unwrap();
        let bytes = std::fs::read(&files[1]).unwrap();
        std::fs::write(&files[1], &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn unknown_header_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &sets(), Encoding::Csv).unwrap();
        let hp = dir.path().join(DATASET_HEADER);
        let text = std::fs::read_to_string(&hp).unwrap().replacen('{', "{\"extra\": 1,", 1);
        std::fs::write(&hp, text).unwrap();
        assert!(matches!(read_dataset(&hp), Err(Error::Format { .. })));
    }
}
