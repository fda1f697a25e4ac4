//! Evaluation reports, confusion matrices and 2-D embeddings.

use std::path::Path;

use super::table::{self, fmt_f64, parse_f64, read_csv, write_csv};
use crate::error::{Error, Result};
use crate::eval::{Confusion, EmbeddingExport};

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    table::write_json(path, value)
}

/// One row per true class, one column per predicted class.
pub fn write_confusion_csv(path: &Path, c: &Confusion) -> Result<()> {
    let k = c.0.len();
    let mut header = vec!["true".to_string()];
    header.extend((0..k).map(|j| format!("pred_{j}")));
    let rows = c.0.iter().enumerate().map(|(i, r)| {
        std::iter::once(i.to_string())
            .chain(r.iter().map(usize::to_string))
            .collect()
    });
    write_csv(path, &header, rows)
}

/// Columns `x,y,label,domain`.
pub fn write_embedding_csv(path: &Path, e: &EmbeddingExport) -> Result<()> {
    let header = ["x", "y", "label", "domain"].map(String::from);
    let rows = e
        .coords
        .iter()
        .zip(&e.labels)
        .zip(&e.domains)
        .map(|((c, l), d)| vec![fmt_f64(c[0]), fmt_f64(c[1]), l.clone(), d.clone()]);
    write_csv(path, &header, rows)
}

pub fn read_embedding_csv(path: &Path) -> Result<EmbeddingExport> {
    let (header, rows) = read_csv(path)?;
    if header != ["x", "y", "label", "domain"] {
        return Err(Error::format(path, "expected columns x,y,label,domain"));
    }
    let mut e = EmbeddingExport {
        coords: Vec::with_capacity(rows.len()),
        labels: Vec::with_capacity(rows.len()),
        domains: Vec::with_capacity(rows.len()),
    };
    for (r, rec) in rows.iter().enumerate() {
        e.coords.push([parse_f64(path, &rec[0], r)?, parse_f64(path, &rec[1], r)?]);
        e.labels.push(rec[2].to_string());
        e.domains.push(rec[3].to_string());
    }
    Ok(e)
}
