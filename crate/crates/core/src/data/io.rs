//! On-disk dataset layout.
//!
//! A dataset directory holds `manifest.json` plus one binary matrix file per
//! domain for the inputs (and, when present, the ground-truth `x_c` / `x_a`
//! tables). Matrix files are a 16-byte header — the 8-byte magic
//! `CMDGMAT1`, row count and column count as little-endian `u32` — followed by
//! row-major little-endian `f32` values.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{Domain, MultiDomainDataset};
use crate::linalg::Matrix;
use crate::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"CMDGMAT1";
pub const MANIFEST: &str = "manifest.json";

/// Writes `bytes` to a sibling temp file, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * m.as_slice().len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8], origin: &str) -> Result<Matrix> {
    let bad = |reason: &str| Error::Format {
        path: origin.to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < 16 {
        return Err(bad("shorter than the 16-byte header"));
    }
    if &bytes[..8] != MATRIX_MAGIC {
        return Err(bad("bad magic"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() != rows * cols * 4 {
        return Err(bad(&format!(
            "expected {} payload bytes for {rows}×{cols}, found {}",
            rows * cols * 4,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Matrix::from_vec(rows, cols, data))
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestDomain {
    name: String,
    inputs: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    causal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain_features: Option<String>,
    labels: Vec<usize>,
    object_ids: Vec<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    num_classes: usize,
    domains: Vec<ManifestDomain>,
    #[serde(default)]
    generator: serde_json::Value,
}

pub fn write_dataset(ds: &MultiDomainDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(ds.num_domains());
    for (i, d) in ds.domains.iter().enumerate() {
        let inputs = format!("domain_{i}.x.bin");
        write_atomic(&dir.join(&inputs), &encode_matrix(&d.x))?;
        let causal = match &d.xc {
            Some(m) => {
                let f = format!("domain_{i}.xc.bin");
                write_atomic(&dir.join(&f), &encode_matrix(m))?;
                Some(f)
            }
            None => None,
        };
        let domain_features = match &d.xa {
            Some(m) => {
                let f = format!("domain_{i}.xa.bin");
                write_atomic(&dir.join(&f), &encode_matrix(m))?;
                Some(f)
            }
            None => None,
        };
        entries.push(ManifestDomain {
            name: d.name.clone(),
            inputs,
            causal,
            domain_features,
            labels: d.labels.clone(),
            object_ids: d.object_ids.clone(),
        });
    }
    let manifest = Manifest {
        format: "cmdg-dataset".into(),
        version: 1,
        num_classes: ds.num_classes,
        domains: entries,
        generator: ds.generator.clone(),
    };
    write_atomic(
        &dir.join(MANIFEST),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )
}

pub fn read_dataset(dir: &Path) -> Result<MultiDomainDataset> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: Manifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
    if manifest.format != "cmdg-dataset" {
        return Err(Error::Format {
            path: manifest_path.display().to_string(),
            reason: format!("unexpected format tag `{}`", manifest.format),
        });
    }
    let load = |name: &str| -> Result<Matrix> {
        let p = dir.join(name);
        decode_matrix(&fs::read(&p)?, &p.display().to_string())
    };
    let mut domains = Vec::with_capacity(manifest.domains.len());
    for m in manifest.domains {
        domains.push(Domain {
            x: load(&m.inputs)?,
            xc: m.causal.as_deref().map(load).transpose()?,
            xa: m.domain_features.as_deref().map(load).transpose()?,
            name: m.name,
            labels: m.labels,
            object_ids: m.object_ids,
        });
    }
    let mut ds = MultiDomainDataset::new(domains, manifest.num_classes)?;
    ds.generator = manifest.generator;
    Ok(ds)
}
