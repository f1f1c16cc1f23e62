//! Output files. Every write goes to a temporary sibling first and is renamed
//! into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CORESET_FILE: &str = "coreset.txt";
pub const PROBABILITIES_FILE: &str = "probabilities.txt";
pub const MASK_IMAGE_FILE: &str = "mask.pgm";
pub const MODEL_FILE: &str = "model.bin";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Selected coordinates of a square-or-rectangular feature grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    pub width: usize,
    pub height: usize,
    pub selected: Vec<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct RunArtifacts {
    pub metrics: Vec<Value>,
    pub coreset: Option<Vec<usize>>,
    pub probabilities: Option<Vec<f64>>,
    pub mask_image: Option<MaskImage>,
}

pub fn format_jsonl(rows: &[Value]) -> String {
    rows.iter().map(|r| format!("{r}\n")).collect()
}

pub fn format_indices(indices: &[usize]) -> String {
    indices.iter().map(|i| format!("{i}\n")).collect()
}

/// One value per line in shortest round-trip form.
pub fn format_values(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}\n")).collect()
}

/// Plain (ASCII) PGM: selected pixels white, the rest black.
pub fn format_pgm(image: &MaskImage) -> Result<String> {
    if image.width * image.height != image.selected.len() {
        return Err(Error::Input(format!(
            "{}x{} image for {} mask entries",
            image.width,
            image.height,
            image.selected.len()
        )));
    }
    let mut out = format!("P2\n{} {}\n255\n", image.width, image.height);
    for row in image.selected.chunks(image.width.max(1)) {
        let line: Vec<&str> = row.iter().map(|&on| if on { "255" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Writes the artifacts under `dir` and returns the paths written.
pub fn emit_report(artifacts: &RunArtifacts, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    put(METRICS_FILE, format_jsonl(&artifacts.metrics))?;
    if let Some(c) = &artifacts.coreset {
        put(CORESET_FILE, format_indices(c))?;
    }
    if let Some(s) = &artifacts.probabilities {
        put(PROBABILITIES_FILE, format_values(s))?;
    }
    if let Some(img) = &artifacts.mask_image {
        put(MASK_IMAGE_FILE, format_pgm(img)?)?;
    }
    Ok(written)
}
