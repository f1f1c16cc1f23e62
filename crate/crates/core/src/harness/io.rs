//! Dataset ingestion: IDX containers (optionally gzipped) and labelled CSV.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::dataset::{Dataset, LabeledExample};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw pixel container as stored in an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        for v in [self.count, self.rows, self.cols] {
            out.extend_from_slice(&(v as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Reads a file, inflating it when it carries the gzip signature.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(bytes: &[u8], words: usize, what: &str) -> Result<Vec<usize>> {
    if bytes.len() < 4 * words {
        return Err(Error::Data(format!("{what}: truncated header")));
    }
    Ok((0..words)
        .map(|i| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize)
        .collect())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = header(bytes, 1, "image file")?[0] as u32;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Data(format!(
            "image file: wrong magic {magic:#010x} (expected {IDX_IMAGES_MAGIC:#010x})"
        )));
    }
    let h = header(bytes, 4, "image file")?;
    let (count, rows, cols) = (h[1], h[2], h[3]);
    let want = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < want {
        return Err(Error::Data(format!(
            "image file: truncated payload ({} of {want} bytes)",
            payload.len()
        )));
    }
    if payload.len() > want {
        return Err(Error::Data(format!(
            "image file: {} trailing bytes",
            payload.len() - want
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = header(bytes, 1, "label file")?[0] as u32;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Data(format!(
            "label file: wrong magic {magic:#010x} (expected {IDX_LABELS_MAGIC:#010x})"
        )));
    }
    let count = header(bytes, 2, "label file")?[1];
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::Data(format!(
            "label file: truncated payload ({} of {count} bytes)",
            payload.len()
        )));
    }
    Ok(payload.to_vec())
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Builds a dataset from decoded IDX containers; pixels are scaled to [0, 1]
/// and the class count is one more than the largest label.
pub fn dataset_from_idx(images: &IdxImages, labels: &[u8]) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let d = images.rows * images.cols;
    if images.count == 0 || d == 0 {
        return Err(Error::Data("IDX files hold no examples".into()));
    }
    let num_classes = labels.iter().copied().max().unwrap_or(0) as usize + 1;
    let features: Vec<f64> = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    Dataset::from_rows(&features, &labels, num_classes, d)
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let imgs = parse_idx_images(&read_maybe_gzip(images)?)
        .map_err(|e| Error::Data(format!("{}: {e}", images.display())))?;
    let labs = parse_idx_labels(&read_maybe_gzip(labels)?)
        .map_err(|e| Error::Data(format!("{}: {e}", labels.display())))?;
    dataset_from_idx(&imgs, &labs)
}

/// Parses `label,f0,f1,...` rows. Labels may be any integers; they are mapped
/// densely onto `0..C` in increasing numeric order.
pub fn parse_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("reading header: {e}")))?
        .clone();
    if headers.get(0) != Some("label") || headers.len() < 2 {
        return Err(Error::Data("missing header `label,f0,f1,...`".into()));
    }
    let d = headers.len() - 1;
    let mut raw_labels = Vec::new();
    let mut features = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        if record.len() != d + 1 {
            return Err(Error::Data(format!(
                "line {line}: ragged row with {} features (expected {d})",
                record.len().saturating_sub(1)
            )));
        }
        let label: i64 = record[0]
            .parse()
            .map_err(|_| Error::Data(format!("line {line}: non-numeric label `{}`", &record[0])))?;
        raw_labels.push(label);
        for cell in record.iter().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("line {line}: non-numeric cell `{cell}`")))?;
            features.push(v);
        }
    }
    if raw_labels.is_empty() {
        return Err(Error::Data("CSV has no rows".into()));
    }
    let dense: BTreeMap<i64, usize> = {
        let mut keys: Vec<i64> = raw_labels.clone();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect()
    };
    let examples = raw_labels
        .iter()
        .zip(features.chunks(d))
        .map(|(l, f)| LabeledExample::new(f.to_vec(), dense[l]))
        .collect();
    Dataset::new(examples, dense.len(), d)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::GzEncoder;
    use flate2::Compression;
    use std::io::Write;

    fn two_images() -> IdxImages {
        IdxImages {
            count: 2,
            rows: 2,
            cols: 3,
            pixels: vec![0, 255, 51, 0, 0, 0, 255, 255, 255, 102, 0, 0],
        }
    }

    #[test]
    fn idx_pair_parses() {
        let ds = dataset_from_idx(&parse_idx_images(&two_images().encode()).unwrap(), &[1, 0]).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.feature_dim(), 6);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.example(0).features[1], 1.0);
        assert!((ds.example(0).features[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn wrong_magic_is_reported() {
        let err = parse_idx_images(&encode_idx_labels(&[1, 2])).unwrap_err();
        assert!(err.to_string().contains("wrong magic"), "{err}");
        assert!(parse_idx_labels(&two_images().encode()).is_err());
    }

    #[test]
    fn truncation_is_reported() {
        let mut bytes = two_images().encode();
        bytes.truncate(bytes.len() - 1);
        assert!(parse_idx_images(&bytes).unwrap_err().to_string().contains("truncated"));
        assert!(parse_idx_images(&bytes[..10]).unwrap_err().to_string().contains("truncated"));
        let labels = encode_idx_labels(&[1, 2, 3]);
        assert!(parse_idx_labels(&labels[..9]).is_err());
    }

    #[test]
    fn count_mismatch_is_reported() {
        assert!(dataset_from_idx(&two_images(), &[1, 0, 2]).is_err());
    }

    #[test]
    fn gzip_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.gz");
        let lab = dir.path().join("lab");
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        gz.write_all(&two_images().encode()).unwrap();
        fs::write(&img, gz.finish().unwrap()).unwrap();
        fs::write(&lab, encode_idx_labels(&[3, 4])).unwrap();
        let ds = load_idx(&img, &lab).unwrap();
        assert_eq!(ds.num_classes(), 5);
    }

    #[test]
    fn idx_round_trip_reproduces_bytes() {
        let bytes = two_images().encode();
        assert_eq!(parse_idx_images(&bytes).unwrap().encode(), bytes);
        let labels = encode_idx_labels(&[7, 0, 9]);
        assert_eq!(encode_idx_labels(&parse_idx_labels(&labels).unwrap()), labels);
    }

    #[test]
    fn csv_rows_and_reindexing() {
        let ds = parse_csv("label,f0,f1\n7,1.0,2.0\n3,0.5,0.1\n7,-1,0\n".as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels().collect::<Vec<_>>(), vec![1, 0, 1]);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn csv_errors() {
        assert!(parse_csv("label,f0,f1\n1,2.0\n".as_bytes())
            .unwrap_err()
            .to_string()
            .contains("ragged"));
        assert!(parse_csv("label,f0\n1,abc\n".as_bytes())
            .unwrap_err()
            .to_string()
            .contains("non-numeric"));
        assert!(parse_csv("1,2.0\n0,1.0\n".as_bytes())
            .unwrap_err()
            .to_string()
            .contains("header"));
    }
}
