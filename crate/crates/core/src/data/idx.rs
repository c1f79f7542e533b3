//! Big-endian IDX files (the MNIST container format).

use std::path::Path;

use thiserror::Error;

use super::LabeledDataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("{file}: bad magic number 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic {
        file: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("{file}: truncated while reading {field} (need {needed} bytes, have {available})")]
    Truncated {
        file: &'static str,
        field: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("{file}: {field} is zero")]
    ZeroDimension { file: &'static str, field: &'static str },

    #[error("labels: label {label} at index {index} is not a digit class below {num_classes}")]
    LabelOutOfRange {
        index: usize,
        label: u8,
        num_classes: usize,
    },
}

struct Reader<'a> {
    file: &'static str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, field: &'static str, n: usize) -> Result<&'a [u8], IdxError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(IdxError::Truncated {
                file: self.file,
                field,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, IdxError> {
        let b = self.take(field, 4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn dim(&mut self, field: &'static str) -> Result<usize, IdxError> {
        match self.u32(field)? {
            0 => Err(IdxError::ZeroDimension { file: self.file, field }),
            n => Ok(n as usize),
        }
    }

    fn magic(&mut self, expected: u32) -> Result<(), IdxError> {
        let found = self.u32("magic")?;
        if found != expected {
            return Err(IdxError::BadMagic {
                file: self.file,
                expected,
                found,
            });
        }
        Ok(())
    }
}

/// Parse in-memory IDX image and label files. Pixels are scaled by 1/255.
///
/// The class count is `max(label) + 1`, at least 2.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<LabeledDataset, IdxError> {
    let mut img = Reader {
        file: "images",
        bytes: images,
        pos: 0,
    };
    img.magic(IMAGES_MAGIC)?;
    let count = img.dim("image count")?;
    let rows = img.dim("rows")?;
    let cols = img.dim("cols")?;
    let dim = rows * cols;
    let pixels = img.take("pixel data", count * dim)?;

    let mut lab = Reader {
        file: "labels",
        bytes: labels,
        pos: 0,
    };
    lab.magic(LABELS_MAGIC)?;
    let label_count = lab.dim("label count")?;
    if label_count != count {
        return Err(IdxError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let raw_labels = lab.take("label data", label_count)?;

    // Labels are bytes; anything beyond 255 classes cannot be expressed.
    let num_classes = (raw_labels.iter().copied().max().unwrap_or(0) as usize + 1).max(2);
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = raw_labels.iter().map(|&l| l as usize).collect();
    Ok(LabeledDataset::new(features, labels, dim, num_classes).expect("parsed IDX is well-formed"))
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    Ok(parse_idx(&images, &labels)?)
}

/// Pad or restrict the class count after parsing, e.g. to force K = 10 on a
/// subset that happens to miss the top digit.
pub fn with_num_classes(ds: LabeledDataset, num_classes: usize) -> Result<LabeledDataset> {
    if let Some((index, &label)) = ds.labels().iter().enumerate().find(|(_, &y)| y >= num_classes) {
        return Err(IdxError::LabelOutOfRange {
            index,
            label: label as u8,
            num_classes,
        }
        .into());
    }
    let dim = ds.input_dim();
    LabeledDataset::new(ds.features().to_vec(), ds.labels().to_vec(), dim, num_classes)
}

/// Encode a dataset with byte-valued pixels and labels as an IDX pair.
pub fn encode_idx(pixels: &[u8], rows: u32, cols: u32, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    // two 2x2 images, written out byte by byte
    const IMAGES: [u8; 24] = [
        0x00, 0x00, 0x08, 0x03, // magic
        0x00, 0x00, 0x00, 0x02, // count
        0x00, 0x00, 0x00, 0x02, // rows
        0x00, 0x00, 0x00, 0x02, // cols
        0, 255, 51, 102, //
        255, 0, 0, 204,
    ];
    const LABELS: [u8; 10] = [0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 1];

    #[test]
    fn hand_built_fixture() {
        let ds = parse_idx(&IMAGES, &LABELS).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.input_dim(), 4);
        assert_eq!(ds.row(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.row(1), &[1.0, 0.0, 0.0, 0.8]);
        assert_eq!(ds.labels(), &[7, 1]);
        assert_eq!(ds.num_classes(), 8);
        assert_eq!(
            encode_idx(&IMAGES[16..], 2, 2, &LABELS[8..]),
            (IMAGES.to_vec(), LABELS.to_vec())
        );
    }

    #[test]
    fn bad_magic() {
        let mut img = IMAGES;
        img[3] = 0x01;
        assert_eq!(
            parse_idx(&img, &LABELS).unwrap_err(),
            IdxError::BadMagic {
                file: "images",
                expected: IMAGES_MAGIC,
                found: 0x801
            }
        );
        let mut lab = LABELS;
        lab[3] = 0x03;
        assert!(matches!(
            parse_idx(&IMAGES, &lab).unwrap_err(),
            IdxError::BadMagic { file: "labels", .. }
        ));
    }

    #[test]
    fn truncation_names_field() {
        match parse_idx(&IMAGES[..20], &LABELS).unwrap_err() {
            IdxError::Truncated {
                file,
                field,
                needed,
                available,
            } => {
                assert_eq!((file, field, needed, available), ("images", "pixel data", 8, 4));
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            parse_idx(&IMAGES[..10], &LABELS).unwrap_err(),
            IdxError::Truncated { field: "rows", .. }
        ));
        assert!(matches!(
            parse_idx(&IMAGES, &LABELS[..9]).unwrap_err(),
            IdxError::Truncated {
                file: "labels",
                field: "label data",
                ..
            }
        ));
    }

    #[test]
    fn count_mismatch() {
        let mut lab = LABELS.to_vec();
        lab[7] = 3;
        lab.push(4);
        assert_eq!(
            parse_idx(&IMAGES, &lab).unwrap_err(),
            IdxError::CountMismatch { images: 2, labels: 3 }
        );
    }

    #[test]
    fn class_override() {
        let ds = parse_idx(&IMAGES, &LABELS).unwrap();
        assert_eq!(with_num_classes(ds.clone(), 10).unwrap().num_classes(), 10);
        assert!(with_num_classes(ds, 5).is_err());
    }
}
