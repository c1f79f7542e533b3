use std::path::{Path, PathBuf};

use fedq::data::{idx, load_idx, parse_idx, IdxError};
use fedq::Error;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn loads_fixture_files() {
    let train = load_idx(&fixture("train-images-idx3-ubyte"), &fixture("train-labels-idx1-ubyte")).unwrap();
    assert_eq!(train.len(), 90);
    assert_eq!(train.input_dim(), 16);
    assert_eq!(train.num_classes(), 3);
    assert!(train.features().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(train.label_histogram(), vec![30, 30, 30]);
}

#[test]
fn class_count_can_be_widened() {
    let test = load_idx(&fixture("t10k-images-idx3-ubyte"), &fixture("t10k-labels-idx1-ubyte")).unwrap();
    let wide = idx::with_num_classes(test.clone(), 10).unwrap();
    assert_eq!(wide.num_classes(), 10);
    assert!(idx::with_num_classes(test, 2).is_err());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_idx(&fixture("nope"), &fixture("train-labels-idx1-ubyte")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn swapped_files_are_rejected_by_magic() {
    let images = std::fs::read(fixture("train-images-idx3-ubyte")).unwrap();
    let labels = std::fs::read(fixture("train-labels-idx1-ubyte")).unwrap();
    assert!(matches!(parse_idx(&labels, &images), Err(IdxError::BadMagic { .. })));
}

#[test]
fn truncated_pixels_are_reported() {
    let images = std::fs::read(fixture("train-images-idx3-ubyte")).unwrap();
    let labels = std::fs::read(fixture("train-labels-idx1-ubyte")).unwrap();
    let err = parse_idx(&images[..images.len() - 1], &labels).unwrap_err();
    assert!(matches!(err, IdxError::Truncated { .. }), "{err}");
}

#[test]
fn encode_round_trips_the_fixture() {
    let images = std::fs::read(fixture("t10k-images-idx3-ubyte")).unwrap();
    let labels = std::fs::read(fixture("t10k-labels-idx1-ubyte")).unwrap();
    let (img, lab) = idx::encode_idx(&images[16..], 4, 4, &labels[8..]);
    assert_eq!((img, lab), (images, labels));
}
