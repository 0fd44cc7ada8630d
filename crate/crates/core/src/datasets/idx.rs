use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale images with class labels. Pixels are kept as raw bytes and
/// exposed scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageDataset {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl ImageDataset {
    pub fn from_parts(rows: usize, cols: usize, pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let per = rows * cols;
        if per == 0 || pixels.len() % per != 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("a multiple of {per} pixels"),
                actual: pixels.len().to_string(),
            });
        }
        if pixels.len() / per != labels.len() {
            return Err(Error::CountMismatch {
                images: pixels.len() / per,
                labels: labels.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn label(&self, k: usize) -> usize {
        self.labels[k] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn raw_image(&self, k: usize) -> &[u8] {
        let per = self.pixels_per_image();
        &self.pixels[k * per..(k + 1) * per]
    }

    /// Image `k` with pixels divided by 255.
    pub fn image(&self, k: usize) -> Vec<f64> {
        self.raw_image(k)
            .iter()
            .map(|&p| p as f64 / 255.0)
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut pixels = Vec::with_capacity(indices.len() * self.pixels_per_image());
        let mut labels = Vec::with_capacity(indices.len());
        for &k in indices {
            pixels.extend_from_slice(self.raw_image(k));
            labels.push(self.labels[k]);
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels,
            labels,
        }
    }

    pub fn to_idx_images(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [
            IMAGES_MAGIC,
            self.len() as u32,
            self.rows as u32,
            self.cols as u32,
        ] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn to_idx_labels(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.labels.len());
        out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.labels);
        out
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or(Error::Truncated {
            expected: at + 4,
            actual: bytes.len(),
        })
}

/// Parses an IDX3 image file: returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGES_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = 16 + n * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: LABELS_MAGIC,
            found: magic,
        });
    }
    let n = be_u32(bytes, 4)? as usize;
    if bytes.len() != 8 + n {
        return Err(Error::Truncated {
            expected: 8 + n,
            actual: bytes.len(),
        });
    }
    let labels = bytes[8..].to_vec();
    if let Some(bad) = labels.iter().find(|&&l| l >= 10) {
        return Err(Error::InvalidClass {
            index: *bad as usize,
            classes: 10,
        });
    }
    Ok(labels)
}

pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<ImageDataset> {
    let image_bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (n, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != n {
        return Err(Error::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    ImageDataset::from_parts(rows, cols, pixels, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MnistSplit {
    Train,
    Test,
}

/// Loads a split from a directory holding the standard uncompressed file names.
pub fn load_mnist_dir(dir: &Path, split: MnistSplit) -> Result<ImageDataset> {
    let prefix = match split {
        MnistSplit::Train => "train",
        MnistSplit::Test => "t10k",
    };
    let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let labels = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    if !images.exists() {
        return Err(Error::DatasetNotFound(images));
    }
    load_mnist_idx(&images, &labels)
}
