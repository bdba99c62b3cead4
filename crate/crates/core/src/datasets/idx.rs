//! IDX images and labels as distributed with MNIST, raw or gzip-compressed.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::{DataError, LabeledDataset, Split};
use crate::matrix::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Images as stored: `count` row-major `rows × cols` u8 grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn image(&self, k: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[k * n..(k + 1) * n]
    }

    /// Stacks image `k` column by column: entry `c * rows + r` is pixel (r, c).
    pub fn column_major(&self, k: usize) -> Vec<f64> {
        let img = self.image(k);
        let mut out = Vec::with_capacity(img.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.push(img[r * self.cols + c] as f64);
            }
        }
        out
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>, DataError> {
    let io_err = |source: io::Error| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(io_err)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io_err)?;
        return Ok(out);
    }
    Ok(raw)
}

fn header(bytes: &[u8], path: &Path, magic: u32, words: usize) -> Result<Vec<u32>, DataError> {
    let truncated = || DataError::Truncated {
        path: path.display().to_string(),
    };
    let found = bytes.get(..4).ok_or_else(truncated)?;
    let found = u32::from_be_bytes([found[0], found[1], found[2], found[3]]);
    if found != magic {
        return Err(DataError::BadMagic {
            path: path.display().to_string(),
            found,
            expected: magic,
        });
    }
    let h = bytes.get(..4 * words).ok_or_else(truncated)?;
    Ok(h.chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages, DataError> {
    let bytes = read_all(path)?;
    let h = header(&bytes, path, IMAGES_MAGIC, 4)?;
    let (count, rows, cols) = (h[1] as usize, h[2] as usize, h[3] as usize);
    let body = &bytes[16..];
    let need = count * rows * cols;
    if body.len() < need {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
        });
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = read_all(path)?;
    let h = header(&bytes, path, LABELS_MAGIC, 2)?;
    let count = h[1] as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(DataError::Truncated {
            path: path.display().to_string(),
        });
    }
    Ok(body[..count].to_vec())
}

fn write_file(path: &Path, header: &[u32], body: &[u8]) -> Result<(), DataError> {
    let io_err = |source: io::Error| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = io::BufWriter::new(File::create(path).map_err(io_err)?);
    for w in header {
        f.write_all(&w.to_be_bytes()).map_err(io_err)?;
    }
    f.write_all(body).map_err(io_err)?;
    f.flush().map_err(io_err)
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<(), DataError> {
    let n = images.rows * images.cols;
    if n == 0 || !images.pixels.len().is_multiple_of(n) {
        return Err(DataError::Mismatch(
            "pixel buffer is not a whole number of images".into(),
        ));
    }
    let h = [
        IMAGES_MAGIC,
        images.count() as u32,
        images.rows as u32,
        images.cols as u32,
    ];
    write_file(path, &h, &images.pixels)
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<(), DataError> {
    write_file(path, &[LABELS_MAGIC, labels.len() as u32], labels)
}

/// Keeps images labelled `digit_a` (class 0) or `digit_b` (class 1), in file
/// order, with raw 0..=255 pixel values stacked column-major.
pub fn load_mnist_pair(
    images_path: &Path,
    labels_path: &Path,
    digit_a: u8,
    digit_b: u8,
    split: Split,
) -> Result<LabeledDataset, DataError> {
    if digit_a == digit_b {
        return Err(DataError::Mismatch(format!("digits must differ, got {digit_a} twice")));
    }
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count() != labels.len() {
        return Err(DataError::Mismatch(format!(
            "{} images but {} labels",
            images.count(),
            labels.len()
        )));
    }
    let p = images.rows * images.cols;
    let mut data = Vec::new();
    let mut out_labels = Vec::new();
    for (k, &l) in labels.iter().enumerate() {
        let class = if l == digit_a {
            0
        } else if l == digit_b {
            1
        } else {
            continue;
        };
        data.extend(images.column_major(k));
        out_labels.push(class);
    }
    if out_labels.is_empty() {
        return Err(DataError::Empty);
    }
    LabeledDataset::new(Matrix::from_vec(out_labels.len(), p, data), out_labels, split)
}
