//! Datasets of 8-bit grayscale images: IDX parsing and writing, center
//! cropping, class filtering and XOR-MNIST composition.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, IdxError, Result};
use crate::scalar::Scalar;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images stored row-major, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
    class_count: usize,
    /// Source digit pair of every XOR-MNIST sample.
    patterns: Option<Vec<(u8, u8)>>,
}

impl Dataset {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>, labels: Vec<u8>, class_count: usize) -> Result<Self> {
        if pixels.len() != labels.len() * height * width {
            return Err(Error::Dataset(format!(
                "{} pixel bytes do not hold {} images of {height}x{width}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(Error::Dataset(format!("label {bad} outside {class_count} classes")));
        }
        Ok(Self {
            height,
            width,
            pixels,
            labels,
            class_count,
            patterns: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn image_scalar<T: Scalar>(&self, i: usize) -> Vec<T> {
        self.image(i).iter().map(|&p| T::lit(p as f64)).collect()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn patterns(&self) -> Option<&[(u8, u8)]> {
        self.patterns.as_deref()
    }

    /// The first `n` samples (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let px = self.height * self.width;
        Dataset {
            height: self.height,
            width: self.width,
            pixels: self.pixels[..n * px].to_vec(),
            labels: self.labels[..n].to_vec(),
            class_count: self.class_count,
            patterns: self.patterns.as_ref().map(|p| p[..n].to_vec()),
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| {
            IdxError::Truncated {
                expected: at + 4,
                found: bytes.len(),
            }
            .into()
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found }.into());
    }
    Ok(())
}

fn check_len(bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(IdxError::Truncated {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    Ok(())
}

/// `(count, height, width, pixels)` from an IDX3 image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let h = be_u32(bytes, 8)? as usize;
    let w = be_u32(bytes, 12)? as usize;
    let total = n * h * w;
    check_len(bytes, 16 + total)?;
    Ok((n, h, w, bytes[16..16 + total].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    check_len(bytes, 8 + n)?;
    Ok(bytes[8..8 + n].to_vec())
}

/// Reads an IDX image/label file pair. The class count is one past the
/// largest label.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<Dataset> {
    let (n, h, w, pixels) = parse_idx_images(&fs::read(image_path)?)?;
    let labels = parse_idx_labels(&fs::read(label_path)?)?;
    if labels.len() != n {
        return Err(IdxError::CountMismatch {
            images: n,
            labels: labels.len(),
        }
        .into());
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    Dataset::new(h, w, pixels, labels, classes)
}

pub fn idx_image_bytes(dataset: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + dataset.pixels.len());
    for v in [
        IMAGE_MAGIC,
        dataset.len() as u32,
        dataset.height as u32,
        dataset.width as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&dataset.pixels);
    out
}

pub fn idx_label_bytes(dataset: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + dataset.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    out.extend_from_slice(&dataset.labels);
    out
}

pub fn write_idx(dataset: &Dataset, image_path: &Path, label_path: &Path) -> Result<()> {
    fs::write(image_path, idx_image_bytes(dataset))?;
    fs::write(label_path, idx_label_bytes(dataset))?;
    Ok(())
}

/// Standard MNIST file names inside `dir`.
pub fn load_mnist(dir: &Path, train: bool) -> Result<Dataset> {
    let prefix = if train { "train" } else { "t10k" };
    let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let labels = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    for p in [&images, &labels] {
        if !p.exists() {
            return Err(Error::Dataset(format!("{} not found", p.display())));
        }
    }
    load_idx(&images, &labels)
}

/// Crops every image to `target × target` around the center. An odd margin
/// leaves the extra row/column on the bottom/right side.
pub fn center_crop(dataset: &Dataset, target: usize) -> Result<Dataset> {
    if target == 0 || target > dataset.height || target > dataset.width {
        return Err(Error::param(
            "h_in",
            format!(
                "crop size {target} must lie in 1..={}",
                dataset.height.min(dataset.width)
            ),
        ));
    }
    let top = (dataset.height - target) / 2;
    let left = (dataset.width - target) / 2;
    let mut pixels = Vec::with_capacity(dataset.len() * target * target);
    for i in 0..dataset.len() {
        let img = dataset.image(i);
        for y in top..top + target {
            pixels.extend_from_slice(&img[y * dataset.width + left..y * dataset.width + left + target]);
        }
    }
    Ok(Dataset {
        height: target,
        width: target,
        pixels,
        labels: dataset.labels.clone(),
        class_count: dataset.class_count,
        patterns: dataset.patterns.clone(),
    })
}

/// Keeps only samples whose label is in `classes`. With `relabel`, the
/// label becomes the position in `classes`.
pub fn filter_classes(dataset: &Dataset, classes: &[usize], relabel: bool) -> Result<Dataset> {
    if classes.is_empty() {
        return Err(Error::param("classes", "must not be empty"));
    }
    let px = dataset.height * dataset.width;
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    let mut patterns = dataset.patterns.as_ref().map(|_| Vec::new());
    for i in 0..dataset.len() {
        let l = dataset.label(i);
        if let Some(pos) = classes.iter().position(|&c| c == l) {
            pixels.extend_from_slice(dataset.image(i));
            labels.push(if relabel { pos as u8 } else { l as u8 });
            if let (Some(out), Some(src)) = (patterns.as_mut(), dataset.patterns.as_ref()) {
                out.push(src[i]);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Dataset(format!("no samples with labels {classes:?}")));
    }
    debug_assert_eq!(pixels.len(), labels.len() * px);
    let class_count = if relabel { classes.len() } else { dataset.class_count };
    Ok(Dataset {
        height: dataset.height,
        width: dataset.width,
        pixels,
        labels,
        class_count,
        patterns,
    })
}

/// Area-weighted box resampling of a square `src × src` image to
/// `dst × dst`, rounding to the nearest byte.
pub fn resample_box(img: &[u8], src: usize, dst: usize) -> Vec<u8> {
    let scale = src as f64 / dst as f64;
    // Overlap of output cell `o` with every source cell, per axis.
    let weights: Vec<Vec<(usize, f64)>> = (0..dst)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = lo + scale;
            (lo.floor() as usize..(hi.ceil() as usize).min(src))
                .map(|s| (s, (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let area = scale * scale;
    let mut out = Vec::with_capacity(dst * dst);
    for wy in &weights {
        for wx in &weights {
            let mut acc = 0.0;
            for &(y, a) in wy {
                for &(x, b) in wx {
                    acc += a * b * img[y * src + x] as f64;
                }
            }
            out.push((acc / area).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Canvas side of an XOR-MNIST sample.
pub const XOR_CANVAS: usize = 40;
/// Side of each digit after downscaling.
pub const XOR_DIGIT: usize = 20;

/// Composes `n_samples` XOR-MNIST images from the 0 and 1 digits of `mnist`
/// (28×28 sources). Each sample places two downscaled digits side by side
/// in rows `[10, 30)` of a blank 40×40 canvas; the label is their XOR. The
/// four patterns 00, 01, 10, 11 appear equally often (the first
/// `n_samples % 4` patterns get one extra) in shuffled order, and digits
/// are drawn uniformly with replacement.
pub fn build_xor_mnist<R: Rng + ?Sized>(mnist: &Dataset, n_samples: usize, rng: &mut R) -> Result<Dataset> {
    let pools: [Vec<usize>; 2] = [0, 1].map(|d| (0..mnist.len()).filter(|&i| mnist.label(i) == d).collect());
    if pools.iter().any(|p| p.is_empty()) {
        return Err(Error::Dataset("XOR composition needs digits 0 and 1".into()));
    }
    if mnist.height != mnist.width || mnist.height < XOR_DIGIT {
        return Err(Error::Dataset(format!(
            "XOR composition needs square sources of at least {XOR_DIGIT} pixels"
        )));
    }
    let mut order: Vec<(u8, u8)> = (0..n_samples)
        .map(|i| match i % 4 {
            0 => (0, 0),
            1 => (0, 1),
            2 => (1, 0),
            _ => (1, 1),
        })
        .collect();
    use rand::seq::SliceRandom;
    order.shuffle(rng);

    let top = (XOR_CANVAS - XOR_DIGIT) / 2;
    let mut pixels = vec![0u8; n_samples * XOR_CANVAS * XOR_CANVAS];
    let mut labels = Vec::with_capacity(n_samples);
    for (s, &(a, b)) in order.iter().enumerate() {
        let canvas = &mut pixels[s * XOR_CANVAS * XOR_CANVAS..(s + 1) * XOR_CANVAS * XOR_CANVAS];
        for (slot, digit) in [a, b].into_iter().enumerate() {
            let pool = &pools[digit as usize];
            let src = pool[rng.gen_range(0..pool.len())];
            let small = resample_box(mnist.image(src), mnist.height, XOR_DIGIT);
            for y in 0..XOR_DIGIT {
                let row = (top + y) * XOR_CANVAS + slot * XOR_DIGIT;
                canvas[row..row + XOR_DIGIT].copy_from_slice(&small[y * XOR_DIGIT..(y + 1) * XOR_DIGIT]);
            }
        }
        labels.push(a ^ b);
    }
    Ok(Dataset {
        height: XOR_CANVAS,
        width: XOR_CANVAS,
        pixels,
        labels,
        class_count: 2,
        patterns: Some(order),
    })
}
