//! Image datasets in the IDX format (optionally gzip-compressed).
//!
//! Images become columns of `x` with pixel bytes scaled by 1/255; labels are
//! kept both as indices and as one-hot columns of `y`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

pub const FASHION_CLASS_NAMES: [&str; 10] = [
    "T-shirt/top",
    "Trousers",
    "Pullover",
    "Dress",
    "Coat",
    "Sandal",
    "Shirt",
    "Sneaker",
    "Bag",
    "Ankle boot",
];

pub fn digit_class_names() -> Vec<String> {
    (0..10).map(|d| d.to_string()).collect()
}

pub fn fashion_class_names() -> Vec<String> {
    FASHION_CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    /// `d × m`, one image per column, row-major pixel order.
    pub x: Array2<T>,
    /// `d′ × m` one-hot labels.
    pub y: Array2<T>,
    pub labels: Vec<usize>,
    /// `(height, width)`.
    pub image_shape: (usize, usize),
    pub class_names: Vec<String>,
}

/// Raw IDX image block: `count` images of `rows × cols` bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("{}: bad gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!("images: bad magic number {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format("images: zero image dimension".into()));
    }
    let need = count
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::Format("images: size overflow".into()))?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Format(format!(
            "images: truncated file, expected {need} pixel bytes, found {}",
            body.len()
        )));
    }
    Ok(IdxImages { rows, cols, pixels: body[..need].to_vec() })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!("labels: bad magic number {magic:#010x}")));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Format(format!(
            "labels: truncated file, expected {count} labels, found {}",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count() as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&read_maybe_gzip(path.as_ref())?)
}

/// Loads an image/label file pair with ten digit classes.
pub fn load_idx<T: Real>(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset<T>> {
    let imgs = load_idx_images(images)?;
    let labs = parse_idx_labels(&read_maybe_gzip(labels.as_ref())?)?;
    Dataset::from_bytes(&imgs, &labs, digit_class_names())
}

fn one_hot<T: Real>(labels: &[usize], classes: usize) -> Array2<T> {
    let mut y = Array2::zeros((classes, labels.len()));
    for (j, &l) in labels.iter().enumerate() {
        y[[l, j]] = T::one();
    }
    y
}

impl<T: Real> Dataset<T> {
    pub fn from_bytes(images: &IdxImages, labels: &[u8], class_names: Vec<String>) -> Result<Self> {
        let count = images.count();
        if labels.len() != count {
            return Err(Error::DimensionMismatch(format!(
                "{count} images but {} labels",
                labels.len()
            )));
        }
        let d = images.rows * images.cols;
        let scale = T::of(1.0 / 255.0);
        let x = Array2::from_shape_fn((d, count), |(i, j)| T::of(images.pixels[j * d + i] as f64) * scale);
        let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
        Self::new(x, labels, (images.rows, images.cols), class_names)
    }

    pub fn new(x: Array2<T>, labels: Vec<usize>, image_shape: (usize, usize), class_names: Vec<String>) -> Result<Self> {
        if x.nrows() != image_shape.0 * image_shape.1 {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels per image do not match shape {image_shape:?}",
                x.nrows()
            )));
        }
        if x.ncols() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images but {} labels",
                x.ncols(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Format(format!("label {bad} outside {} classes", class_names.len())));
        }
        let y = one_hot(&labels, class_names.len());
        Ok(Dataset { x, y, labels, image_shape, class_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes() {
            return Err(Error::DimensionMismatch(format!(
                "{} class names for {} classes",
                names.len(),
                self.num_classes()
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    /// Samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Dataset {
            x: self.x.select(Axis(1), indices),
            y: self.y.select(Axis(1), indices),
            labels: indices.iter().map(|&j| self.labels[j]).collect(),
            image_shape: self.image_shape,
            class_names: self.class_names.clone(),
        }
    }

    /// First `count` samples (or all, if fewer).
    pub fn head(&self, count: usize) -> Self {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.select(&idx)
    }

    /// Averages each 2×2 pixel block.
    pub fn reduce_pool2(&self) -> Result<Self> {
        let (h, w) = self.image_shape;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::DimensionMismatch(format!("cannot pool a {h}×{w} image by 2×2 blocks")));
        }
        let (h2, w2) = (h / 2, w / 2);
        let quarter = T::of(0.25);
        let mut x = Array2::zeros((h2 * w2, self.len()));
        for (mut out, col) in x.columns_mut().into_iter().zip(self.x.columns()) {
            for r in 0..h2 {
                for c in 0..w2 {
                    let at = |rr: usize, cc: usize| col[rr * w + cc];
                    let s = at(2 * r, 2 * c) + at(2 * r, 2 * c + 1) + at(2 * r + 1, 2 * c) + at(2 * r + 1, 2 * c + 1);
                    out[r * w2 + c] = s * quarter;
                }
            }
        }
        Dataset::new(x, self.labels.clone(), (h2, w2), self.class_names.clone())
    }

    /// `count` distinct samples, as balanced across classes as the data
    /// allows, with any remainder drawn at random. Indices come back sorted.
    pub fn subsample_indices(&self, count: usize, seed: u64) -> Result<Vec<usize>> {
        if count > self.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot draw {count} samples from a set of {}",
                self.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); self.num_classes()];
        for (j, &l) in self.labels.iter().enumerate() {
            groups[l].push(j);
        }
        for g in groups.iter_mut() {
            g.shuffle(&mut rng);
        }
        let present = groups.iter().filter(|g| !g.is_empty()).count().max(1);
        let quota = count / present;
        let mut chosen = Vec::with_capacity(count);
        let mut rest = Vec::new();
        for g in &groups {
            let take = quota.min(g.len());
            chosen.extend_from_slice(&g[..take]);
            rest.extend_from_slice(&g[take..]);
        }
        rest.sort_unstable();
        rest.shuffle(&mut rng);
        let missing = count - chosen.len();
        chosen.extend_from_slice(&rest[..missing]);
        chosen.sort_unstable();
        Ok(chosen)
    }

    pub fn subsample(&self, count: usize, seed: u64) -> Result<Self> {
        Ok(self.select(&self.subsample_indices(count, seed)?))
    }

    /// Pixel values mapped back to bytes.
    pub fn pixel_bytes(&self) -> IdxImages {
        let d = self.dim();
        let mut pixels = Vec::with_capacity(d * self.len());
        for col in self.x.columns() {
            pixels.extend(col.iter().map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8));
        }
        IdxImages { rows: self.image_shape.0, cols: self.image_shape.1, pixels }
    }

    /// One line per sample: the label, then the pixel values.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        write!(w, "label")?;
        for i in 0..self.dim() {
            write!(w, ",p{i}")?;
        }
        writeln!(w)?;
        for (col, &l) in self.x.columns().into_iter().zip(&self.labels) {
            write!(w, "{l}")?;
            for v in col {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}
