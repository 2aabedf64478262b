//! Binary image datasets: oriented bars, MNIST digits and derived subsets.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::state::{Clamp, ClampMask};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageDataset {
    width: usize,
    height: usize,
    images: Vec<Vec<u8>>,
    labels: Vec<Option<u8>>,
}

impl ImageDataset {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, images: Vec::new(), labels: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn push(&mut self, pixels: Vec<u8>, label: Option<u8>) -> Result<()> {
        check_len(self.n_pixels(), pixels.len())?;
        if pixels.iter().any(|&p| p > 1) {
            return Err(invalid("pixels must be binary"));
        }
        self.images.push(pixels);
        self.labels.push(label);
        Ok(())
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> Option<u8> {
        self.labels[i]
    }

    pub fn images(&self) -> &[Vec<u8>] {
        &self.images
    }

    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], Option<u8>)> {
        self.images.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for l in self.labels.iter().flatten() {
            *counts.entry(*l).or_insert(0) += 1;
        }
        counts
    }

    /// Items at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut out = Self::new(self.width, self.height);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, len: self.len() });
            }
            out.images.push(self.images[i].clone());
            out.labels.push(self.labels[i]);
        }
        Ok(out)
    }

    /// Keep the listed classes; labels are renumbered to their position in `classes`.
    pub fn select_classes(&self, classes: &[u8]) -> Self {
        let mut out = Self::new(self.width, self.height);
        for (img, label) in self.iter() {
            if let Some(pos) = label.and_then(|l| classes.iter().position(|&c| c == l)) {
                out.images.push(img.to_vec());
                out.labels.push(Some(pos as u8));
            }
        }
        out
    }

    /// Shuffle, then split off the first `n_first` items.
    pub fn shuffle_split<R: Rng + ?Sized>(&self, n_first: usize, rng: &mut R) -> Result<(Self, Self)> {
        if n_first > self.len() {
            return Err(invalid(format!("cannot split {n_first} items from {}", self.len())));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        Ok((self.select(&order[..n_first])?, self.select(&order[n_first..])?))
    }

    /// Pixels followed by a one-hot label block of `n_labels` units.
    pub fn training_vectors(&self, n_labels: usize) -> Result<Vec<Vec<u8>>> {
        self.iter()
            .map(|(img, label)| {
                let mut v = img.to_vec();
                if n_labels > 0 {
                    let l = label.ok_or(Error::Empty("unlabelled item"))? as usize;
                    if l >= n_labels {
                        return Err(Error::IndexOutOfRange { index: l, len: n_labels });
                    }
                    v.extend((0..n_labels).map(|k| (k == l) as u8));
                }
                Ok(v)
            })
            .collect()
    }

    /// Text container with one base64 block of packed pixels per item.
    pub fn to_text(&self) -> Result<String> {
        let doc = Container {
            width: self.width,
            height: self.height,
            items: self
                .iter()
                .map(|(img, label)| Item { label, pixels: B64.encode(pack_bits(img)) })
                .collect(),
        };
        toml::to_string(&doc).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc: Container = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Self::new(doc.width, doc.height);
        for item in doc.items {
            let bytes = B64.decode(item.pixels.as_bytes()).map_err(|e| Error::Format(e.to_string()))?;
            if bytes.len() != out.n_pixels().div_ceil(8) {
                return Err(Error::Format("pixel block has the wrong size".into()));
            }
            out.push(unpack_bits(&bytes, out.n_pixels()), item.label)?;
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Container {
    width: usize,
    height: usize,
    #[serde(default)]
    items: Vec<Item>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Item {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    pixels: String,
}

fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))).collect()
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<u8> {
    (0..n).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}

/// `1` where the intensity reaches half of `max_intensity`.
pub fn binarize(values: &[u8], max_intensity: u8) -> Vec<u8> {
    values.iter().map(|&v| (2 * v as u16 >= max_intensity as u16) as u8).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarsMode {
    /// Bars cross a shared central region.
    Easy,
    /// Each class lives in its own pixel region.
    Hard,
}

/// Pixel coordinates of a class stroke of width 2, offset by `shift`.
fn bar_pixels(side: usize, mode: BarsMode, class: usize, shift: isize) -> Vec<(usize, usize)> {
    let s = side as isize;
    let mut px = Vec::new();
    match mode {
        BarsMode::Easy => {
            let c = s / 2 - 1 + shift;
            for t in 0..s {
                for w in 0..2 {
                    match class {
                        0 => px.push((c + w, t)),
                        1 => px.push((t, c + w)),
                        _ => {
                            let col = t + w + shift;
                            if (0..s).contains(&col) {
                                px.push((t, col));
                            }
                        }
                    }
                }
            }
        }
        BarsMode::Hard => {
            let h = s / 2;
            match class {
                // horizontal, top-left quadrant
                0 => {
                    let r0 = (h - 2) / 2 + shift;
                    for col in 0..h {
                        px.push((r0, col));
                        px.push((r0 + 1, col));
                    }
                }
                // vertical, top-right quadrant
                1 => {
                    let c0 = h + 1 + (h - 4) / 2 + shift;
                    for row in 0..h {
                        px.push((row, c0));
                        px.push((row, c0 + 1));
                    }
                }
                // diagonal, bottom half
                _ => {
                    let off = (s - h) / 2 + shift;
                    for t in 0..(s - h) {
                        px.push((h + t, off + t));
                        px.push((h + t, off + t + 1));
                    }
                }
            }
        }
    }
    px.into_iter().map(|(r, c)| (r as usize, c as usize)).collect()
}

fn check_bars_side(side: usize, mode: BarsMode) -> Result<()> {
    let min = match mode {
        BarsMode::Easy => 6,
        BarsMode::Hard => 8,
    };
    if side < min {
        return Err(invalid(format!("bars side {side} too small (need at least {min})")));
    }
    Ok(())
}

/// Unjittered image of each class: horizontal, vertical, diagonal.
pub fn bar_templates(side: usize, mode: BarsMode) -> Result<[Vec<u8>; 3]> {
    check_bars_side(side, mode)?;
    Ok(std::array::from_fn(|class| render(side, &bar_pixels(side, mode, class, 0))))
}

fn render(side: usize, pixels: &[(usize, usize)]) -> Vec<u8> {
    let mut img = vec![0u8; side * side];
    for &(r, c) in pixels {
        img[r * side + c] = 1;
    }
    img
}

/// Three classes of width-2 bars with a ±1 pixel jitter, shuffled.
pub fn generate_bars<R: Rng + ?Sized>(side: usize, mode: BarsMode, n_per_class: usize, rng: &mut R) -> Result<ImageDataset> {
    check_bars_side(side, mode)?;
    let mut items = Vec::with_capacity(3 * n_per_class);
    for class in 0..3 {
        for _ in 0..n_per_class {
            let shift = rng.random_range(-1i32..=1) as isize;
            items.push((render(side, &bar_pixels(side, mode, class, shift)), class as u8));
        }
    }
    items.shuffle(rng);
    let mut ds = ImageDataset::new(side, side);
    for (img, label) in items {
        ds.push(img, Some(label))?;
    }
    Ok(ds)
}

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

/// Parse IDX image and label files (optionally gzipped) and binarize.
pub fn load_mnist_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<ImageDataset> {
    parse_mnist_idx(&read_maybe_gz(images.as_ref())?, &read_maybe_gz(labels.as_ref())?)
}

pub fn parse_mnist_idx(images: &[u8], labels: &[u8]) -> Result<ImageDataset> {
    let magic = be_u32(images, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(images, 4)? as usize;
    let rows = be_u32(images, 8)? as usize;
    let cols = be_u32(images, 12)? as usize;
    let magic = be_u32(labels, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!("bad label magic {magic:#010x}")));
    }
    let n_labels = be_u32(labels, 4)? as usize;
    if n != n_labels {
        return Err(Error::Format(format!("{n} images but {n_labels} labels")));
    }
    let px = rows * cols;
    if images.len() < 16 + n * px {
        return Err(Error::Format("truncated image file".into()));
    }
    if labels.len() < 8 + n {
        return Err(Error::Format("truncated label file".into()));
    }
    let mut ds = ImageDataset::new(cols, rows);
    for i in 0..n {
        let raw = &images[16 + i * px..16 + (i + 1) * px];
        ds.push(binarize(raw, 255), Some(labels[8 + i]))?;
    }
    Ok(ds)
}

/// IDX encoding of a binary dataset (pixels as 0/255); unlabelled items get 0.
pub fn encode_mnist_idx(ds: &ImageDataset) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::with_capacity(16 + ds.len() * ds.n_pixels());
    images.extend(IMAGES_MAGIC.to_be_bytes());
    images.extend((ds.len() as u32).to_be_bytes());
    images.extend((ds.height as u32).to_be_bytes());
    images.extend((ds.width as u32).to_be_bytes());
    for img in &ds.images {
        images.extend(img.iter().map(|&b| b * 255));
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend(LABELS_MAGIC.to_be_bytes());
    labels.extend((ds.len() as u32).to_be_bytes());
    labels.extend(ds.labels.iter().map(|l| l.unwrap_or(0)));
    (images, labels)
}

/// Class-stratified subset drawn without replacement, then shuffled.
pub fn make_imbalanced<R: Rng + ?Sized>(ds: &ImageDataset, counts: &BTreeMap<u8, usize>, rng: &mut R) -> Result<ImageDataset> {
    let mut picked = Vec::new();
    for (&class, &want) in counts {
        let members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == Some(class)).collect();
        if want > members.len() {
            return Err(invalid(format!("class {class}: requested {want}, only {} available", members.len())));
        }
        picked.extend(index::sample(rng, members.len(), want).into_iter().map(|j| members[j]));
    }
    picked.shuffle(rng);
    ds.select(&picked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    Upper,
    Lower,
}

/// Clamp one half of the image rows to `reference`, leave the other free.
pub fn half_clamp_mask(width: usize, height: usize, half: Half, reference: &[u8]) -> Result<ClampMask> {
    check_len(width * height, reference.len())?;
    let split = height / 2;
    Ok(ClampMask(
        reference
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let lower = i / width >= split;
                if lower == (half == Half::Lower) {
                    Clamp::from_bit(b)
                } else {
                    Clamp::Free
                }
            })
            .collect(),
    ))
}
