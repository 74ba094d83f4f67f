//! Grayscale images, intensity histograms and the two histogram divergences
//! used as plausibility scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("expected {expected} pixels for the given dimensions, got {found}")]
    PixelCount { expected: usize, found: usize },
    #[error("pixel value {value} exceeds maxval {maxval}")]
    PixelRange { value: u32, maxval: u32 },
    #[error("maxval must be positive")]
    ZeroMaxval,
    #[error("bin count {bins} outside 1..={max}")]
    BinCount { bins: usize, max: usize },
    #[error("histograms are not comparable: {0}")]
    Mismatch(&'static str),
    #[error("reference histogram is empty")]
    EmptyReference,
    #[error("smoothing must be positive, got {0}")]
    Smoothing(f64),
    #[error("maxval {0} exceeds the PGM limit of 65535")]
    PgmMaxval(u32),
    #[error("cannot stack an empty list of images")]
    NothingToStack,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    maxval: u32,
    pixels: Vec<u32>,
}

impl Image {
    pub fn new(width: usize, height: usize, maxval: u32, pixels: Vec<u32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage { width, height });
        }
        if maxval == 0 {
            return Err(ImageError::ZeroMaxval);
        }
        if pixels.len() != width * height {
            return Err(ImageError::PixelCount {
                expected: width * height,
                found: pixels.len(),
            });
        }
        if let Some(&value) = pixels.iter().find(|&&v| v > maxval) {
            return Err(ImageError::PixelRange { value, maxval });
        }
        Ok(Image {
            width,
            height,
            maxval,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, maxval: u32, value: u32) -> Result<Self, ImageError> {
        Self::new(width, height, maxval, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn maxval(&self) -> u32 {
        self.maxval
    }

    /// Row-major pixel values.
    pub fn pixels(&self) -> &[u32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.pixels[y * self.width + x]
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [u32] {
        &mut self.pixels
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<u64>,
    maxval: u32,
}

impl Histogram {
    /// Raw bin counts. Useful for tests and hand-built references.
    pub fn from_counts(bins: Vec<u64>, maxval: u32) -> Self {
        assert!(!bins.is_empty(), "histogram needs at least one bin");
        Histogram { bins, maxval }
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn maxval(&self) -> u32 {
        self.maxval
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    fn check_comparable(&self, other: &Histogram) -> Result<(), ImageError> {
        if self.bins.len() != other.bins.len() {
            return Err(ImageError::Mismatch("different bin counts"));
        }
        if self.maxval != other.maxval {
            return Err(ImageError::Mismatch("different maxval"));
        }
        Ok(())
    }
}

/// Bin of pixel value `v` for `n_bins` bins of width `floor(maxval / n_bins)`;
/// values past the last full bin clamp into it.
#[inline]
pub fn bin_of(v: u32, maxval: u32, n_bins: usize) -> usize {
    let width = (maxval as usize / n_bins).max(1);
    (v as usize / width).min(n_bins - 1)
}

pub fn histogram(image: &Image, n_bins: usize) -> Result<Histogram, ImageError> {
    let max = image.maxval as usize + 1;
    if n_bins == 0 || n_bins > max {
        return Err(ImageError::BinCount { bins: n_bins, max });
    }
    let mut bins = vec![0u64; n_bins];
    for &v in &image.pixels {
        bins[bin_of(v, image.maxval, n_bins)] += 1;
    }
    Ok(Histogram {
        bins,
        maxval: image.maxval,
    })
}

/// Σ (H_r[b] − H_s[b])² / H_r[b] over bins where the reference is non-empty.
pub fn chi2_diff(reference: &Histogram, candidate: &Histogram) -> Result<f64, ImageError> {
    reference.check_comparable(candidate)?;
    if reference.total() == 0 {
        return Err(ImageError::EmptyReference);
    }
    Ok(reference
        .bins
        .iter()
        .zip(&candidate.bins)
        .filter(|(&r, _)| r > 0)
        .map(|(&r, &s)| {
            let d = r as f64 - s as f64;
            d * d / r as f64
        })
        .sum())
}

/// KL(P_r ‖ P_s) in nats after adding `alpha` to every bin of both
/// histograms and normalizing.
pub fn kl_div(reference: &Histogram, candidate: &Histogram, alpha: f64) -> Result<f64, ImageError> {
    reference.check_comparable(candidate)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(ImageError::Smoothing(alpha));
    }
    if reference.bins == candidate.bins {
        return Ok(0.0);
    }
    let k = reference.bins.len() as f64;
    let zr = reference.total() as f64 + alpha * k;
    let zs = candidate.total() as f64 + alpha * k;
    let kl: f64 = reference
        .bins
        .iter()
        .zip(&candidate.bins)
        .map(|(&r, &s)| {
            let pr = (r as f64 + alpha) / zr;
            let ps = (s as f64 + alpha) / zs;
            pr * (pr / ps).ln()
        })
        .sum();
    // Rounding can leave a tiny negative residue for near-identical inputs.
    Ok(kl.max(0.0))
}

/// Binary PGM (P5). One byte per pixel up to maxval 255, else two bytes
/// big-endian.
pub fn write_pgm(image: &Image) -> Result<Vec<u8>, ImageError> {
    if image.maxval > 65535 {
        return Err(ImageError::PgmMaxval(image.maxval));
    }
    let mut out = format!("P5\n{} {}\n{}\n", image.width, image.height, image.maxval).into_bytes();
    if image.maxval <= 255 {
        out.extend(image.pixels.iter().map(|&v| v as u8));
    } else {
        for &v in &image.pixels {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
    }
    Ok(out)
}

/// Concatenates images left to right with `gap` columns of `gap_value`.
pub fn hstack(images: &[Image], gap: usize, gap_value: u32) -> Result<Image, ImageError> {
    let first = images.first().ok_or(ImageError::NothingToStack)?;
    let (height, maxval) = (first.height, first.maxval);
    if images.iter().any(|im| im.height != height) {
        return Err(ImageError::Mismatch("different heights"));
    }
    if images.iter().any(|im| im.maxval != maxval) {
        return Err(ImageError::Mismatch("different maxval"));
    }
    if gap_value > maxval {
        return Err(ImageError::PixelRange {
            value: gap_value,
            maxval,
        });
    }
    let width = images.iter().map(|im| im.width).sum::<usize>() + gap * (images.len() - 1);
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for (k, im) in images.iter().enumerate() {
            if k > 0 {
                pixels.extend(std::iter::repeat_n(gap_value, gap));
            }
            pixels.extend_from_slice(&im.pixels[y * im.width..(y + 1) * im.width]);
        }
    }
    Image::new(width, height, maxval, pixels)
}
