//! Pixel planes, feature grids, PPM I/O and the pooling/duplication
//! operators shared by the encoder and decoder.
//!
//! Samples are stored as `f32` in `[-1, 1]`, interleaved RGB, row-major.
//! Every reduction accumulates in `f64` so results do not depend on the
//! platform's float evaluation order.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Side of the square block all images are padded to.
pub const BLOCK: usize = 16;

pub const CHANNELS: usize = 3;

#[inline]
pub fn byte_to_sample(b: u8) -> f32 {
    (b as f64 / 255.0 * 2.0 - 1.0) as f32
}

#[inline]
pub fn sample_to_byte(s: f32) -> u8 {
    ((s as f64 + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// An RGB image with samples normalized to `[-1, 1]`.
///
/// `width`/`height` are the stored (possibly padded) dimensions; the
/// `true_*` dimensions describe the original image and always fit inside.
#[derive(Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    true_width: usize,
    true_height: usize,
    samples: Vec<f32>,
}

impl fmt::Debug for ImagePlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImagePlane")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("true_width", &self.true_width)
            .field("true_height", &self.true_height)
            .finish_non_exhaustive()
    }
}

impl ImagePlane {
    /// Wraps interleaved RGB samples. True dimensions equal the stored ones.
    pub fn new(width: usize, height: usize, samples: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ShapeMismatch("image dimensions must be non-zero".into()));
        }
        if samples.len() != width * height * CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {width}x{height} RGB image",
                samples.len()
            )));
        }
        if let Some(s) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(Error::ShapeMismatch(format!("sample {s} outside [-1, 1]")));
        }
        Ok(Self {
            width,
            height,
            true_width: width,
            true_height: height,
            samples,
        })
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "{} bytes for a {width}x{height} RGB image",
                bytes.len()
            )));
        }
        Self::new(width, height, bytes.iter().map(|&b| byte_to_sample(b)).collect())
    }

    pub(crate) fn with_true_dims(mut self, true_width: usize, true_height: usize) -> Self {
        debug_assert!(true_width <= self.width && true_height <= self.height);
        self.true_width = true_width;
        self.true_height = true_height;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn true_width(&self) -> usize {
        self.true_width
    }

    pub fn true_height(&self) -> usize {
        self.true_height
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.samples[(y * self.width + x) * CHANNELS + c]
    }

    /// Interleaved RGB bytes of the true-dimension window.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.true_width * self.true_height * CHANNELS);
        for y in 0..self.true_height {
            let row = &self.samples[y * self.width * CHANNELS..][..self.true_width * CHANNELS];
            out.extend(row.iter().map(|&s| sample_to_byte(s)));
        }
        out
    }

    /// Drops padding, keeping only the true-dimension window.
    pub fn cropped(&self) -> ImagePlane {
        if self.width == self.true_width && self.height == self.true_height {
            return self.clone();
        }
        let mut samples = Vec::with_capacity(self.true_width * self.true_height * CHANNELS);
        for y in 0..self.true_height {
            samples.extend_from_slice(
                &self.samples[y * self.width * CHANNELS..][..self.true_width * CHANNELS],
            );
        }
        ImagePlane {
            width: self.true_width,
            height: self.true_height,
            true_width: self.true_width,
            true_height: self.true_height,
            samples,
        }
    }

    pub fn is_block_aligned(&self) -> bool {
        self.width % BLOCK == 0 && self.height % BLOCK == 0
    }
}

/// `h x w` cells of `d`-dimensional feature vectors, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    h: usize,
    w: usize,
    d: usize,
    values: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(h: usize, w: usize, d: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != h * w * d {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {h}x{w}x{d} grid",
                values.len()
            )));
        }
        Ok(Self { h, w, d, values })
    }

    pub fn zeros(h: usize, w: usize, d: usize) -> Self {
        Self {
            h,
            w,
            d,
            values: vec![0.0; h * w * d],
        }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn cell_count(&self) -> usize {
        self.h * self.w
    }

    #[inline]
    pub fn cell(&self, y: usize, x: usize) -> &[f32] {
        let at = (y * self.w + x) * self.d;
        &self.values[at..at + self.d]
    }

    #[inline]
    pub fn cell_mut(&mut self, y: usize, x: usize) -> &mut [f32] {
        let at = (y * self.w + x) * self.d;
        &mut self.values[at..at + self.d]
    }

    /// Cells in raster order.
    pub fn cells(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.values.chunks_exact(self.d.max(1))
    }

    pub fn same_shape(&self, other: &FeatureGrid) -> bool {
        self.h == other.h && self.w == other.w && self.d == other.d
    }
}

fn skip_ws_and_comments(data: &[u8], pos: &mut usize) {
    while *pos < data.len() {
        match data[*pos] {
            b'#' => {
                while *pos < data.len() && data[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

fn read_header_uint(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    skip_ws_and_comments(data, pos);
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedImage(format!("missing {what}")));
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedImage(format!("bad {what}")))
}

/// Parses a binary P6 PPM with maxval 255 into `(width, height, rgb bytes)`.
pub fn decode_ppm(data: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    if data.len() < 2 || &data[..2] != b"P6" {
        return Err(Error::MalformedImage("expected P6 magic".into()));
    }
    let mut pos = 2;
    let width = read_header_uint(data, &mut pos, "width")?;
    let height = read_header_uint(data, &mut pos, "height")?;
    let maxval = read_header_uint(data, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedImage("zero dimension".into()));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedImage(format!("maxval {maxval}, only 255 is supported")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match data.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::MalformedImage("missing raster separator".into())),
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(CHANNELS))
        .ok_or_else(|| Error::MalformedImage("dimensions overflow".into()))?;
    let raster = data
        .get(pos..pos + len)
        .ok_or_else(|| Error::MalformedImage("raster truncated".into()))?;
    Ok((width, height, raster.to_vec()))
}

pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Reads a PPM file, normalizes it and pads it to the block size.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImagePlane> {
    let mut data = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut data)?;
    let (w, h, rgb) = decode_ppm(&data)?;
    Ok(pad_to_block(&ImagePlane::from_rgb8(w, h, &rgb)?, BLOCK))
}

/// Writes the true-dimension window of `img` as a P6 PPM.
pub fn save_image(path: impl AsRef<Path>, img: &ImagePlane) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&encode_ppm(img.true_width, img.true_height, &img.to_rgb8()))?;
    out.flush()?;
    Ok(())
}

pub fn padded_len(n: usize, block: usize) -> usize {
    n.div_ceil(block) * block
}

/// Pads with edge replication up to the next multiple of `block`. True
/// dimensions are carried over unchanged.
pub fn pad_to_block(img: &ImagePlane, block: usize) -> ImagePlane {
    let width = padded_len(img.width, block);
    let height = padded_len(img.height, block);
    if width == img.width && height == img.height {
        return img.clone();
    }
    let mut samples = Vec::with_capacity(width * height * CHANNELS);
    for y in 0..height {
        let sy = y.min(img.height - 1);
        let row = &img.samples[sy * img.width * CHANNELS..][..img.width * CHANNELS];
        samples.extend_from_slice(row);
        let last = &row[(img.width - 1) * CHANNELS..];
        for _ in img.width..width {
            samples.extend_from_slice(last);
        }
    }
    ImagePlane {
        width,
        height,
        true_width: img.true_width,
        true_height: img.true_height,
        samples,
    }
}

/// Mean over `factor x factor` cell blocks, per channel.
pub fn avg_pool(grid: &FeatureGrid, factor: usize) -> Result<FeatureGrid> {
    if factor == 0 || grid.h % factor != 0 || grid.w % factor != 0 {
        return Err(Error::NotDivisible {
            h: grid.h,
            w: grid.w,
            factor,
        });
    }
    let (oh, ow, d) = (grid.h / factor, grid.w / factor, grid.d);
    let norm = (factor * factor) as f64;
    let mut out = FeatureGrid::zeros(oh, ow, d);
    let mut acc = vec![0f64; d];
    for oy in 0..oh {
        for ox in 0..ow {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for y in oy * factor..(oy + 1) * factor {
                for x in ox * factor..(ox + 1) * factor {
                    for (a, &v) in acc.iter_mut().zip(grid.cell(y, x)) {
                        *a += v as f64;
                    }
                }
            }
            for (o, a) in out.cell_mut(oy, ox).iter_mut().zip(&acc) {
                *o = (a / norm) as f32;
            }
        }
    }
    Ok(out)
}

/// Duplicates every cell into a `factor x factor` block.
pub fn nn_upsample(grid: &FeatureGrid, factor: usize) -> FeatureGrid {
    let (oh, ow, d) = (grid.h * factor, grid.w * factor, grid.d);
    let mut values = Vec::with_capacity(oh * ow * d);
    for y in 0..oh {
        for x in 0..ow {
            values.extend_from_slice(grid.cell(y / factor, x / factor));
        }
    }
    FeatureGrid {
        h: oh,
        w: ow,
        d,
        values,
    }
}

/// Peak signal-to-noise ratio on 8-bit values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    /// The images are identical.
    Lossless,
    Decibels(f64),
}

impl Psnr {
    /// Decibels, with `+inf` for identical images.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Lossless => f64::INFINITY,
            Psnr::Decibels(v) => v,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Lossless => f.write_str("lossless"),
            Psnr::Decibels(v) => write!(f, "{v:.3} dB"),
        }
    }
}

/// Mean squared error on the 0..255 scale over the true-dimension window.
pub fn mse(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    if a.true_width != b.true_width || a.true_height != b.true_height {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.true_width, a.true_height, b.true_width, b.true_height
        )));
    }
    let (pa, pb) = (a.to_rgb8(), b.to_rgb8());
    let sum: f64 = pa
        .iter()
        .zip(&pb)
        .map(|(&x, &y)| {
            let e = x as f64 - y as f64;
            e * e
        })
        .sum();
    Ok(sum / pa.len() as f64)
}

/// PSNR with peak 255, computed on de-normalized bytes cropped to true dims.
pub fn psnr(a: &ImagePlane, b: &ImagePlane) -> Result<Psnr> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(Psnr::Lossless);
    }
    Ok(Psnr::Decibels(10.0 * (255.0f64 * 255.0 / mse).log10()))
}
