//! Non-parametric spatial entropy of image blocks.
//!
//! Each sample is softly assigned to `n_bins` evenly spaced bin centres on
//! `[-1, 1]` with an unnormalized Gaussian kernel. The affinities are
//! averaged over a block, normalized to a distribution and its Shannon
//! entropy (bits) is the block's information-density score.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{ImagePlane, BLOCK, CHANNELS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyConfig {
    n_bins: usize,
    sigma: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self::with_bins(32).expect("32 bins is valid")
    }
}

impl EntropyConfig {
    pub fn new(n_bins: usize, sigma: f64) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidConfig(format!("n_bins = {n_bins}, need at least 2")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma = {sigma}, must be positive")));
        }
        Ok(Self { n_bins, sigma })
    }

    /// `n_bins` bins with sigma equal to the bin spacing.
    pub fn with_bins(n_bins: usize) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidConfig(format!("n_bins = {n_bins}, need at least 2")));
        }
        Self::new(n_bins, 2.0 / (n_bins - 1) as f64)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Upper bound of any block entropy, `log2(n_bins)`.
    pub fn max_entropy(&self) -> f64 {
        (self.n_bins as f64).log2()
    }

    #[inline]
    pub fn bin_center(&self, k: usize) -> f64 {
        -1.0 + 2.0 * k as f64 / (self.n_bins - 1) as f64
    }
}

/// Kernel affinity of one sample to every bin centre.
pub fn bin_affinity(pixel_value: f64, cfg: &EntropyConfig) -> Vec<f64> {
    let inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    (0..cfg.n_bins)
        .map(|k| {
            let d = pixel_value - cfg.bin_center(k);
            (-d * d * inv).exp()
        })
        .collect()
}

/// Normalized mean affinity of a sample set. Returns all zeros when every
/// affinity underflowed.
pub fn patch_distribution(samples: &[f32], cfg: &EntropyConfig) -> Vec<f64> {
    let centers: Vec<f64> = (0..cfg.n_bins).map(|k| cfg.bin_center(k)).collect();
    let inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let mut acc = vec![0f64; cfg.n_bins];
    for &s in samples {
        let p = s as f64;
        for (a, &c) in acc.iter_mut().zip(&centers) {
            let d = p - c;
            *a += (-d * d * inv).exp();
        }
    }
    // The mean divides every bin by the same count, so it cancels in the
    // normalization below; it is kept to mirror the definition.
    let n = samples.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    acc
}

/// Shannon entropy in bits of the block's smoothed value histogram. All
/// channels of all pixels form one sample set.
pub fn patch_entropy(samples: &[f32], cfg: &EntropyConfig) -> f64 {
    let h: f64 = patch_distribution(samples, cfg)
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    h.clamp(0.0, cfg.max_entropy())
}

/// One entropy value per non-overlapping 16x16 block, raster order.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyMap {
    blocks_y: usize,
    blocks_x: usize,
    values: Vec<f64>,
}

impl EntropyMap {
    pub fn new(blocks_y: usize, blocks_x: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != blocks_y * blocks_x {
            return Err(Error::ShapeMismatch(format!(
                "{} entropies for a {blocks_y}x{blocks_x} map",
                values.len()
            )));
        }
        Ok(Self {
            blocks_y,
            blocks_x,
            values,
        })
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn block_size(&self) -> usize {
        BLOCK
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, by: usize, bx: usize) -> f64 {
        self.values[by * self.blocks_x + bx]
    }

    /// `row,col,H` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,entropy\n");
        for by in 0..self.blocks_y {
            for bx in 0..self.blocks_x {
                out.push_str(&format!("{by},{bx},{:.9}\n", self.get(by, bx)));
            }
        }
        out
    }
}

/// Gathers the samples of one 16x16 block.
pub(crate) fn block_samples(img: &ImagePlane, by: usize, bx: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(BLOCK * BLOCK * CHANNELS);
    let row_len = img.width() * CHANNELS;
    for y in by * BLOCK..(by + 1) * BLOCK {
        let start = y * row_len + bx * BLOCK * CHANNELS;
        out.extend_from_slice(&img.samples()[start..start + BLOCK * CHANNELS]);
    }
    out
}

pub fn entropy_map(img: &ImagePlane, cfg: &EntropyConfig) -> Result<EntropyMap> {
    if !img.is_block_aligned() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} image is not padded to {BLOCK}",
            img.width(),
            img.height()
        )));
    }
    let (blocks_y, blocks_x) = (img.height() / BLOCK, img.width() / BLOCK);
    let values = (0..blocks_y * blocks_x)
        .into_par_iter()
        .map(|i| patch_entropy(&block_samples(img, i / blocks_x, i % blocks_x), cfg))
        .collect();
    EntropyMap::new(blocks_y, blocks_x, values)
}
