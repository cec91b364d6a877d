//! Analysis transforms producing the three-scale feature pyramid.
//!
//! The reference transform describes every cell by its mean colour and
//! the standard deviation of its luminance. Anything implementing
//! [`AnalysisTransform`] can stand in for it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::granularity::Granularity;
use crate::imaging::{avg_pool, FeatureGrid, ImagePlane, CHANNELS};

/// Feature grids at H/4 (fine), H/8 (medium) and H/16 (coarse).
#[derive(Clone, Debug, PartialEq)]
pub struct Pyramid {
    pub fine: FeatureGrid,
    pub medium: FeatureGrid,
    pub coarse: FeatureGrid,
}

impl Pyramid {
    pub fn get(&self, g: Granularity) -> &FeatureGrid {
        match g {
            Granularity::Fine => &self.fine,
            Granularity::Medium => &self.medium,
            Granularity::Coarse => &self.coarse,
        }
    }
}

pub trait AnalysisTransform: Send + Sync {
    /// Feature channels per cell.
    fn dim(&self) -> usize;

    fn descriptor(&self) -> &str;

    /// `img` must be padded to a multiple of 16.
    fn extract(&self, img: &ImagePlane) -> Result<Pyramid>;
}

/// Mean R, G, B and luminance standard deviation per cell, with luminance
/// `(R + G + B) / 3`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BlockStatistics;

impl BlockStatistics {
    pub const DIM: usize = 4;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformSpec {
    pub d: usize,
    pub descriptor: String,
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self {
            d: BlockStatistics::DIM,
            descriptor: BlockStatistics.descriptor().to_owned(),
        }
    }
}

/// Runs the transform named by `spec`.
pub fn extract_pyramid(img: &ImagePlane, spec: &TransformSpec) -> Result<Pyramid> {
    if spec.descriptor != BlockStatistics.descriptor() {
        return Err(Error::InvalidConfig(format!("unknown transform {:?}", spec.descriptor)));
    }
    if spec.d != BlockStatistics::DIM {
        return Err(Error::InvalidConfig(format!(
            "transform {} has d = {}, requested {}",
            spec.descriptor,
            BlockStatistics::DIM,
            spec.d
        )));
    }
    BlockStatistics.extract(img)
}

fn luminance_std(img: &ImagePlane, y0: usize, x0: usize, side: usize) -> f32 {
    let lum = |x: usize, y: usize| {
        (img.get(x, y, 0) as f64 + img.get(x, y, 1) as f64 + img.get(x, y, 2) as f64) / 3.0
    };
    let n = (side * side) as f64;
    let mut sum = 0.0;
    for y in y0..y0 + side {
        for x in x0..x0 + side {
            sum += lum(x, y);
        }
    }
    let mean = sum / n;
    let mut var = 0.0;
    for y in y0..y0 + side {
        for x in x0..x0 + side {
            let e = lum(x, y) - mean;
            var += e * e;
        }
    }
    ((var / n).sqrt() as f32).clamp(0.0, 1.0)
}

fn std_grid(img: &ImagePlane, side: usize) -> Vec<f32> {
    let (h, w) = (img.height() / side, img.width() / side);
    (0..h * w)
        .into_par_iter()
        .map(|i| luminance_std(img, (i / w) * side, (i % w) * side, side))
        .collect()
}

fn interleave(means: &FeatureGrid, stds: &[f32]) -> FeatureGrid {
    let mut values = Vec::with_capacity(means.cell_count() * 4);
    for (m, &s) in means.cells().zip(stds) {
        values.extend_from_slice(m);
        values.push(s);
    }
    FeatureGrid::new(means.h(), means.w(), 4, values).expect("shape follows means")
}

impl AnalysisTransform for BlockStatistics {
    fn dim(&self) -> usize {
        Self::DIM
    }

    fn descriptor(&self) -> &str {
        "block-stats-v1"
    }

    fn extract(&self, img: &ImagePlane) -> Result<Pyramid> {
        if !img.is_block_aligned() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} image is not padded to 16",
                img.width(),
                img.height()
            )));
        }
        let (h, w) = (img.height() / 4, img.width() / 4);
        let mut means = Vec::with_capacity(h * w * CHANNELS);
        for cy in 0..h {
            for cx in 0..w {
                let mut acc = [0f64; CHANNELS];
                for y in cy * 4..cy * 4 + 4 {
                    for x in cx * 4..cx * 4 + 4 {
                        for (c, a) in acc.iter_mut().enumerate() {
                            *a += img.get(x, y, c) as f64;
                        }
                    }
                }
                means.extend(acc.iter().map(|a| (a / 16.0) as f32));
            }
        }
        let fine_means = FeatureGrid::new(h, w, CHANNELS, means)?;
        // Coarser means are pooled from the fine ones so the scales agree
        // exactly under avg_pool.
        let medium_means = avg_pool(&fine_means, 2)?;
        let coarse_means = avg_pool(&fine_means, 4)?;
        Ok(Pyramid {
            fine: interleave(&fine_means, &std_grid(img, 4)),
            medium: interleave(&medium_means, &std_grid(img, 8)),
            coarse: interleave(&coarse_means, &std_grid(img, 16)),
        })
    }
}
