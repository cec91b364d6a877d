//! Decoder side: hybrid multi-scale assembly, conditional replacement
//! through the synthesis layers, and pixel painting.

use crate::error::{Error, Result};
use crate::granularity::{Mask, MaskSet};
use crate::imaging::{avg_pool, nn_upsample, FeatureGrid, ImagePlane, CHANNELS};

/// Decoder layers. `to_medium` maps an H/16 grid to H/8, `to_fine` maps
/// H/8 to H/4 and `paint` turns the final H/4 grid into pixels.
pub trait Synthesis: Send + Sync {
    fn to_medium(&self, y1: &FeatureGrid) -> FeatureGrid;

    fn to_fine(&self, y2: &FeatureGrid) -> FeatureGrid;

    /// Returns an image of `4 * w` by `4 * h` pixels.
    fn paint(&self, y3: &FeatureGrid) -> ImagePlane;
}

/// Nearest-neighbour layers and a painter that fills each 4x4 pixel block
/// with the cell's mean colour. Channels past the third are ignored.
#[derive(Clone, Copy, Debug, Default)]
pub struct NearestSynthesis;

impl Synthesis for NearestSynthesis {
    fn to_medium(&self, y1: &FeatureGrid) -> FeatureGrid {
        nn_upsample(y1, 2)
    }

    fn to_fine(&self, y2: &FeatureGrid) -> FeatureGrid {
        nn_upsample(y2, 2)
    }

    fn paint(&self, y3: &FeatureGrid) -> ImagePlane {
        let (w, h) = (y3.w() * 4, y3.h() * 4);
        let mut samples = vec![0f32; w * h * CHANNELS];
        for y in 0..h {
            for x in 0..w {
                let cell = y3.cell(y / 4, x / 4);
                for c in 0..CHANNELS {
                    samples[(y * w + x) * CHANNELS + c] = cell.get(c).copied().unwrap_or(0.0).clamp(-1.0, 1.0);
                }
            }
        }
        ImagePlane::new(w, h, samples).expect("clamped samples")
    }
}

fn check_scale(grid: &FeatureGrid, mask: &Mask, what: &str) -> Result<()> {
    if grid.h() != mask.h() || grid.w() != mask.w() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: grid {}x{} vs mask {}x{}",
            grid.h(),
            grid.w(),
            mask.h(),
            mask.w()
        )));
    }
    Ok(())
}

/// Cells of `grid` outside `mask` set to zero.
pub fn apply_mask(grid: &FeatureGrid, mask: &Mask) -> FeatureGrid {
    let mut out = grid.clone();
    for y in 0..grid.h() {
        for x in 0..grid.w() {
            if !mask.get(y, x) {
                out.cell_mut(y, x).iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
    out
}

/// Fine-resolution hybrid of the three quantized grids. Under a disjoint
/// cover the masked sum reduces to picking, per fine cell, the one grid
/// whose mask covers it; the pick is done directly so values are carried
/// over bit for bit.
pub fn assemble_hybrid(
    q1: &FeatureGrid,
    q2: &FeatureGrid,
    q3: &FeatureGrid,
    masks: &MaskSet,
) -> Result<FeatureGrid> {
    check_scale(q1, &masks.m1, "fine")?;
    check_scale(q2, &masks.m2, "medium")?;
    check_scale(q3, &masks.m3, "coarse")?;
    if q1.d() != q2.d() || q1.d() != q3.d() {
        return Err(Error::ShapeMismatch("feature dimensions differ across scales".into()));
    }
    if !masks.is_disjoint_cover() {
        return Err(Error::ShapeMismatch("masks do not partition the fine grid".into()));
    }
    let mut z = FeatureGrid::zeros(q1.h(), q1.w(), q1.d());
    for y in 0..q1.h() {
        for x in 0..q1.w() {
            let src = if masks.m1.get(y, x) {
                q1.cell(y, x)
            } else if masks.m2.get(y / 2, x / 2) {
                q2.cell(y / 2, x / 2)
            } else {
                q3.cell(y / 4, x / 4)
            };
            z.cell_mut(y, x).copy_from_slice(src);
        }
    }
    Ok(z)
}

/// `base` with cells under `mask` replaced by `exact`.
fn replace(base: &FeatureGrid, exact: &FeatureGrid, mask: &Mask) -> FeatureGrid {
    let mut out = base.clone();
    for y in 0..base.h() {
        for x in 0..base.w() {
            if mask.get(y, x) {
                out.cell_mut(y, x).copy_from_slice(exact.cell(y, x));
            }
        }
    }
    out
}

/// Intermediate decoder states at H/16, H/8 and H/4.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderStates {
    pub y1: FeatureGrid,
    pub y2: FeatureGrid,
    pub y3: FeatureGrid,
}

/// Runs the layers coarse to fine, overwriting each layer's output wherever
/// a finer quantized feature is known exactly.
pub fn conditional_decode(z: &FeatureGrid, masks: &MaskSet, synth: &dyn Synthesis) -> Result<DecoderStates> {
    check_scale(z, &masks.m1, "hybrid")?;
    let y1 = avg_pool(z, 4)?;
    let medium_exact = avg_pool(z, 2)?;
    let d1 = synth.to_medium(&y1);
    if !d1.same_shape(&medium_exact) {
        return Err(Error::ShapeMismatch("medium layer produced the wrong shape".into()));
    }
    let y2 = replace(&d1, &medium_exact, &masks.m2);
    let d2 = synth.to_fine(&y2);
    if !d2.same_shape(z) {
        return Err(Error::ShapeMismatch("fine layer produced the wrong shape".into()));
    }
    let y3 = replace(&d2, z, &masks.m1);
    Ok(DecoderStates { y1, y2, y3 })
}

/// Paints `y3` and crops to the true image size.
pub fn synthesize_image(
    y3: &FeatureGrid,
    synth: &dyn Synthesis,
    true_width: usize,
    true_height: usize,
) -> Result<ImagePlane> {
    let img = synth.paint(y3);
    if true_width > img.width() || true_height > img.height() {
        return Err(Error::ShapeMismatch(format!(
            "true size {true_width}x{true_height} exceeds painted {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(img.with_true_dims(true_width, true_height).cropped())
}
