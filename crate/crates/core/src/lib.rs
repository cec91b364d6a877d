//! Variable-rate image compression with block-level granularity control.
//!
//! Each 16×16 block of an image is coded at one of three granularities,
//! chosen by block entropy under a target rate. Features at every scale
//! are vector-quantized against one shared codebook and the indices are
//! Huffman coded into a `.cgic` container.

pub mod analysis;
pub mod bitstream;
pub mod codec;
pub mod entropy;
pub mod error;
pub mod granularity;
pub mod imaging;
pub mod reconstruction;
pub mod vq;

pub use codec::{
    decode_bytes, decode_detailed, decode_image, encode_image, encode_with_plan, train_from_images, CodecSession,
    Decoded, Encoded, RateTarget, TrainingConfig,
};
pub use error::{Error, Result};
pub use granularity::{Granularity, GranularityMap, RatioTriple};
pub use imaging::{load_image, psnr, save_image, ImagePlane, Psnr};
pub use vq::{Codebook, CodebookFile, FrequencyTable};
