//! Entropy coding of the index streams and granularity map, and the
//! `.cgic` container that carries them.

mod bits;
mod container;
mod huffman;

pub use bits::{BitBuf, BitReader};
pub use container::{measure_rate, parse_container, serialize_container, Container, RateReport, HEADER_LEN};
pub use huffman::{huffman_lengths, mean_code_length, HuffmanCode, MAX_CODE_LEN};

use crate::error::{Error, Result};
use crate::granularity::{Granularity, GranularityMap};

/// Codes three index streams (fine, medium, coarse) into independent bit
/// runs.
pub fn encode_indices(streams: [&[u32]; 3], code: &HuffmanCode) -> Result<[BitBuf; 3]> {
    let encode = |s: &[u32]| -> Result<BitBuf> {
        let mut out = BitBuf::new();
        for &sym in s {
            code.encode_symbol(sym, &mut out)?;
        }
        Ok(out)
    };
    Ok([encode(streams[0])?, encode(streams[1])?, encode(streams[2])?])
}

/// Decodes back-to-back segments starting at bit `start` of `payload`.
/// Every segment must decode to exactly `counts[i]` symbols in exactly
/// `bit_lengths[i]` bits.
pub fn decode_indices(
    payload: &[u8],
    start: u64,
    bit_lengths: [u64; 3],
    counts: [usize; 3],
    code: &HuffmanCode,
) -> Result<[Vec<u32>; 3]> {
    let mut offset = start;
    let mut out: [Vec<u32>; 3] = Default::default();
    for i in 0..3 {
        let end = offset + bit_lengths[i];
        if end > payload.len() as u64 * 8 {
            return Err(Error::Truncated);
        }
        let mut r = BitReader::new(payload, offset, end);
        out[i].reserve(counts[i]);
        for _ in 0..counts[i] {
            out[i].push(code.decode_symbol(&mut r)?);
        }
        if r.remaining() != 0 {
            return Err(Error::MalformedContainer(format!(
                "index segment {i} has {} unused bits",
                r.remaining()
            )));
        }
        offset = end;
    }
    Ok(out)
}

/// Raster-order prefix code: coarse `0`, medium `10`, fine `11`.
pub fn encode_granularity_map(gmap: &GranularityMap) -> BitBuf {
    let mut out = BitBuf::new();
    for &g in gmap.labels() {
        match g {
            Granularity::Coarse => out.push_bit(false),
            Granularity::Medium => out.push_bits(0b10, 2),
            Granularity::Fine => out.push_bits(0b11, 2),
        }
    }
    out
}

pub fn decode_granularity_map(r: &mut BitReader<'_>, blocks_y: usize, blocks_x: usize) -> Result<GranularityMap> {
    let mut labels = Vec::with_capacity(blocks_y * blocks_x);
    for _ in 0..blocks_y * blocks_x {
        let g = if !r.read_bit()? {
            Granularity::Coarse
        } else if !r.read_bit()? {
            Granularity::Medium
        } else {
            Granularity::Fine
        };
        labels.push(g);
    }
    GranularityMap::new(blocks_y, blocks_x, labels)
}
