//! `.cgic` container layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `CGIC`                            |
//! | 4      | 1    | version                                 |
//! | 5      | 16   | true width, true height, padded width, padded height (u32) |
//! | 21     | 8    | codebook content hash (u64)             |
//! | 29     | 6    | r1, r2, r3 in parts-per-10000 (u16)     |
//! | 35     | 12   | fine, medium, coarse segment bit lengths (u32) |
//! | 47     | 4    | granularity map bit length (u32)        |
//! | 51     | 4    | CRC-32 of bytes 0..51 followed by the payload |
//! | 55     | ..   | payload: map bits, fine, medium, coarse segments, zero-padded to a byte |
//!
//! Ratios are the realized block fractions of the map, so they can be
//! checked against it.

use super::bits::{BitBuf, BitReader};
use super::decode_granularity_map;
use crate::error::{Error, Result};
use crate::granularity::{GranularityMap, RatioTriple};
use crate::imaging::{padded_len, BLOCK};

pub const MAGIC: &[u8; 4] = b"CGIC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 55;
const CRC_OFFSET: usize = 51;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Container {
    pub true_width: u32,
    pub true_height: u32,
    pub padded_width: u32,
    pub padded_height: u32,
    pub codebook_hash: u64,
    pub ratio_parts: [u16; 3],
    pub gmap: GranularityMap,
    /// Fine, medium and coarse index segments.
    pub segments: [BitBuf; 3],
}

impl Container {
    pub fn new(
        true_width: usize,
        true_height: usize,
        codebook_hash: u64,
        gmap: GranularityMap,
        segments: [BitBuf; 3],
    ) -> Result<Self> {
        let padded_width = gmap.blocks_x() * BLOCK;
        let padded_height = gmap.blocks_y() * BLOCK;
        if padded_len(true_width, BLOCK) != padded_width || padded_len(true_height, BLOCK) != padded_height {
            return Err(Error::ShapeMismatch(format!(
                "{true_width}x{true_height} image does not fit a {}x{} block map",
                gmap.blocks_x(),
                gmap.blocks_y()
            )));
        }
        let narrow = |v: usize| u32::try_from(v).map_err(|_| Error::ShapeMismatch("dimension exceeds u32".into()));
        Ok(Self {
            true_width: narrow(true_width)?,
            true_height: narrow(true_height)?,
            padded_width: narrow(padded_width)?,
            padded_height: narrow(padded_height)?,
            codebook_hash,
            ratio_parts: gmap.realized_ratios().to_parts(),
            gmap,
            segments,
        })
    }

    pub fn ratios(&self) -> RatioTriple {
        RatioTriple::from_parts(self.ratio_parts)
    }

    pub fn map_bits(&self) -> u64 {
        // 1 bit per coarse block, 2 per medium or fine block.
        let (f, m, c) = self.gmap.counts();
        (c + 2 * (m + f)) as u64
    }

    pub fn segment_bits(&self) -> [u64; 3] {
        [0, 1, 2].map(|i| self.segments[i].len())
    }

    /// Map plus index bits, without header or byte padding.
    pub fn payload_bits(&self) -> u64 {
        self.map_bits() + self.segment_bits().iter().sum::<u64>()
    }

    pub fn serialized_len(&self) -> usize {
        HEADER_LEN + self.payload_bits().div_ceil(8) as usize
    }

    pub fn pixel_count(&self) -> u64 {
        self.true_width as u64 * self.true_height as u64
    }
}

pub fn serialize_container(c: &Container) -> Result<Vec<u8>> {
    let mut payload = super::encode_granularity_map(&c.gmap);
    for s in &c.segments {
        payload.append(s);
    }
    let as_u32 = |v: u64| u32::try_from(v).map_err(|_| Error::MalformedContainer("segment exceeds u32 bits".into()));

    let mut out = Vec::with_capacity(c.serialized_len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    for v in [c.true_width, c.true_height, c.padded_width, c.padded_height] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&c.codebook_hash.to_le_bytes());
    for p in c.ratio_parts {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for s in &c.segments {
        out.extend_from_slice(&as_u32(s.len())?.to_le_bytes());
    }
    out.extend_from_slice(&as_u32(c.map_bits())?.to_le_bytes());
    debug_assert_eq!(out.len(), CRC_OFFSET);
    let mut crc = crc32fast::Hasher::new();
    crc.update(&out);
    crc.update(payload.as_bytes());
    out.extend_from_slice(&crc.finalize().to_le_bytes());
    out.extend_from_slice(payload.as_bytes());
    Ok(out)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes(b[at..at + 2].try_into().expect("2 bytes"))
}

fn copy_bits(data: &[u8], start: u64, len: u64) -> BitBuf {
    let mut r = BitReader::new(data, start, start + len);
    let mut out = BitBuf::new();
    while let Ok(b) = r.read_bit() {
        out.push_bit(b);
    }
    out
}

/// Parses and validates a container. With `codebook_hash` given, a
/// container made with any other codebook is rejected.
pub fn parse_container(bytes: &[u8], codebook_hash: Option<u64>) -> Result<Container> {
    let bad = |m: String| Error::MalformedContainer(m);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(bad(format!("unsupported version {}", bytes[4])));
    }
    let mut crc = crc32fast::Hasher::new();
    crc.update(&bytes[..CRC_OFFSET]);
    crc.update(&bytes[HEADER_LEN..]);
    if crc.finalize() != u32_at(bytes, CRC_OFFSET) {
        return Err(bad("checksum mismatch".into()));
    }

    let [true_width, true_height, padded_width, padded_height] = [5, 9, 13, 17].map(|at| u32_at(bytes, at));
    let hash = u64::from_le_bytes(bytes[21..29].try_into().expect("8 bytes"));
    let ratio_parts = [29, 31, 33].map(|at| u16_at(bytes, at));
    let seg_bits = [35, 39, 43].map(|at| u32_at(bytes, at) as u64);
    let map_bits = u32_at(bytes, 47) as u64;

    if true_width == 0 || true_height == 0 {
        return Err(bad("zero image dimension".into()));
    }
    if padded_len(true_width as usize, BLOCK) != padded_width as usize
        || padded_len(true_height as usize, BLOCK) != padded_height as usize
    {
        return Err(bad(format!(
            "padded size {padded_width}x{padded_height} inconsistent with {true_width}x{true_height}"
        )));
    }
    if let Some(expected) = codebook_hash {
        if expected != hash {
            return Err(Error::CodebookMismatch {
                container: hash,
                codebook: expected,
            });
        }
    }

    let payload = &bytes[HEADER_LEN..];
    let total_bits = map_bits + seg_bits.iter().sum::<u64>();
    if payload.len() as u64 != total_bits.div_ceil(8) {
        return Err(bad(format!("payload is {} bytes, header describes {total_bits} bits", payload.len())));
    }
    if total_bits % 8 != 0 {
        let last = payload[payload.len() - 1];
        if last & (0xff >> (total_bits % 8)) != 0 {
            return Err(bad("non-zero padding bits".into()));
        }
    }

    let (blocks_y, blocks_x) = (padded_height as usize / BLOCK, padded_width as usize / BLOCK);
    let mut r = BitReader::new(payload, 0, map_bits);
    let gmap = decode_granularity_map(&mut r, blocks_y, blocks_x)
        .map_err(|_| bad("granularity map shorter than its block count".into()))?;
    if r.remaining() != 0 {
        return Err(bad("granularity map length mismatch".into()));
    }
    if gmap.realized_ratios().to_parts() != ratio_parts {
        return Err(bad("ratio fields disagree with the granularity map".into()));
    }

    let mut offset = map_bits;
    let segments = seg_bits.map(|len| {
        let s = copy_bits(payload, offset, len);
        offset += len;
        s
    });
    Ok(Container {
        true_width,
        true_height,
        padded_width,
        padded_height,
        codebook_hash: hash,
        ratio_parts,
        gmap,
        segments,
    })
}

/// Measured rate of a container.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateReport {
    pub bytes: usize,
    pub pixels: u64,
    /// `8 * bytes / pixels`, header included.
    pub total_bpp: f64,
    /// Map and index bits only, comparable with the theoretical rate.
    pub payload_bpp: f64,
    pub map_bits: u64,
    pub segment_bits: [u64; 3],
}

pub fn measure_rate(c: &Container) -> RateReport {
    let bytes = c.serialized_len();
    let pixels = c.pixel_count();
    RateReport {
        bytes,
        pixels,
        total_bpp: 8.0 * bytes as f64 / pixels as f64,
        payload_bpp: c.payload_bits() as f64 / pixels as f64,
        map_bits: c.map_bits(),
        segment_bits: c.segment_bits(),
    }
}
