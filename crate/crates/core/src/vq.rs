//! Codebooks, nearest-code quantization, k-means training and index usage
//! statistics.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imaging::FeatureGrid;

pub const CODEBOOK_MAGIC: &[u8; 4] = b"CGCB";
pub const CODEBOOK_VERSION: u8 = 1;

/// `k` code vectors of `d` channels, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    k: usize,
    d: usize,
    codes: Vec<f32>,
}

impl Codebook {
    pub fn new(k: usize, d: usize, codes: Vec<f32>) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::InvalidConfig("codebook needs k >= 1 and d >= 1".into()));
        }
        if codes.len() != k * d {
            return Err(Error::ShapeMismatch(format!("{} values for {k} codes of d = {d}", codes.len())));
        }
        if codes.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("codebook contains non-finite values".into()));
        }
        Ok(Self { k, d, codes })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn codes(&self) -> &[f32] {
        &self.codes
    }

    #[inline]
    pub fn code(&self, index: usize) -> &[f32] {
        &self.codes[index * self.d..(index + 1) * self.d]
    }

    /// Nearest code by exhaustive scan; ties go to the lowest index.
    pub fn nearest_exhaustive(&self, v: &[f32]) -> (u32, f64) {
        let mut best = (0u32, f64::INFINITY);
        for i in 0..self.k {
            let dist = sq_dist(v, self.code(i));
            if dist < best.1 {
                best = (i as u32, dist);
            }
        }
        best
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let e = x as f64 - y as f64;
            e * e
        })
        .sum()
}

/// Exact nearest-code search. Codes are ordered by their projection on the
/// codebook's principal axis; since projection onto a unit vector never
/// exceeds the Euclidean distance, the scan outward from the query's
/// projection stops once the projected gap alone beats the best distance.
#[derive(Clone, Debug)]
pub struct NearestSearch<'a> {
    cb: &'a Codebook,
    axis: Vec<f64>,
    order: Vec<u32>,
    keys: Vec<f64>,
}

impl<'a> NearestSearch<'a> {
    pub fn new(cb: &'a Codebook) -> Self {
        let axis = principal_axis(cb);
        let project = |v: &[f32]| v.iter().zip(&axis).map(|(&x, a)| x as f64 * a).sum::<f64>();
        let mut order: Vec<u32> = (0..cb.k as u32).collect();
        let proj: Vec<f64> = (0..cb.k).map(|i| project(cb.code(i))).collect();
        order.sort_by(|&a, &b| proj[a as usize].total_cmp(&proj[b as usize]).then(a.cmp(&b)));
        let keys = order.iter().map(|&i| proj[i as usize]).collect();
        Self { cb, axis, order, keys }
    }

    /// `(index, squared distance)`; ties go to the lowest index.
    pub fn nearest(&self, v: &[f32]) -> (u32, f64) {
        let q: f64 = v.iter().zip(&self.axis).map(|(&x, a)| x as f64 * a).sum();
        let start = self.keys.partition_point(|&k| k < q);
        let mut best = (u32::MAX, f64::INFINITY);
        let consider = |slot: usize, best: &mut (u32, f64)| {
            let idx = self.order[slot];
            let dist = sq_dist(v, self.cb.code(idx as usize));
            if dist < best.1 || (dist == best.1 && idx < best.0) {
                *best = (idx, dist);
            }
        };
        let prune = |gap: f64, best: f64| gap * gap > best * (1.0 + 1e-9) + 1e-12;
        let (mut lo, mut hi) = (start, start);
        loop {
            let mut progressed = false;
            if hi < self.keys.len() && !prune(self.keys[hi] - q, best.1) {
                consider(hi, &mut best);
                hi += 1;
                progressed = true;
            }
            if lo > 0 && !prune(q - self.keys[lo - 1], best.1) {
                lo -= 1;
                consider(lo, &mut best);
                progressed = true;
            }
            if !progressed {
                break;
            }
        }
        best
    }
}

fn principal_axis(cb: &Codebook) -> Vec<f64> {
    let d = cb.d;
    let k = cb.k as f64;
    let mut mean = vec![0f64; d];
    for i in 0..cb.k {
        for (m, &x) in mean.iter_mut().zip(cb.code(i)) {
            *m += x as f64 / k;
        }
    }
    let mut cov = vec![0f64; d * d];
    for i in 0..cb.k {
        let c = cb.code(i);
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (c[a] as f64 - mean[a]) * (c[b] as f64 - mean[b]);
            }
        }
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    for _ in 0..64 {
        let mut next = vec![0f64; d];
        for a in 0..d {
            for b in 0..d {
                next[a] += cov[a * d + b] * v[b];
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        v = next.into_iter().map(|x| x / norm).collect();
    }
    v
}

/// VQ indices laid out on a feature grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexGrid {
    pub h: usize,
    pub w: usize,
    pub indices: Vec<u32>,
}

/// Replaces every cell with its nearest code.
pub fn quantize(grid: &FeatureGrid, cb: &Codebook) -> Result<(IndexGrid, FeatureGrid)> {
    if grid.d() != cb.d {
        return Err(Error::DimensionMismatch {
            expected: cb.d,
            got: grid.d(),
        });
    }
    let indices = quantize_cells(grid.values(), cb)?;
    let idx = IndexGrid {
        h: grid.h(),
        w: grid.w(),
        indices,
    };
    let q = lookup(&idx, cb)?;
    Ok((idx, q))
}

/// Nearest-code indices for a flat run of `d`-wide cells.
pub fn quantize_cells(cells: &[f32], cb: &Codebook) -> Result<Vec<u32>> {
    if cells.len() % cb.d != 0 {
        return Err(Error::DimensionMismatch {
            expected: cb.d,
            got: cells.len() % cb.d,
        });
    }
    let search = NearestSearch::new(cb);
    Ok(cells.par_chunks_exact(cb.d).map(|c| search.nearest(c).0).collect())
}

pub fn lookup(idx: &IndexGrid, cb: &Codebook) -> Result<FeatureGrid> {
    let mut values = Vec::with_capacity(idx.indices.len() * cb.d);
    for &i in &idx.indices {
        if i as usize >= cb.k {
            return Err(Error::IndexOutOfRange { index: i as usize, k: cb.k });
        }
        values.extend_from_slice(cb.code(i as usize));
    }
    FeatureGrid::new(idx.h, idx.w, cb.d, values)
}

/// Per-index usage counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    finalized: bool,
}

impl FrequencyTable {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![0; k],
            finalized: false,
        }
    }

    /// A table read back from storage; every count must already be >= 1.
    pub fn from_finalized(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(Error::NotFinalized);
        }
        Ok(Self {
            counts,
            finalized: true,
        })
    }

    /// A table with arbitrary counts, not yet finalized.
    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self {
            counts,
            finalized: false,
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accumulate(&mut self, indices: &[u32]) -> Result<()> {
        if self.finalized {
            return Err(Error::AlreadyFinalized);
        }
        let k = self.counts.len();
        if let Some(&bad) = indices.iter().find(|&&i| i as usize >= k) {
            return Err(Error::IndexOutOfRange { index: bad as usize, k });
        }
        for &i in indices {
            self.counts[i as usize] += 1;
        }
        Ok(())
    }

    /// Elementwise sum of a partial table built by another worker.
    pub fn merge(&mut self, other: &FrequencyTable) -> Result<()> {
        if self.finalized || other.finalized {
            return Err(Error::AlreadyFinalized);
        }
        if other.k() != self.k() {
            return Err(Error::ShapeMismatch(format!("merging k = {} into k = {}", other.k(), self.k())));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Add-one smoothing; afterwards every index is codeable.
    pub fn finalize(mut self) -> Self {
        if !self.finalized {
            self.counts.iter_mut().for_each(|c| *c += 1);
            self.finalized = true;
        }
        self
    }
}

/// Counts each index of `idx` into `tbl`.
pub fn accumulate_frequencies(idx: &IndexGrid, mut tbl: FrequencyTable) -> Result<FrequencyTable> {
    tbl.accumulate(&idx.indices)?;
    Ok(tbl)
}

pub fn finalize_frequencies(tbl: FrequencyTable) -> FrequencyTable {
    tbl.finalize()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KMeansParams {
    pub k: usize,
    pub iters: usize,
    pub seed: u64,
}

/// Result of [`train_codebook_traced`]: the codebook and the mean squared
/// distortion measured at each assignment step.
#[derive(Clone, Debug)]
pub struct TrainingTrace {
    pub codebook: Codebook,
    pub distortion: Vec<f64>,
}

/// k-means with seeded k-means++ initialization and a fixed number of
/// Lloyd iterations. `corpus` holds `d`-wide vectors back to back.
pub fn train_codebook(corpus: &[f32], d: usize, params: KMeansParams) -> Result<Codebook> {
    train_codebook_traced(corpus, d, params).map(|t| t.codebook)
}

pub fn train_codebook_traced(corpus: &[f32], d: usize, params: KMeansParams) -> Result<TrainingTrace> {
    let k = params.k;
    if d == 0 || corpus.len() % d != 0 {
        return Err(Error::ShapeMismatch(format!("corpus of {} values is not a multiple of d = {d}", corpus.len())));
    }
    let n = corpus.len() / d;
    if k == 0 || n < k {
        return Err(Error::CorpusTooSmall { k, got: n });
    }
    let point = |i: usize| &corpus[i * d..(i + 1) * d];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // k-means++ seeding.
    let mut codes = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    codes.extend_from_slice(point(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Guard against rounding pushing the target past the end.
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = point(pick).to_vec();
        nearest
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, w)| *w = w.min(sq_dist(&corpus[i * d..(i + 1) * d], &c)));
        codes.extend_from_slice(&c);
    }

    let mut cb = Codebook::new(k, d, codes)?;
    let mut distortion = Vec::with_capacity(params.iters);
    for _ in 0..params.iters {
        let search = NearestSearch::new(&cb);
        let assign: Vec<(u32, f64)> = corpus.par_chunks_exact(d).map(|p| search.nearest(p)).collect();
        distortion.push(assign.iter().map(|a| a.1).sum::<f64>() / n as f64);

        let mut sums = vec![0f64; k * d];
        let mut sizes = vec![0usize; k];
        for (i, &(c, _)) in assign.iter().enumerate() {
            sizes[c as usize] += 1;
            for (s, &x) in sums[c as usize * d..][..d].iter_mut().zip(point(i)) {
                *s += x as f64;
            }
        }
        let mut codes = cb.codes.clone();
        let mut dist: Vec<f64> = assign.iter().map(|a| a.1).collect();
        for c in 0..k {
            if sizes[c] > 0 {
                for j in 0..d {
                    codes[c * d + j] = (sums[c * d + j] / sizes[c] as f64) as f32;
                }
            } else {
                // Re-seed from the point currently worst served.
                let (far, &fd) = dist
                    .iter()
                    .enumerate()
                    .fold((0, &f64::NEG_INFINITY), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
                if fd > 0.0 {
                    codes[c * d..(c + 1) * d].copy_from_slice(point(far));
                    dist[far] = 0.0;
                }
            }
        }
        cb = Codebook::new(k, d, codes)?;
    }
    Ok(TrainingTrace { codebook: cb, distortion })
}

/// A codebook together with the usage statistics both ends code with.
#[derive(Clone, Debug, PartialEq)]
pub struct CodebookFile {
    pub codebook: Codebook,
    pub frequencies: FrequencyTable,
}

impl CodebookFile {
    pub fn new(codebook: Codebook, frequencies: FrequencyTable) -> Result<Self> {
        if !frequencies.is_finalized() {
            return Err(Error::NotFinalized);
        }
        if frequencies.k() != codebook.k {
            return Err(Error::ShapeMismatch(format!(
                "{} frequencies for {} codes",
                frequencies.k(),
                codebook.k
            )));
        }
        if codebook.k > u16::MAX as usize || codebook.d > u16::MAX as usize {
            return Err(Error::InvalidConfig("k and d must fit in 16 bits".into()));
        }
        Ok(Self { codebook, frequencies })
    }

    fn body(&self) -> Vec<u8> {
        let cb = &self.codebook;
        let mut out = Vec::with_capacity(9 + cb.codes.len() * 4 + cb.k * 8 + 8);
        out.extend_from_slice(CODEBOOK_MAGIC);
        out.push(CODEBOOK_VERSION);
        out.extend_from_slice(&(cb.k as u16).to_le_bytes());
        out.extend_from_slice(&(cb.d as u16).to_le_bytes());
        for c in &cb.codes {
            out.extend_from_slice(&c.to_le_bytes());
        }
        for f in self.frequencies.counts() {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    /// Content hash over codes and frequencies; a container is only
    /// decodable with the file whose hash it records.
    pub fn id_hash(&self) -> u64 {
        content_hash(&self.body())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body();
        let h = content_hash(&out);
        out.extend_from_slice(&h.to_le_bytes());
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::MalformedCodebook(m.to_owned());
        if data.len() < 9 + 8 {
            return Err(bad("file too short"));
        }
        if &data[..4] != CODEBOOK_MAGIC {
            return Err(bad("bad magic"));
        }
        if data[4] != CODEBOOK_VERSION {
            return Err(bad(&format!("unsupported version {}", data[4])));
        }
        let k = u16::from_le_bytes([data[5], data[6]]) as usize;
        let d = u16::from_le_bytes([data[7], data[8]]) as usize;
        let body_len = 9 + k * d * 4 + k * 8;
        if data.len() != body_len + 8 {
            return Err(bad(&format!("expected {} bytes, found {}", body_len + 8, data.len())));
        }
        let stored = u64::from_le_bytes(data[body_len..].try_into().expect("8 bytes"));
        if stored != content_hash(&data[..body_len]) {
            return Err(bad("content hash mismatch"));
        }
        let codes = data[9..9 + k * d * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let counts = data[9 + k * d * 4..body_len]
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let codebook = Codebook::new(k, d, codes).map_err(|e| bad(&e.to_string()))?;
        let frequencies = FrequencyTable::from_finalized(counts).map_err(|_| bad("zero frequency count"))?;
        Self::new(codebook, frequencies)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }
}

/// First eight bytes of SHA-256, little-endian.
pub fn content_hash(data: &[u8]) -> u64 {
    let digest = Sha256::digest(data);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
