//! Canonical Huffman codes built from a shared index frequency table.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::bits::{BitBuf, BitReader};
use crate::error::{Error, Result};
use crate::vq::FrequencyTable;

pub const MAX_CODE_LEN: u32 = 64;

/// A full prefix code given by per-symbol lengths; codewords are assigned
/// in `(length, symbol)` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanCode {
    lengths: Vec<u32>,
    codewords: Vec<u64>,
    /// Symbols sorted by `(length, symbol)`.
    sorted: Vec<u32>,
    /// `count_by_len[l]` symbols have length `l`.
    count_by_len: Vec<u64>,
}

impl HuffmanCode {
    /// Optimal code lengths for a finalized table. Equal weights merge in
    /// order of the smallest symbol each subtree contains. A one-symbol
    /// alphabet gets length 1.
    pub fn build(tbl: &FrequencyTable) -> Result<Self> {
        if !tbl.is_finalized() {
            return Err(Error::NotFinalized);
        }
        Self::from_lengths(huffman_lengths(tbl.counts()))
    }

    /// Canonical code from explicit lengths.
    pub fn from_lengths(lengths: Vec<u32>) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::InvalidConfig("empty alphabet".into()));
        }
        if let Some(&bad) = lengths.iter().find(|&&l| l == 0 || l > MAX_CODE_LEN) {
            if bad == 0 {
                return Err(Error::InvalidConfig("zero code length".into()));
            }
            return Err(Error::CodeTooLong(bad));
        }
        let max_len = *lengths.iter().max().expect("non-empty") as usize;
        let mut count_by_len = vec![0u64; max_len + 1];
        for &l in &lengths {
            count_by_len[l as usize] += 1;
        }
        let mut sorted: Vec<u32> = (0..lengths.len() as u32).collect();
        sorted.sort_by_key(|&s| (lengths[s as usize], s));

        let mut codewords = vec![0u64; lengths.len()];
        let mut code: u128 = 0;
        let mut prev_len = lengths[sorted[0] as usize];
        for &s in &sorted {
            let l = lengths[s as usize];
            code <<= l - prev_len;
            prev_len = l;
            if code >> l != 0 {
                return Err(Error::InvalidConfig("code lengths oversubscribe the prefix space".into()));
            }
            codewords[s as usize] = code as u64;
            code += 1;
        }
        Ok(Self {
            lengths,
            codewords,
            sorted,
            count_by_len,
        })
    }

    pub fn k(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn codeword(&self, symbol: usize) -> (u64, u32) {
        (self.codewords[symbol], self.lengths[symbol])
    }

    pub fn max_len(&self) -> u32 {
        (self.count_by_len.len() - 1) as u32
    }

    /// `sum 2^-len` as an exact fraction `(numerator, 2^max_len)`.
    pub fn kraft_sum(&self) -> (u128, u128) {
        let max = self.max_len();
        let num = self.lengths.iter().map(|&l| 1u128 << (max - l)).sum();
        (num, 1u128 << max)
    }

    pub fn is_complete(&self) -> bool {
        let (num, den) = self.kraft_sum();
        num == den
    }

    /// Total bits to code `counts[s]` copies of every symbol `s`.
    pub fn weighted_length(&self, counts: &[u64]) -> u128 {
        counts
            .iter()
            .zip(&self.lengths)
            .map(|(&c, &l)| c as u128 * l as u128)
            .sum()
    }

    pub fn encode_symbol(&self, symbol: u32, out: &mut BitBuf) -> Result<()> {
        let s = symbol as usize;
        if s >= self.lengths.len() {
            return Err(Error::IndexOutOfRange { index: s, k: self.lengths.len() });
        }
        out.push_bits(self.codewords[s], self.lengths[s]);
        Ok(())
    }

    pub fn decode_symbol(&self, r: &mut BitReader<'_>) -> Result<u32> {
        let mut code: u128 = 0;
        let mut first: u128 = 0;
        let mut index: u128 = 0;
        for len in 1..self.count_by_len.len() {
            code |= r.read_bit()? as u128;
            let count = self.count_by_len[len] as u128;
            if code - first < count {
                return Ok(self.sorted[(index + code - first) as usize]);
            }
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        Err(Error::InvalidCode)
    }
}

/// Huffman code lengths; merging pops the two lightest nodes, breaking
/// weight ties on the smallest symbol in each subtree.
pub fn huffman_lengths(counts: &[u64]) -> Vec<u32> {
    let k = counts.len();
    if k == 1 {
        return vec![1];
    }
    // Node ids: leaves 0..k, internal nodes k.. in creation order.
    let mut parent = vec![usize::MAX; 2 * k - 1];
    let mut heap: BinaryHeap<Reverse<(u128, u32, usize)>> = counts
        .iter()
        .enumerate()
        .map(|(s, &c)| Reverse((c as u128, s as u32, s)))
        .collect();
    let mut next = k;
    while heap.len() > 1 {
        let Reverse((wa, sa, a)) = heap.pop().expect("len > 1");
        let Reverse((wb, sb, b)) = heap.pop().expect("len > 1");
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((wa + wb, sa.min(sb), next)));
        next += 1;
    }
    let root = next - 1;
    let mut depth = vec![0u32; 2 * k - 1];
    for node in (0..root).rev() {
        depth[node] = depth[parent[node]] + 1;
    }
    depth.truncate(k);
    depth
}

/// Unweighted mean of the code lengths, the `L` of the rate model.
pub fn mean_code_length(code: &HuffmanCode) -> f64 {
    code.lengths.iter().map(|&l| l as f64).sum::<f64>() / code.lengths.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finalized(counts: Vec<u64>) -> FrequencyTable {
        FrequencyTable::from_finalized(counts).unwrap()
    }

    #[test]
    fn uniform_power_of_two() {
        let code = HuffmanCode::build(&finalized(vec![7; 1024])).unwrap();
        assert!(code.lengths().iter().all(|&l| l == 10));
        assert_eq!(mean_code_length(&code), 10.0);
        assert!(code.is_complete());
    }

    #[test]
    fn four_symbol_example() {
        let code = HuffmanCode::build(&finalized(vec![5, 2, 1, 1])).unwrap();
        assert_eq!(code.lengths(), &[1, 2, 3, 3]);
        assert_eq!(code.weighted_length(&[5, 2, 1, 1]), 15);
        assert_eq!(mean_code_length(&code), 2.25);
        assert_eq!(code.codeword(0), (0b0, 1));
        assert_eq!(code.codeword(1), (0b10, 2));
        assert_eq!(code.codeword(2), (0b110, 3));
        assert_eq!(code.codeword(3), (0b111, 3));
    }

    #[test]
    fn single_symbol_alphabet() {
        let code = HuffmanCode::build(&finalized(vec![3])).unwrap();
        assert_eq!(code.lengths(), &[1]);
        let mut b = BitBuf::new();
        code.encode_symbol(0, &mut b).unwrap();
        assert_eq!(b.as_bytes(), &[0]);
        // `1` is not a codeword.
        let mut r = BitReader::new(&[0x80], 0, 1);
        assert!(matches!(code.decode_symbol(&mut r), Err(Error::InvalidCode)));
    }

    #[test]
    fn unfinalized_rejected() {
        assert!(matches!(
            HuffmanCode::build(&FrequencyTable::from_counts(vec![1, 2])),
            Err(Error::NotFinalized)
        ));
    }

    #[test]
    fn oversubscribed_lengths_rejected() {
        assert!(HuffmanCode::from_lengths(vec![1, 1, 1]).is_err());
        assert!(matches!(HuffmanCode::from_lengths(vec![65, 1]), Err(Error::CodeTooLong(65))));
    }

    #[test]
    fn decode_inverts_encode() {
        let counts: Vec<u64> = (0..37).map(|i| 1 + (i * i) % 23).collect();
        let code = HuffmanCode::build(&finalized(counts)).unwrap();
        assert!(code.is_complete());
        let msg: Vec<u32> = (0..500).map(|i| (i * 7 % 37) as u32).collect();
        let mut b = BitBuf::new();
        for &s in &msg {
            code.encode_symbol(s, &mut b).unwrap();
        }
        let mut r = BitReader::new(b.as_bytes(), 0, b.len());
        let back: Vec<u32> = (0..msg.len()).map(|_| code.decode_symbol(&mut r).unwrap()).collect();
        assert_eq!(back, msg);
        assert_eq!(r.remaining(), 0);
        assert!(code.encode_symbol(37, &mut b).is_err());
    }

    #[test]
    fn skewed_table_gives_long_codes() {
        // Fibonacci weights force a maximally deep tree.
        let mut fib = vec![1u64, 1];
        while fib.len() < 40 {
            let n = fib[fib.len() - 1] + fib[fib.len() - 2];
            fib.push(n);
        }
        let code = HuffmanCode::build(&finalized(fib.clone())).unwrap();
        assert_eq!(code.max_len(), 39);
        assert!(code.is_complete());
        let mut b = BitBuf::new();
        for s in 0..40 {
            code.encode_symbol(s, &mut b).unwrap();
        }
        let mut r = BitReader::new(b.as_bytes(), 0, b.len());
        for s in 0..40 {
            assert_eq!(code.decode_symbol(&mut r).unwrap(), s);
        }
    }
}
