//! Granularity planning: ranks blocks by entropy, slices them into coarse,
//! medium and fine pools, derives the per-scale masks and models the rate
//! a ratio triple should cost.

use std::fmt;
use std::str::FromStr;

use crate::entropy::EntropyMap;
use crate::error::{Error, Result};

const RATIO_EPS: f64 = 1e-9;

/// Fractions of blocks coded fine, medium and coarse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioTriple {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl RatioTriple {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Result<Self> {
        let ok = [r1, r2, r3]
            .iter()
            .all(|r| r.is_finite() && (-RATIO_EPS..=1.0 + RATIO_EPS).contains(r))
            && ((r1 + r2 + r3) - 1.0).abs() <= RATIO_EPS;
        if !ok {
            return Err(Error::InvalidRatios(r1, r2, r3));
        }
        Ok(Self {
            r1: r1.clamp(0.0, 1.0),
            r2: r2.clamp(0.0, 1.0),
            r3: r3.clamp(0.0, 1.0),
        })
    }

    pub const ALL_FINE: RatioTriple = RatioTriple { r1: 1.0, r2: 0.0, r3: 0.0 };
    pub const ALL_MEDIUM: RatioTriple = RatioTriple { r1: 0.0, r2: 1.0, r3: 0.0 };
    pub const ALL_COARSE: RatioTriple = RatioTriple { r1: 0.0, r2: 0.0, r3: 1.0 };

    /// Realized fractions of a block census.
    pub fn from_counts(fine: usize, medium: usize, coarse: usize) -> Self {
        let n = (fine + medium + coarse).max(1) as f64;
        Self {
            r1: fine as f64 / n,
            r2: medium as f64 / n,
            r3: coarse as f64 / n,
        }
    }

    /// Each ratio in parts-per-10000, rounded half-up.
    pub fn to_parts(&self) -> [u16; 3] {
        [self.r1, self.r2, self.r3].map(|r| (r * 10_000.0 + 0.5 + RATIO_EPS).floor() as u16)
    }

    pub fn from_parts(parts: [u16; 3]) -> Self {
        let [a, b, c] = parts.map(|p| p as f64 / 10_000.0);
        Self { r1: a, r2: b, r3: c }
    }
}

impl fmt::Display for RatioTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.r1, self.r2, self.r3)
    }
}

impl FromStr for RatioTriple {
    type Err = Error;

    /// `r1,r2,r3` as fractions, or as percentages when suffixed with `%`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!("expected r1,r2,r3, got {s:?}")));
        }
        let mut v = [0f64; 3];
        for (slot, p) in v.iter_mut().zip(&parts) {
            let (num, scale) = match p.strip_suffix('%') {
                Some(n) => (n, 0.01),
                None => (*p, 1.0),
            };
            *slot = num
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad ratio {p:?}")))?
                * scale;
        }
        RatioTriple::new(v[0], v[1], v[2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Granularity {
    /// 16 codes per block, one per 4x4 pixels.
    Fine,
    /// 4 codes per block, one per 8x8 pixels.
    Medium,
    /// 1 code per block.
    Coarse,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Fine, Granularity::Medium, Granularity::Coarse];

    /// Feature cells per side of a 16x16 block at this granularity.
    pub fn cells_per_side(self) -> usize {
        match self {
            Granularity::Fine => 4,
            Granularity::Medium => 2,
            Granularity::Coarse => 1,
        }
    }

    pub fn indices_per_block(self) -> usize {
        self.cells_per_side() * self.cells_per_side()
    }

    /// Pixel side of one feature cell.
    pub fn cell_pixels(self) -> usize {
        16 / self.cells_per_side()
    }
}

/// Per-block granularity labels in raster order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GranularityMap {
    blocks_y: usize,
    blocks_x: usize,
    labels: Vec<Granularity>,
}

impl GranularityMap {
    pub fn new(blocks_y: usize, blocks_x: usize, labels: Vec<Granularity>) -> Result<Self> {
        if labels.len() != blocks_y * blocks_x {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a {blocks_y}x{blocks_x} map",
                labels.len()
            )));
        }
        Ok(Self {
            blocks_y,
            blocks_x,
            labels,
        })
    }

    pub fn uniform(blocks_y: usize, blocks_x: usize, g: Granularity) -> Self {
        Self {
            blocks_y,
            blocks_x,
            labels: vec![g; blocks_y * blocks_x],
        }
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn labels(&self) -> &[Granularity] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, by: usize, bx: usize) -> Granularity {
        self.labels[by * self.blocks_x + bx]
    }

    pub fn set(&mut self, index: usize, g: Granularity) {
        self.labels[index] = g;
    }

    /// `(fine, medium, coarse)` block counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for l in &self.labels {
            match l {
                Granularity::Fine => c.0 += 1,
                Granularity::Medium => c.1 += 1,
                Granularity::Coarse => c.2 += 1,
            }
        }
        c
    }

    pub fn realized_ratios(&self) -> RatioTriple {
        let (f, m, c) = self.counts();
        RatioTriple::from_counts(f, m, c)
    }

    /// Number of VQ indices each granularity stream carries.
    pub fn stream_lengths(&self) -> [usize; 3] {
        let (f, m, c) = self.counts();
        [f * 16, m * 4, c]
    }
}

#[inline]
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + RATIO_EPS).floor().max(0.0) as usize
}

/// `(fine, medium, coarse)` counts for `n` blocks. Coarse and medium are
/// rounded half-up; medium is clipped when both round up past `n`; fine
/// takes the remainder.
pub fn label_counts(ratios: &RatioTriple, n: usize) -> (usize, usize, usize) {
    let coarse = round_half_up(ratios.r3 * n as f64).min(n);
    let medium = round_half_up(ratios.r2 * n as f64).min(n - coarse);
    (n - coarse - medium, medium, coarse)
}

/// Assigns the lowest-entropy blocks to the coarse pool, the next ones to
/// the medium pool and the rest to fine. Equal entropies keep raster order.
pub fn plan_granularity(map: &EntropyMap, ratios: &RatioTriple) -> GranularityMap {
    let n = map.len();
    let mut order: Vec<usize> = (0..n).collect();
    let values = map.values();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let (_, medium, coarse) = label_counts(ratios, n);
    let mut labels = vec![Granularity::Fine; n];
    for (rank, &block) in order.iter().enumerate() {
        if rank < coarse {
            labels[block] = Granularity::Coarse;
        } else if rank < coarse + medium {
            labels[block] = Granularity::Medium;
        }
    }
    GranularityMap {
        blocks_y: map.blocks_y(),
        blocks_x: map.blocks_x(),
        labels,
    }
}

/// Binary occupancy mask at one feature scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    h: usize,
    w: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.w + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Masks for the fine (`m1`, H/4), medium (`m2`, H/8) and coarse (`m3`,
/// H/16) feature grids. Upsampled to the fine grid they partition it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSet {
    pub m1: Mask,
    pub m2: Mask,
    pub m3: Mask,
}

impl MaskSet {
    pub fn get(&self, g: Granularity) -> &Mask {
        match g {
            Granularity::Fine => &self.m1,
            Granularity::Medium => &self.m2,
            Granularity::Coarse => &self.m3,
        }
    }

    /// Checks that every fine-grid position is covered by exactly one mask.
    pub fn is_disjoint_cover(&self) -> bool {
        for y in 0..self.m1.h {
            for x in 0..self.m1.w {
                let n = self.m1.get(y, x) as u8
                    + self.m2.get(y / 2, x / 2) as u8
                    + self.m3.get(y / 4, x / 4) as u8;
                if n != 1 {
                    return false;
                }
            }
        }
        true
    }
}

pub fn masks_from_map(gmap: &GranularityMap) -> MaskSet {
    let make = |g: Granularity| {
        let s = g.cells_per_side();
        let (h, w) = (gmap.blocks_y * s, gmap.blocks_x * s);
        let bits = (0..h * w)
            .map(|i| gmap.get(i / w / s, i % w / s) == g)
            .collect();
        Mask { h, w, bits }
    };
    MaskSet {
        m1: make(Granularity::Fine),
        m2: make(Granularity::Medium),
        m3: make(Granularity::Coarse),
    }
}

/// Index bits per pixel predicted by the closed-form model.
pub fn index_bpp(ratios: &RatioTriple, mean_code_length: f64) -> f64 {
    mean_code_length / 256.0 * (16.0 * ratios.r1 + 4.0 * ratios.r2 + ratios.r3)
}

/// Mask bits per pixel in the closed-form model.
pub fn mask_bpp(ratios: &RatioTriple) -> f64 {
    (4.0 * ratios.r1 + ratios.r2) / 256.0
}

pub fn theoretical_bpp(ratios: &RatioTriple, mean_code_length: f64) -> f64 {
    index_bpp(ratios, mean_code_length) + mask_bpp(ratios)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRow {
    pub ratios: RatioTriple,
    pub bpp: f64,
}

/// Ratio triples and their theoretical bpp, ascending by bpp.
#[derive(Clone, Debug, PartialEq)]
pub struct RateQueryTable {
    rows: Vec<RateRow>,
    mean_code_length: f64,
}

impl RateQueryTable {
    /// Table over explicit ratio triples.
    pub fn from_ratios(
        mean_code_length: f64,
        ratios: impl IntoIterator<Item = RatioTriple>,
    ) -> Result<Self> {
        if !(mean_code_length > 0.0 && mean_code_length.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "mean code length {mean_code_length} must be positive"
            )));
        }
        let mut rows: Vec<RateRow> = ratios
            .into_iter()
            .map(|r| RateRow {
                ratios: r,
                bpp: theoretical_bpp(&r, mean_code_length),
            })
            .collect();
        if rows.is_empty() {
            return Err(Error::InvalidConfig("empty rate table".into()));
        }
        rows.sort_by(|a, b| {
            a.bpp
                .total_cmp(&b.bpp)
                .then(b.ratios.r1.total_cmp(&a.ratios.r1))
                .then(b.ratios.r2.total_cmp(&a.ratios.r2))
        });
        Ok(Self {
            rows,
            mean_code_length,
        })
    }

    pub fn rows(&self) -> &[RateRow] {
        &self.rows
    }

    pub fn mean_code_length(&self) -> f64 {
        self.mean_code_length
    }

    /// Closest row to `target_bpp`; ties go to the row with the larger r1.
    pub fn ratios_for_target(&self, target_bpp: f64) -> RatioTriple {
        let mut best = &self.rows[0];
        let mut best_err = (best.bpp - target_bpp).abs();
        for row in &self.rows[1..] {
            let err = (row.bpp - target_bpp).abs();
            let tie = (err - best_err).abs() <= 1e-12;
            if (err < best_err && !tie) || (tie && row.ratios.r1 > best.ratios.r1) {
                best = row;
                best_err = err;
            }
        }
        best.ratios
    }

    /// Same triples, re-costed with another mean code length.
    pub fn with_mean_code_length(&self, mean_code_length: f64) -> Result<Self> {
        Self::from_ratios(mean_code_length, self.rows.iter().map(|r| r.ratios))
    }

    /// Reads the triples of a table written by [`RateQueryTable::to_csv`];
    /// the bpp column is recomputed, not trusted.
    pub fn from_csv(mean_code_length: f64, text: &str) -> Result<Self> {
        let mut ratios = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("r1") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 3 {
                return Err(Error::InvalidConfig(format!("rate table line {}: expected r1,r2,r3", n + 1)));
            }
            let mut v = [0.0; 3];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("rate table line {}: bad number {f:?}", n + 1)))?;
            }
            ratios.push(RatioTriple::new(v[0], v[1], v[2])?);
        }
        Self::from_ratios(mean_code_length, ratios)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r1,r2,r3,bpp\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6}\n",
                row.ratios.r1, row.ratios.r2, row.ratios.r3, row.bpp
            ));
        }
        out
    }
}

/// Enumerates the ratio simplex on a lattice with spacing at most `step`
/// (`ceil(1/step)` divisions per unit).
pub fn build_rate_table(mean_code_length: f64, step: f64) -> Result<RateQueryTable> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::InvalidConfig(format!("step {step} must lie in (0, 0.5]")));
    }
    let n = (1.0 / step - RATIO_EPS).ceil() as usize;
    let lattice = (0..=n).flat_map(move |i| {
        (0..=n - i).map(move |j| RatioTriple {
            r1: i as f64 / n as f64,
            r2: j as f64 / n as f64,
            r3: (n - i - j) as f64 / n as f64,
        })
    });
    RateQueryTable::from_ratios(mean_code_length, lattice)
}

/// [`RateQueryTable::ratios_for_target`] as a free function.
pub fn ratios_for_target(table: &RateQueryTable, target_bpp: f64) -> RatioTriple {
    table.ratios_for_target(target_bpp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REFERENCE_L: f64 = 10.3875;

    fn rt(r1: f64, r2: f64, r3: f64) -> RatioTriple {
        RatioTriple::new(r1, r2, r3).unwrap()
    }

    fn emap(values: Vec<f64>) -> EntropyMap {
        let n = values.len();
        EntropyMap::new(1, n, values).unwrap()
    }

    #[test]
    fn ratio_validation() {
        assert!(RatioTriple::new(0.5, 0.5, 0.1).is_err());
        assert!(RatioTriple::new(-0.1, 0.6, 0.5).is_err());
        assert!(RatioTriple::new(0.1, 0.67, 0.23).is_ok());
        assert_eq!("10%,67%,23%".parse::<RatioTriple>().unwrap().to_parts(), [1000, 6700, 2300]);
        assert!("0.1,0.9".parse::<RatioTriple>().is_err());
    }

    #[test]
    fn degenerate_plans() {
        let map = emap(vec![0.3, 1.0, 2.0]);
        let all_c = plan_granularity(&map, &RatioTriple::ALL_COARSE);
        assert!(all_c.labels().iter().all(|&g| g == Granularity::Coarse));
        let all_f = plan_granularity(&map, &RatioTriple::ALL_FINE);
        assert!(all_f.labels().iter().all(|&g| g == Granularity::Fine));
    }

    #[test]
    fn sort_and_slice_example() {
        let map = emap(vec![3.1, 0.2, 2.0, 0.2]);
        let plan = plan_granularity(&map, &rt(0.25, 0.25, 0.5));
        use Granularity::*;
        assert_eq!(plan.labels(), &[Fine, Coarse, Medium, Coarse]);
    }

    #[test]
    fn medium_is_clipped_when_rounding_overflows() {
        assert_eq!(label_counts(&rt(0.0, 0.5, 0.5), 3), (0, 1, 2));
        assert_eq!(label_counts(&rt(0.0, 0.5, 0.5), 4), (0, 2, 2));
    }

    #[test]
    fn single_block_masks() {
        let m = masks_from_map(&GranularityMap::uniform(1, 1, Granularity::Coarse));
        assert_eq!(m.m3.bits(), &[true]);
        assert_eq!(m.m1.ones() + m.m2.ones(), 0);
        let m = masks_from_map(&GranularityMap::uniform(1, 1, Granularity::Fine));
        assert_eq!((m.m1.h(), m.m1.w(), m.m1.ones()), (4, 4, 16));
        assert_eq!(m.m2.ones() + m.m3.ones(), 0);
    }

    #[test]
    fn disjoint_cover_exhaustive_2x2() {
        for code in 0..81 {
            let labels = (0..4)
                .map(|i| Granularity::ALL[(code / 3usize.pow(i)) % 3])
                .collect();
            let gmap = GranularityMap::new(2, 2, labels).unwrap();
            let masks = masks_from_map(&gmap);
            assert!(masks.is_disjoint_cover(), "map {code}");
            // blockwise constant over each 16x16 parent
            for g in Granularity::ALL {
                let m = masks.get(g);
                let s = g.cells_per_side();
                for y in 0..m.h() {
                    for x in 0..m.w() {
                        assert_eq!(m.get(y, x), gmap.get(y / s, x / s) == g);
                    }
                }
            }
        }
    }

    #[test]
    fn theoretical_bpp_table_rows() {
        let rows = [
            (rt(0.0, 0.23, 0.77), 0.070),
            (rt(0.37, 0.46, 0.17), 0.330),
        ];
        for (r, want) in rows {
            let got = theoretical_bpp(&r, REFERENCE_L);
            assert!((got - want).abs() <= 0.001, "{r}: {got}");
        }
        // The reference 0.616 for (90%, 10%, 0) sits 0.00102 away from the
        // formula's value; the exact formula value is what is pinned here.
        let got = theoretical_bpp(&rt(0.9, 0.1, 0.0), REFERENCE_L);
        assert!((got - 0.614_980_468_75).abs() < 1e-12);
    }

    #[test]
    fn table_shape_and_extremes() {
        let t = build_rate_table(10.0, 0.5).unwrap();
        assert_eq!(t.rows().len(), 6);
        let first = t.rows()[0];
        assert_eq!(first.ratios, RatioTriple::ALL_COARSE);
        assert!((first.bpp - 10.0 / 256.0).abs() < 1e-15);
        let last = t.rows().last().unwrap();
        assert_eq!(last.ratios, RatioTriple::ALL_FINE);
        assert!((last.bpp - (16.0 * 10.0 + 4.0) / 256.0).abs() < 1e-15);
        assert!(t.rows().windows(2).all(|w| w[0].bpp <= w[1].bpp));
        assert_eq!(build_rate_table(10.0, 0.01).unwrap().rows().len(), 101 * 102 / 2);
        assert!(build_rate_table(10.0, 0.6).is_err());
        assert!(build_rate_table(10.0, 0.0).is_err());
    }

    #[test]
    fn target_lookup() {
        let reference_rows = [
            rt(0.0, 0.23, 0.77),
            rt(0.1, 0.67, 0.23),
            rt(0.37, 0.46, 0.17),
            rt(0.61, 0.30, 0.09),
            rt(0.9, 0.1, 0.0),
        ];
        let t = RateQueryTable::from_ratios(REFERENCE_L, reference_rows).unwrap();
        assert_eq!(t.ratios_for_target(0.187), rt(0.1, 0.67, 0.23));
        for row in t.rows() {
            assert_eq!(t.ratios_for_target(row.bpp), row.ratios);
        }
        let full = build_rate_table(REFERENCE_L, 0.01).unwrap();
        assert_eq!(full.ratios_for_target(0.0), RatioTriple::ALL_COARSE);
        assert_eq!(full.ratios_for_target(10.0), RatioTriple::ALL_FINE);
    }

    #[test]
    fn csv_round_trip() {
        let t = build_rate_table(9.5, 0.25).unwrap();
        let back = RateQueryTable::from_csv(9.5, &t.to_csv()).unwrap();
        assert_eq!(back.rows().len(), t.rows().len());
        for (a, b) in back.rows().iter().zip(t.rows()) {
            assert!((a.bpp - b.bpp).abs() < 1e-5);
        }
        let reference = RateQueryTable::from_csv(REFERENCE_L, "r1,r2,r3\n0.1,0.67,0.23\n0.9,0.1,0\n").unwrap();
        assert_eq!(reference.ratios_for_target(0.187), rt(0.1, 0.67, 0.23));
        assert!(RateQueryTable::from_csv(REFERENCE_L, "0.5,0.6,0.1\n").is_err());
        assert!(RateQueryTable::from_csv(REFERENCE_L, "r1,r2,r3\n").is_err());
        assert!(RateQueryTable::from_csv(REFERENCE_L, "a,b,c\n").is_err());
    }

    #[test]
    fn lookup_ties_prefer_fine() {
        // With L = 1 the cost is (20 r1 + 5 r2 + r3) / 256, so both rows
        // below cost 4.8 / 256.
        let a = rt(0.2, 0.0, 0.8);
        let b = rt(0.0, 0.95, 0.05);
        let t = RateQueryTable::from_ratios(1.0, [b, a]).unwrap();
        assert_eq!(t.ratios_for_target(4.8 / 256.0), a);
        // Equidistant from two different costs.
        let c = rt(0.0, 0.6, 0.4);
        let t = RateQueryTable::from_ratios(1.0, [c, a]).unwrap();
        let mid = (theoretical_bpp(&a, 1.0) + theoretical_bpp(&c, 1.0)) / 2.0;
        assert_eq!(t.ratios_for_target(mid), a);
    }

    proptest! {
        #[test]
        fn label_counts_follow_rounding(n in 1usize..400, a in 0u32..=100, b in 0u32..=100) {
            prop_assume!(a + b <= 100);
            let r = rt(a as f64 / 100.0, b as f64 / 100.0, 1.0 - (a + b) as f64 / 100.0);
            let map = emap((0..n).map(|i| ((i * 7919) % 97) as f64).collect());
            let (f, m, c) = plan_granularity(&map, &r).counts();
            let want_c = ((r.r3 * n as f64) + 0.5 + 1e-9).floor() as usize;
            let want_m = (((r.r2 * n as f64) + 0.5 + 1e-9).floor() as usize).min(n - want_c);
            prop_assert_eq!((f, m, c), (n - want_c - want_m, want_m, want_c));
        }

        #[test]
        fn plan_depends_only_on_ranks(values in proptest::collection::vec(0.0f64..5.0, 1..64), a in 0u32..=10, b in 0u32..=10) {
            prop_assume!(a + b <= 10);
            let r = rt(a as f64 / 10.0, b as f64 / 10.0, 1.0 - (a + b) as f64 / 10.0);
            let base = plan_granularity(&emap(values.clone()), &r);
            let warped = plan_granularity(&emap(values.iter().map(|v| (3.0 * v).exp() - 7.0).collect()), &r);
            prop_assert_eq!(base, warped);
        }

        #[test]
        fn bpp_increases_with_fine_share(r3 in 0u32..100, steps in 1u32..100, l in 1.0f64..20.0) {
            let room = 100 - r3;
            let lo = 0u32;
            let hi = steps.min(room);
            prop_assume!(hi > lo);
            let at = |r1: u32| theoretical_bpp(&rt(r1 as f64 / 100.0, (room - r1) as f64 / 100.0, r3 as f64 / 100.0), l);
            prop_assert!(at(hi) > at(lo));
        }

        #[test]
        fn masks_always_partition(by in 1usize..5, bx in 1usize..5, seed in any::<u64>()) {
            let labels = (0..by * bx).map(|i| Granularity::ALL[((seed >> (i % 32 * 2)) % 3) as usize]).collect();
            let gmap = GranularityMap::new(by, bx, labels).unwrap();
            prop_assert!(masks_from_map(&gmap).is_disjoint_cover());
        }
    }
}
