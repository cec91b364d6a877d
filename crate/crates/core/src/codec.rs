//! End-to-end encoder and decoder around a shared codebook file.

use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{AnalysisTransform, BlockStatistics, Pyramid};
use crate::bitstream::{
    measure_rate, parse_container, serialize_container, BitReader, Container, HuffmanCode, RateReport,
};
use crate::entropy::{entropy_map, EntropyConfig, EntropyMap};
use crate::error::{Error, Result};
use crate::granularity::{
    build_rate_table, masks_from_map, plan_granularity, theoretical_bpp, Granularity, GranularityMap, MaskSet,
    RateQueryTable, RatioTriple,
};
use crate::imaging::{pad_to_block, FeatureGrid, ImagePlane, BLOCK};
use crate::reconstruction::{assemble_hybrid, conditional_decode, synthesize_image, DecoderStates, NearestSynthesis, Synthesis};
use crate::vq::{quantize_cells, train_codebook, CodebookFile, FrequencyTable, KMeansParams};

pub const DEFAULT_RATE_STEP: f64 = 0.01;

/// Everything both ends need: codebook, statistics-derived Huffman code,
/// rate table and the pluggable transforms. Read-only once built.
pub struct CodecSession {
    file: CodebookFile,
    hash: u64,
    code: HuffmanCode,
    rate_table: RateQueryTable,
    entropy: EntropyConfig,
    transform: Box<dyn AnalysisTransform>,
    synthesis: Box<dyn Synthesis>,
}

impl fmt::Debug for CodecSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodecSession")
            .field("k", &self.file.codebook.k())
            .field("d", &self.file.codebook.d())
            .field("hash", &format_args!("{:016x}", self.hash))
            .field("mean_code_length", &self.rate_table.mean_code_length())
            .field("transform", &self.transform.descriptor())
            .finish_non_exhaustive()
    }
}

impl CodecSession {
    pub fn new(file: CodebookFile) -> Result<Self> {
        let transform = BlockStatistics;
        if file.codebook.d() != transform.dim() {
            return Err(Error::DimensionMismatch {
                expected: transform.dim(),
                got: file.codebook.d(),
            });
        }
        let code = HuffmanCode::build(&file.frequencies)?;
        let rate_table = build_rate_table(crate::bitstream::mean_code_length(&code), DEFAULT_RATE_STEP)?;
        Ok(Self {
            hash: file.id_hash(),
            file,
            code,
            rate_table,
            entropy: EntropyConfig::default(),
            transform: Box::new(transform),
            synthesis: Box::new(NearestSynthesis),
        })
    }

    /// Re-costs the rate table with an explicit mean code length, for
    /// reproducing tables computed with a different model.
    pub fn with_mean_code_length(mut self, mean_code_length: f64) -> Result<Self> {
        self.rate_table = self.rate_table.with_mean_code_length(mean_code_length)?;
        Ok(self)
    }

    pub fn with_rate_step(mut self, step: f64) -> Result<Self> {
        self.rate_table = build_rate_table(self.rate_table.mean_code_length(), step)?;
        Ok(self)
    }

    pub fn with_rate_table(mut self, table: RateQueryTable) -> Self {
        self.rate_table = table;
        self
    }

    pub fn with_entropy_config(mut self, cfg: EntropyConfig) -> Self {
        self.entropy = cfg;
        self
    }

    pub fn with_synthesis(mut self, synth: Box<dyn Synthesis>) -> Self {
        self.synthesis = synth;
        self
    }

    pub fn with_transform(mut self, transform: Box<dyn AnalysisTransform>) -> Result<Self> {
        if transform.dim() != self.file.codebook.d() {
            return Err(Error::DimensionMismatch {
                expected: self.file.codebook.d(),
                got: transform.dim(),
            });
        }
        self.transform = transform;
        Ok(self)
    }

    pub fn codebook_file(&self) -> &CodebookFile {
        &self.file
    }

    pub fn codebook_hash(&self) -> u64 {
        self.hash
    }

    pub fn code(&self) -> &HuffmanCode {
        &self.code
    }

    pub fn rate_table(&self) -> &RateQueryTable {
        &self.rate_table
    }

    pub fn mean_code_length(&self) -> f64 {
        self.rate_table.mean_code_length()
    }

    pub fn entropy_config(&self) -> &EntropyConfig {
        &self.entropy
    }

    pub fn theoretical_bpp(&self, ratios: &RatioTriple) -> f64 {
        theoretical_bpp(ratios, self.mean_code_length())
    }

    pub fn resolve(&self, target: RateTarget) -> RatioTriple {
        match target {
            RateTarget::Ratios(r) => r,
            RateTarget::Bpp(b) => self.rate_table.ratios_for_target(b),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateTarget {
    Ratios(RatioTriple),
    Bpp(f64),
}

/// Encoder output plus the state the decoder must reproduce.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub container: Container,
    /// Ratios the plan was derived from (requested or looked up).
    pub ratios: RatioTriple,
    pub masks: MaskSet,
    /// Fine, medium and coarse index streams.
    pub indices: [Vec<u32>; 3],
    /// Quantized grids, zero outside their masks.
    pub quantized: [FeatureGrid; 3],
}

impl Encoded {
    pub fn gmap(&self) -> &GranularityMap {
        &self.container.gmap
    }

    pub fn rate(&self) -> RateReport {
        measure_rate(&self.container)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        serialize_container(&self.container)
    }
}

fn ensure_padded(img: &ImagePlane) -> ImagePlane {
    if img.is_block_aligned() {
        img.clone()
    } else {
        pad_to_block(img, BLOCK)
    }
}

/// Entropy map of the padded image.
pub fn image_entropy(session: &CodecSession, img: &ImagePlane) -> Result<EntropyMap> {
    entropy_map(&ensure_padded(img), &session.entropy)
}

/// Plans granularity from block entropy and encodes.
pub fn encode_image(session: &CodecSession, img: &ImagePlane, target: RateTarget) -> Result<Encoded> {
    let img = ensure_padded(img);
    let ratios = session.resolve(target);
    let emap = entropy_map(&img, &session.entropy)?;
    let gmap = plan_granularity(&emap, &ratios);
    let mut enc = encode_with_plan(session, &img, &gmap)?;
    enc.ratios = ratios;
    Ok(enc)
}

/// Encodes with an explicit granularity map.
pub fn encode_with_plan(session: &CodecSession, img: &ImagePlane, gmap: &GranularityMap) -> Result<Encoded> {
    let img = ensure_padded(img);
    if gmap.blocks_x() * BLOCK != img.width() || gmap.blocks_y() * BLOCK != img.height() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} block map for a {}x{} image",
            gmap.blocks_x(),
            gmap.blocks_y(),
            img.width(),
            img.height()
        )));
    }
    let masks = masks_from_map(gmap);
    let pyramid = session.transform.extract(&img)?;
    let cb = &session.file.codebook;

    let mut indices: [Vec<u32>; 3] = Default::default();
    let mut quantized: [FeatureGrid; 3] = Granularity::ALL.map(|g| {
        let z = pyramid.get(g);
        FeatureGrid::zeros(z.h(), z.w(), z.d())
    });
    for (slot, g) in Granularity::ALL.into_iter().enumerate() {
        let (cells, positions) = masked_cells(&pyramid, &masks, g);
        let idx = quantize_cells(&cells, cb)?;
        for (&(y, x), &i) in positions.iter().zip(&idx) {
            quantized[slot].cell_mut(y, x).copy_from_slice(cb.code(i as usize));
        }
        indices[slot] = idx;
    }
    let segments = crate::bitstream::encode_indices([&indices[0], &indices[1], &indices[2]], &session.code)?;
    let container = Container::new(img.true_width(), img.true_height(), session.hash, gmap.clone(), segments)?;
    Ok(Encoded {
        container,
        ratios: gmap.realized_ratios(),
        masks,
        indices,
        quantized,
    })
}

/// Cells of one scale under its mask, raster order, with their positions.
fn masked_cells(p: &Pyramid, masks: &MaskSet, g: Granularity) -> (Vec<f32>, Vec<(usize, usize)>) {
    let z = p.get(g);
    let m = masks.get(g);
    let mut cells = Vec::new();
    let mut pos = Vec::new();
    for y in 0..z.h() {
        for x in 0..z.w() {
            if m.get(y, x) {
                cells.extend_from_slice(z.cell(y, x));
                pos.push((y, x));
            }
        }
    }
    (cells, pos)
}

/// Decoder output with the intermediate state exposed.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub image: ImagePlane,
    pub masks: MaskSet,
    pub indices: [Vec<u32>; 3],
    pub hybrid: FeatureGrid,
    pub states: DecoderStates,
}

fn decode_segment(seg: &crate::bitstream::BitBuf, count: usize, code: &HuffmanCode) -> Result<Vec<u32>> {
    let mut r = BitReader::new(seg.as_bytes(), 0, seg.len());
    let out = (0..count).map(|_| code.decode_symbol(&mut r)).collect::<Result<Vec<_>>>()?;
    if r.remaining() != 0 {
        return Err(Error::MalformedContainer(format!("{} unused bits in index segment", r.remaining())));
    }
    Ok(out)
}

pub fn decode_detailed(session: &CodecSession, c: &Container) -> Result<Decoded> {
    if c.codebook_hash != session.hash {
        return Err(Error::CodebookMismatch {
            container: c.codebook_hash,
            codebook: session.hash,
        });
    }
    let gmap = &c.gmap;
    let masks = masks_from_map(gmap);
    let counts = gmap.stream_lengths();
    let indices = [0, 1, 2].map(|i| decode_segment(&c.segments[i], counts[i], &session.code));
    let [i1, i2, i3] = indices;
    let indices = [i1?, i2?, i3?];

    let cb = &session.file.codebook;
    let mut grids = Granularity::ALL.map(|g| {
        let m = masks.get(g);
        FeatureGrid::zeros(m.h(), m.w(), cb.d())
    });
    for (slot, g) in Granularity::ALL.into_iter().enumerate() {
        let m = masks.get(g);
        let mut it = indices[slot].iter();
        for y in 0..m.h() {
            for x in 0..m.w() {
                if m.get(y, x) {
                    let &i = it.next().expect("stream length matches mask");
                    if i as usize >= cb.k() {
                        return Err(Error::IndexOutOfRange { index: i as usize, k: cb.k() });
                    }
                    grids[slot].cell_mut(y, x).copy_from_slice(cb.code(i as usize));
                }
            }
        }
    }
    let hybrid = assemble_hybrid(&grids[0], &grids[1], &grids[2], &masks)?;
    let states = conditional_decode(&hybrid, &masks, session.synthesis.as_ref())?;
    let image = synthesize_image(&states.y3, session.synthesis.as_ref(), c.true_width as usize, c.true_height as usize)?;
    Ok(Decoded {
        image,
        masks,
        indices,
        hybrid,
        states,
    })
}

pub fn decode_image(session: &CodecSession, c: &Container) -> Result<ImagePlane> {
    decode_detailed(session, c).map(|d| d.image)
}

/// Parses `.cgic` bytes against the session's codebook and decodes them.
pub fn decode_bytes(session: &CodecSession, bytes: &[u8]) -> Result<ImagePlane> {
    let c = parse_container(bytes, Some(session.hash))?;
    decode_image(session, &c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainingConfig {
    pub k: usize,
    pub iters: usize,
    pub seed: u64,
    /// Cap on the number of cells k-means sees; frequencies are always
    /// accumulated over every cell.
    pub max_points: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            k: 1024,
            iters: 20,
            seed: 0,
            max_points: 200_000,
        }
    }
}

/// All pyramid cells of all images, every scale, back to back.
pub fn corpus_cells(images: &[ImagePlane], transform: &dyn AnalysisTransform) -> Result<Vec<f32>> {
    let mut cells = Vec::new();
    for img in images {
        let p = transform.extract(&ensure_padded(img))?;
        for g in Granularity::ALL {
            cells.extend_from_slice(p.get(g).values());
        }
    }
    Ok(cells)
}

/// Trains a codebook on the reference transform's cells and gathers the
/// endpoint index statistics over the whole corpus.
pub fn train_from_images(images: &[ImagePlane], cfg: &TrainingConfig) -> Result<CodebookFile> {
    let transform = BlockStatistics;
    let d = transform.dim();
    let cells = corpus_cells(images, &transform)?;
    let n = cells.len() / d;
    let training: Vec<f32> = if n > cfg.max_points && cfg.max_points >= cfg.k {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed);
        let mut picks = sample(&mut rng, n, cfg.max_points).into_vec();
        picks.sort_unstable();
        picks.iter().flat_map(|&i| cells[i * d..(i + 1) * d].iter().copied()).collect()
    } else {
        cells.clone()
    };
    let codebook = train_codebook(
        &training,
        d,
        KMeansParams {
            k: cfg.k,
            iters: cfg.iters,
            seed: cfg.seed,
        },
    )?;
    let mut freq = FrequencyTable::new(cfg.k);
    freq.accumulate(&quantize_cells(&cells, &codebook)?)?;
    CodebookFile::new(codebook, freq.finalize())
}
