mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use granucodec::bitstream::{measure_rate, parse_container, Container};
use granucodec::codec::{
    decode_bytes, encode_image, image_entropy, train_from_images, CodecSession, RateTarget, TrainingConfig,
};
use granucodec::granularity::RateQueryTable;
use granucodec::imaging::{load_image, psnr, save_image};
use granucodec::vq::CodebookFile;
use granucodec::RatioTriple;
use serde_json::json;

use config::Config;

/// Variable-rate image codec with per-block granularity.
///
/// Flags override values from the config file, which override built-in
/// defaults.
#[derive(Parser, Debug)]
#[command(name = "granucodec", version)]
struct Cli {
    /// key = value config file [default: ./granucodec.conf when present]
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a codebook and its index frequency table on a directory of PPM images.
    TrainCodebook(TrainArgs),
    /// Compress a PPM image into a .cgic container.
    Encode(EncodeArgs),
    /// Reconstruct a PPM image from a .cgic container.
    Decode(DecodeArgs),
    /// Encode in memory and report rates, PSNR and block counts.
    Stats(StatsArgs),
    /// Write the ratio-to-bpp query table as CSV.
    RateTable(RateTableArgs),
    /// Print the header fields and segment sizes of a .cgic container.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of .ppm images.
    #[arg(long)]
    corpus: PathBuf,
    /// Number of codes [default: 1024]
    #[arg(long)]
    k: Option<usize>,
    /// Feature dimension; the block-statistics transform has 4 [default: 4]
    #[arg(long)]
    d: Option<usize>,
    /// k-means seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Lloyd iterations [default: 20]
    #[arg(long)]
    iters: Option<usize>,
    /// Cells sampled for k-means; frequencies always use every cell [default: 200000]
    #[arg(long)]
    max_points: Option<usize>,
    /// Output codebook (.cgcb)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SessionArgs {
    /// Codebook file (.cgcb)
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Override the mean code length L used by the rate table [default: from the codebook]
    #[arg(long)]
    mean_code_length: Option<f64>,
    /// Lattice step of the rate table [default: 0.01]
    #[arg(long)]
    rate_step: Option<f64>,
    /// CSV of r1,r2,r3 rows to use as the rate table instead of the lattice
    #[arg(long)]
    rate_table: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct TargetArgs {
    /// Granularity ratios fine,medium,coarse, e.g. 0.1,0.67,0.23 or 10%,67%,23%
    #[arg(long)]
    ratios: Option<RatioTriple>,
    /// Target bits per pixel, resolved through the rate table
    #[arg(long)]
    bpp: Option<f64>,
}

impl TargetArgs {
    fn target(&self) -> RateTarget {
        match (self.ratios, self.bpp) {
            (Some(r), _) => RateTarget::Ratios(r),
            (None, Some(b)) => RateTarget::Bpp(b),
            (None, None) => unreachable!("clap requires one of --ratios / --bpp"),
        }
    }
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Input image (.ppm)
    #[arg(long)]
    input: PathBuf,
    /// Output container (.cgic)
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Codebook file (.cgcb)
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Input container (.cgic)
    #[arg(long)]
    input: PathBuf,
    /// Output image (.ppm)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Input image (.ppm)
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    target: TargetArgs,
    /// Also write the block entropy map as CSV
    #[arg(long)]
    entropy_csv: Option<PathBuf>,
    /// Print machine-readable JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct RateTableArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Write here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Container to inspect (.cgic)
    #[arg(long)]
    input: PathBuf,
    /// Check the container against this codebook's hash
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Print machine-readable JSON
    #[arg(long)]
    json: bool,
}

fn codebook_path(flag: &Option<PathBuf>, cfg: &Config) -> Result<PathBuf> {
    match flag.clone().or(cfg.get::<PathBuf>("codebook")?) {
        Some(p) => Ok(p),
        None => bail!("no codebook given (use --codebook or `codebook = ...` in the config file)"),
    }
}

fn read_codebook(path: &Path) -> Result<CodebookFile> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    CodebookFile::from_bytes(&bytes).with_context(|| format!("loading codebook {}", path.display()))
}

fn open_session(args: &SessionArgs, cfg: &Config) -> Result<CodecSession> {
    let file = read_codebook(&codebook_path(&args.codebook, cfg)?)?;
    let mut session = CodecSession::new(file)?;
    if let Some(l) = args.mean_code_length.or(cfg.get("mean_code_length")?) {
        session = session.with_mean_code_length(l)?;
    }
    let table_path = args.rate_table.clone().or(cfg.get::<PathBuf>("rate_table")?);
    if let Some(path) = table_path {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let table = RateQueryTable::from_csv(session.mean_code_length(), &text)
            .with_context(|| format!("parsing rate table {}", path.display()))?;
        session = session.with_rate_table(table);
    } else if let Some(step) = args.rate_step.or(cfg.get("rate_step")?) {
        session = session.with_rate_step(step)?;
    }
    Ok(session)
}

fn train(args: &TrainArgs, cfg: &Config) -> Result<()> {
    let d = cfg.resolve(args.d, "d", 4)?;
    if d != 4 {
        bail!("--d {d} is not supported: the block-statistics transform produces 4 channels");
    }
    let tc = TrainingConfig {
        k: cfg.resolve(args.k, "k", 1024)?,
        iters: cfg.resolve(args.iters, "iters", 20)?,
        seed: cfg.resolve(args.seed, "seed", 0)?,
        max_points: cfg.resolve(args.max_points, "max_points", 200_000)?,
    };
    if tc.k == 0 || tc.k > u16::MAX as usize {
        bail!("--k must lie in 1..=65535");
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.corpus)
        .with_context(|| format!("reading corpus directory {}", args.corpus.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .ppm images in {}", args.corpus.display());
    }
    let images = paths
        .iter()
        .map(|p| load_image(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let file = train_from_images(&images, &tc)?;
    fs::write(&args.out, file.to_bytes()).with_context(|| format!("writing {}", args.out.display()))?;
    let session = CodecSession::new(file)?;
    println!(
        "trained k={} on {} images; L = {:.4}; hash {:016x} -> {}",
        tc.k,
        images.len(),
        session.mean_code_length(),
        session.codebook_hash(),
        args.out.display()
    );
    Ok(())
}

fn encode(args: &EncodeArgs, cfg: &Config) -> Result<()> {
    let session = open_session(&args.session, cfg)?;
    let img = load_image(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    let enc = encode_image(&session, &img, args.target.target())?;
    let bytes = enc.to_bytes()?;
    fs::write(&args.out, &bytes).with_context(|| format!("writing {}", args.out.display()))?;
    let rate = enc.rate();
    println!(
        "ratios {} -> {} bytes, {:.4} bpp ({:.4} payload, {:.4} theoretical)",
        enc.ratios,
        rate.bytes,
        rate.total_bpp,
        rate.payload_bpp,
        session.theoretical_bpp(&enc.gmap().realized_ratios())
    );
    Ok(())
}

fn decode(args: &DecodeArgs, cfg: &Config) -> Result<()> {
    let session = CodecSession::new(read_codebook(&codebook_path(&args.codebook, cfg)?)?)?;
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let img = decode_bytes(&session, &bytes).with_context(|| format!("decoding {}", args.input.display()))?;
    save_image(&args.out, &img).with_context(|| format!("writing {}", args.out.display()))?;
    println!("{}x{} -> {}", img.width(), img.height(), args.out.display());
    Ok(())
}

fn stats(args: &StatsArgs, cfg: &Config) -> Result<()> {
    let session = open_session(&args.session, cfg)?;
    let img = load_image(&args.input).with_context(|| format!("loading {}", args.input.display()))?;
    if let Some(path) = &args.entropy_csv {
        let map = image_entropy(&session, &img)?;
        fs::write(path, map.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    let enc = encode_image(&session, &img, args.target.target())?;
    let dec = granucodec::codec::decode_image(&session, &enc.container)?;
    let quality = psnr(&img, &dec)?;
    let rate = enc.rate();
    let (fine, medium, coarse) = enc.gmap().counts();
    let realized = enc.gmap().realized_ratios();
    let theoretical = session.theoretical_bpp(&realized);
    if args.json {
        let out = json!({
            "input": args.input.display().to_string(),
            "width": img.true_width(),
            "height": img.true_height(),
            "requested_ratios": [enc.ratios.r1, enc.ratios.r2, enc.ratios.r3],
            "realized_ratios": [realized.r1, realized.r2, realized.r3],
            "blocks": { "fine": fine, "medium": medium, "coarse": coarse },
            "mean_code_length": session.mean_code_length(),
            "theoretical_bpp": theoretical,
            "actual_bpp": rate.total_bpp,
            "payload_bpp": rate.payload_bpp,
            "bytes": rate.bytes,
            "psnr_db": quality.db(),
            "lossless": matches!(quality, granucodec::Psnr::Lossless),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("image            {}x{}", img.true_width(), img.true_height());
        println!("ratios           {} (realized {realized})", enc.ratios);
        println!("blocks           fine {fine}, medium {medium}, coarse {coarse}");
        println!("L                {:.4}", session.mean_code_length());
        println!("theoretical bpp  {theoretical:.4}");
        println!("actual bpp       {:.4} ({} bytes)", rate.total_bpp, rate.bytes);
        println!("payload bpp      {:.4}", rate.payload_bpp);
        println!("PSNR             {quality}");
    }
    Ok(())
}

fn rate_table(args: &RateTableArgs, cfg: &Config) -> Result<()> {
    let session = open_session(&args.session, cfg)?;
    let table = session.rate_table();
    let csv = table.to_csv();
    match &args.out {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            println!("{} rows (L = {:.4}) -> {}", table.rows().len(), table.mean_code_length(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn container_json(c: &Container) -> serde_json::Value {
    let rate = measure_rate(c);
    let (fine, medium, coarse) = c.gmap.counts();
    let r = c.ratios();
    json!({
        "true_width": c.true_width,
        "true_height": c.true_height,
        "padded_width": c.padded_width,
        "padded_height": c.padded_height,
        "codebook_hash": format!("{:016x}", c.codebook_hash),
        "ratio_parts": c.ratio_parts,
        "ratios": [r.r1, r.r2, r.r3],
        "blocks": { "fine": fine, "medium": medium, "coarse": coarse },
        "map_bits": rate.map_bits,
        "segment_bits": { "fine": rate.segment_bits[0], "medium": rate.segment_bits[1], "coarse": rate.segment_bits[2] },
        "bytes": rate.bytes,
        "actual_bpp": rate.total_bpp,
        "payload_bpp": rate.payload_bpp,
    })
}

fn inspect(args: &InspectArgs) -> Result<()> {
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let expect = match &args.codebook {
        Some(p) => Some(read_codebook(p)?.id_hash()),
        None => None,
    };
    let c = parse_container(&bytes, expect).with_context(|| format!("parsing {}", args.input.display()))?;
    let v = container_json(&c);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(());
    }
    let rate = measure_rate(&c);
    let (fine, medium, coarse) = c.gmap.counts();
    println!("size             {}x{} (padded {}x{})", c.true_width, c.true_height, c.padded_width, c.padded_height);
    println!("codebook hash    {:016x}", c.codebook_hash);
    println!("ratios           {} (parts {:?})", c.ratios(), c.ratio_parts);
    println!("blocks           fine {fine}, medium {medium}, coarse {coarse}");
    println!("map bits         {}", rate.map_bits);
    println!(
        "segment bits     fine {}, medium {}, coarse {}",
        rate.segment_bits[0], rate.segment_bits[1], rate.segment_bits[2]
    );
    println!("bytes            {}", rate.bytes);
    println!("actual bpp       {:.4}", rate.total_bpp);
    println!("payload bpp      {:.4}", rate.payload_bpp);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::TrainCodebook(a) => train(a, &cfg),
        Command::Encode(a) => encode(a, &cfg),
        Command::Decode(a) => decode(a, &cfg),
        Command::Stats(a) => stats(a, &cfg),
        Command::RateTable(a) => rate_table(a, &cfg),
        Command::Inspect(a) => inspect(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
