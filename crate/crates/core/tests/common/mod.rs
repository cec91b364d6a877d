#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use granucodec::codec::{train_from_images, CodecSession, TrainingConfig};
use granucodec::imaging::{byte_to_sample, load_image, ImagePlane};
use granucodec::vq::CodebookFile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn photo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/photos")
}

pub fn photos() -> Vec<(String, ImagePlane)> {
    let mut paths: Vec<_> = std::fs::read_dir(photo_dir())
        .expect("photo dir")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "ppm"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, load_image(&p).expect("photo loads"))
        })
        .collect()
}

fn clamp01(v: f64) -> f32 {
    (v.clamp(-1.0, 1.0)) as f32
}

/// A smooth value-noise field on a `cell`-pixel lattice, in [-1, 1].
fn value_noise(rng: &mut ChaCha8Rng, w: usize, h: usize, cell: usize) -> Vec<f64> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let fx = x as f64 / cell as f64;
            let fy = y as f64 / cell as f64;
            let (ix, iy) = (fx as usize, fy as usize);
            let (tx, ty) = (fx - ix as f64, fy - iy as f64);
            let s = |t: f64| t * t * (3.0 - 2.0 * t);
            let (sx, sy) = (s(tx), s(ty));
            let at = |i: usize, j: usize| lattice[j * gw + i];
            let top = at(ix, iy) * (1.0 - sx) + at(ix + 1, iy) * sx;
            let bot = at(ix, iy + 1) * (1.0 - sx) + at(ix + 1, iy + 1) * sx;
            out[y * w + x] = top * (1.0 - sy) + bot * sy;
        }
    }
    out
}

/// Deterministic synthetic scene of one of eight families; images mix
/// flat regions, gradients, edges and textures so block entropy spreads.
pub fn synthetic(kind: usize, seed: u64, w: usize, h: usize) -> ImagePlane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(kind as u64));
    let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.6..1.0));
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.6..0.6));
    let mut s = vec![0f32; w * h * 3];
    let smooth = value_noise(&mut rng, w, h, 64);
    let detail = value_noise(&mut rng, w, h, 4);
    let noise_amp = rng.random_range(0.05..0.4);
    let freq = rng.random_range(0.05..0.4);
    let cx = rng.random_range(0.2..0.8) * w as f64;
    let cy = rng.random_range(0.2..0.8) * h as f64;
    for y in 0..h {
        for x in 0..w {
            let (xf, yf) = (x as f64 / w as f64, y as f64 / h as f64);
            let i = y * w + x;
            let v = match kind % 8 {
                0 => 0.8 * smooth[i],
                1 => xf * 1.6 - 0.8 + if xf > 0.5 { noise_amp * detail[i] } else { 0.0 },
                2 => {
                    let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                    if r < 0.3 * w as f64 { 0.6 } else { -0.4 + 0.5 * smooth[i] }
                }
                3 => 0.6 * (freq * x as f64).sin() * (freq * 0.7 * y as f64).cos() * (0.5 + 0.5 * smooth[i]),
                4 => {
                    let check = ((x / 32) + (y / 32)) % 2 == 0;
                    (if check { 0.5 } else { -0.5 }) + noise_amp * 0.5 * detail[i]
                }
                5 => {
                    // Quadrants: flat, gradient, texture, noise.
                    match (xf < 0.5, yf < 0.5) {
                        (true, true) => 0.1,
                        (false, true) => yf * 2.0 - 0.5,
                        (true, false) => 0.7 * detail[i],
                        (false, false) => rng.random_range(-0.8..0.8),
                    }
                }
                6 => 0.5 * smooth[i] + noise_amp * rng.random_range(-1.0..1.0),
                _ => {
                    let stripes = ((x + 2 * y) / 12) % 3;
                    stripes as f64 * 0.5 - 0.5 + 0.3 * smooth[i]
                }
            };
            for c in 0..3 {
                s[i * 3 + c] = clamp01(base[c] * 0.3 + tint[c] * v);
            }
        }
    }
    // Quantize to the 8-bit grid so images match what a PPM round trip gives.
    let s = s
        .into_iter()
        .map(|v| byte_to_sample(granucodec::imaging::sample_to_byte(v)))
        .collect();
    ImagePlane::new(w, h, s).expect("samples in range")
}

/// 16 synthetic 512×512 scenes plus the bundled photos.
pub fn desk_corpus() -> &'static [(String, ImagePlane)] {
    static CORPUS: OnceLock<Vec<(String, ImagePlane)>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let mut v: Vec<_> = (0..16)
            .map(|i| (format!("synthetic-{i:02}"), synthetic(i, i as u64 / 8, 512, 512)))
            .collect();
        v.extend(photos());
        v
    })
}

pub fn desk_images() -> Vec<ImagePlane> {
    desk_corpus().iter().map(|(_, img)| img.clone()).collect()
}

/// Codebook trained once per test binary on the desk corpus.
pub fn desk_codebook() -> &'static CodebookFile {
    static CB: OnceLock<CodebookFile> = OnceLock::new();
    CB.get_or_init(|| {
        let cfg = TrainingConfig {
            k: 1024,
            iters: 12,
            seed: 7,
            max_points: 120_000,
        };
        train_from_images(&desk_images(), &cfg).expect("training succeeds")
    })
}

pub fn desk_session() -> CodecSession {
    CodecSession::new(desk_codebook().clone()).expect("session")
}

/// Prints the one-line verdict and fails the test on FAIL. Writes to the
/// stderr handle directly so the line shows even under output capture.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let line = format!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}
