use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_granucodec"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_ppm(path: &Path, w: usize, h: usize, seed: usize) {
    let mut data = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            let t = (x * 7 + y * 13 + seed * 31) as u32;
            let noise = (t.wrapping_mul(2_654_435_761) >> 24) as u8;
            let r = if x < w / 2 { (x * 255 / w) as u8 } else { noise };
            let g = ((y * 255) / h) as u8;
            let b = if (x / 8 + y / 8 + seed) % 2 == 0 { 40 } else { 200 };
            data.extend_from_slice(&[r, g, b]);
        }
    }
    std::fs::write(path, data).unwrap();
}

/// A temp dir holding a small corpus and a trained codebook.
fn setup() -> (TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    for i in 0..3 {
        write_ppm(&corpus.join(format!("img{i}.ppm")), 96, 80, i);
    }
    std::fs::write(corpus.join("notes.txt"), "ignored").unwrap();
    let cb = tmp.path().join("cb.cgcb");
    ok(
        tmp.path(),
        &["train-codebook", "--corpus", "corpus", "--k", "32", "--iters", "5", "--seed", "3", "--out", "cb.cgcb"],
    );
    (tmp, cb)
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).expect("valid json")
}

#[test]
fn encode_decode_inspect_stats_agree() {
    let (tmp, _) = setup();
    let d = tmp.path();
    write_ppm(&d.join("a.ppm"), 70, 50, 9);
    ok(d, &["encode", "--codebook", "cb.cgcb", "--input", "a.ppm", "--out", "a.cgic", "--ratios", "40%,30%,30%"]);
    ok(d, &["decode", "--codebook", "cb.cgcb", "--input", "a.cgic", "--out", "a_rec.ppm"]);
    let rec = std::fs::read(d.join("a_rec.ppm")).unwrap();
    assert!(rec.starts_with(b"P6\n70 50\n255\n"));
    assert_eq!(rec.len(), "P6\n70 50\n255\n".len() + 70 * 50 * 3);

    let inspect = json(&ok(d, &["inspect", "--input", "a.cgic", "--json", "--codebook", "cb.cgcb"]));
    assert_eq!(inspect["true_width"], 70);
    assert_eq!(inspect["padded_height"], 64);
    let bytes = std::fs::metadata(d.join("a.cgic")).unwrap().len();
    assert_eq!(inspect["bytes"], bytes);

    let stats = json(&ok(
        d,
        &["stats", "--codebook", "cb.cgcb", "--input", "a.ppm", "--ratios", "40%,30%,30%", "--json"],
    ));
    assert_eq!(stats["actual_bpp"], inspect["actual_bpp"]);
    assert_eq!(stats["payload_bpp"], inspect["payload_bpp"]);
    let blocks = &stats["blocks"];
    let total = blocks["fine"].as_u64().unwrap() + blocks["medium"].as_u64().unwrap() + blocks["coarse"].as_u64().unwrap();
    assert_eq!(total, 5 * 4);
    assert!(stats["psnr_db"].as_f64().unwrap() > 0.0);

    let text = ok(d, &["inspect", "--input", "a.cgic"]);
    assert!(text.contains("segment bits"));
}

#[test]
fn bpp_target_with_pinned_model() {
    let (tmp, _) = setup();
    let d = tmp.path();
    write_ppm(&d.join("b.ppm"), 160, 160, 4);
    std::fs::write(
        d.join("reference.csv"),
        "r1,r2,r3\n0,0.23,0.77\n0.1,0.67,0.23\n0.37,0.46,0.17\n0.61,0.30,0.09\n0.9,0.1,0\n",
    )
    .unwrap();
    let args = [
        "encode",
        "--codebook",
        "cb.cgcb",
        "--input",
        "b.ppm",
        "--out",
        "b.cgic",
        "--bpp",
        "0.187",
        "--mean-code-length",
        "10.3875",
        "--rate-table",
        "reference.csv",
    ];
    let out = ok(d, &args);
    assert!(out.starts_with("ratios 0.1,0.67,0.23 "), "{out}");
    let inspect = json(&ok(d, &["inspect", "--input", "b.cgic", "--json"]));
    assert_eq!(inspect["ratio_parts"], serde_json::json!([1000, 6700, 2300]));
}

#[test]
fn rate_table_and_entropy_dump() {
    let (tmp, _) = setup();
    let d = tmp.path();
    ok(d, &["rate-table", "--codebook", "cb.cgcb", "--rate-step", "0.5", "--out", "t.csv"]);
    let csv = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "r1,r2,r3,bpp");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0.000000,0.000000,1.000000,"));

    write_ppm(&d.join("c.ppm"), 64, 48, 1);
    ok(
        d,
        &["stats", "--codebook", "cb.cgcb", "--input", "c.ppm", "--bpp", "0.2", "--entropy-csv", "e.csv"],
    );
    let e = std::fs::read_to_string(d.join("e.csv")).unwrap();
    assert_eq!(e.lines().next(), Some("row,col,entropy"));
    assert_eq!(e.lines().count(), 1 + 4 * 3);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let (tmp, _) = setup();
    let d = tmp.path();
    std::fs::write(d.join("granucodec.conf"), "codebook = cb.cgcb\nrate_step = 0.5\n").unwrap();
    let table = ok(d, &["rate-table"]);
    assert_eq!(table.lines().count(), 7);
    let finer = ok(d, &["rate-table", "--rate-step", "0.25"]);
    assert_eq!(finer.lines().count(), 1 + 15);

    std::fs::write(d.join("other.conf"), "colour = blue\n").unwrap();
    let out = run(d, &["--config", "other.conf", "rate-table"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn failures_exit_nonzero() {
    let (tmp, _) = setup();
    let d = tmp.path();
    write_ppm(&d.join("a.ppm"), 32, 32, 2);

    // Neither or both rate targets.
    assert!(!run(d, &["encode", "--codebook", "cb.cgcb", "--input", "a.ppm", "--out", "x.cgic"]).status.success());
    assert!(!run(
        d,
        &["encode", "--codebook", "cb.cgcb", "--input", "a.ppm", "--out", "x.cgic", "--bpp", "0.1", "--ratios", "0,0,1"]
    )
    .status
    .success());
    assert!(!run(d, &["encode", "--codebook", "cb.cgcb", "--input", "a.ppm", "--out", "x.cgic", "--ratios", "0.5,0.6,0.1"])
        .status
        .success());
    assert!(!run(d, &["encode", "--codebook", "missing.cgcb", "--input", "a.ppm", "--out", "x.cgic", "--bpp", "0.1"])
        .status
        .success());

    ok(d, &["encode", "--codebook", "cb.cgcb", "--input", "a.ppm", "--out", "a.cgic", "--bpp", "0.1"]);
    ok(
        d,
        &["train-codebook", "--corpus", "corpus", "--k", "16", "--iters", "2", "--seed", "4", "--out", "cb2.cgcb"],
    );
    let wrong = run(d, &["decode", "--codebook", "cb2.cgcb", "--input", "a.cgic", "--out", "y.ppm"]);
    assert!(!wrong.status.success());
    assert!(!d.join("y.ppm").exists());

    let mut bytes = std::fs::read(d.join("a.cgic")).unwrap();
    bytes[10] ^= 0x40;
    std::fs::write(d.join("bad.cgic"), bytes).unwrap();
    assert!(!run(d, &["inspect", "--input", "bad.cgic"]).status.success());
    assert!(!run(d, &["decode", "--codebook", "cb.cgcb", "--input", "bad.cgic", "--out", "z.ppm"]).status.success());

    std::fs::create_dir(d.join("empty")).unwrap();
    assert!(!run(d, &["train-codebook", "--corpus", "empty", "--out", "e.cgcb"]).status.success());
    assert!(!run(d, &["train-codebook", "--corpus", "corpus", "--d", "3", "--out", "e.cgcb"]).status.success());
}

#[test]
fn training_is_reproducible() {
    let (tmp, cb) = setup();
    let d = tmp.path();
    ok(
        d,
        &["train-codebook", "--corpus", "corpus", "--k", "32", "--iters", "5", "--seed", "3", "--out", "again.cgcb"],
    );
    assert_eq!(std::fs::read(cb).unwrap(), std::fs::read(d.join("again.cgcb")).unwrap());
}

#[test]
fn help_lists_defaults() {
    let out = bin().args(["train-codebook", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[default: 1024]"));
    assert!(text.contains("[default: 200000]"));
}
