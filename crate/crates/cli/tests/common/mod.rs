#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fgvd_core::corpus::{save_corpus, Corpus, CorpusManifest, CorpusRecord, Split};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fgvd-eval"))
}

pub fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("FGVD_EVAL_THREADS", t),
        None => cmd.env_remove("FGVD_EVAL_THREADS"),
    };
    cmd.output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn record(id: &str, label: &str, split: Split, text: &str, vector: Option<Vec<f32>>) -> CorpusRecord {
    CorpusRecord { id: id.into(), label: label.into(), split, text: text.into(), vector, source_image: None }
}

pub fn write_corpus(path: &Path, name: &str, dim: usize, records: Vec<CorpusRecord>) -> PathBuf {
    let manifest = CorpusManifest::describe(name, dim, &records);
    save_corpus(path, &Corpus { manifest, records }).unwrap();
    path.to_path_buf()
}

/// Gaussian clusters: `classes` centres spaced far apart, `per_class` support
/// and `tests` test items per class, noise `sigma`.
pub fn clustered(
    classes: usize,
    per_class: usize,
    tests: usize,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut out = Vec::new();
    for c in 0..classes {
        let centre: Vec<f64> = (0..dim).map(|d| if d % classes == c { 10.0 } else { 0.0 }).collect();
        for i in 0..per_class + tests {
            let v = centre.iter().map(|x| (x + noise.sample(&mut rng)) as f32).collect();
            let (split, tag) = if i < per_class { (Split::Support, "s") } else { (Split::Test, "t") };
            out.push(record(&format!("c{c:02}-{tag}{i:03}"), &format!("class{c:02}"), split, "", Some(v)));
        }
    }
    out
}

pub fn write_png(path: &Path, width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) {
    let img = image::RgbImage::from_fn(width, height, |x, y| image::Rgb(f(x, y)));
    img.save(path).unwrap();
}
