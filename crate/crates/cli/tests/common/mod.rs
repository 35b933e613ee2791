#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jpeg_encoder::{ColorType, Encoder, SamplingFactor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Spatial frequency band (cycles per pixel) of each texture class.
pub const BANDS: [(f64, f64); 3] = [(0.01, 0.04), (0.08, 0.12), (0.33, 0.45)];

/// RGB texture whose dominant frequency lies in `BANDS[class]`, with random
/// orientation, phase and colours.
pub fn texture(class: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let (lo, hi) = BANDS[class];
    let f = rng.gen_range(lo..hi);
    let theta = rng.gen_range(0.0..std::f64::consts::PI);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let (fx, fy) = (f * theta.cos(), f * theta.sin());
    let base: [f64; 3] = [rng.gen_range(80.0..170.0), rng.gen_range(80.0..170.0), rng.gen_range(80.0..170.0)];
    let gain: [f64; 3] = [rng.gen_range(30.0..70.0), rng.gen_range(30.0..70.0), rng.gen_range(30.0..70.0)];
    let mut out = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let s = (std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) + phase).sin();
            for c in 0..3 {
                let v = base[c] + gain[c] * s + rng.gen_range(-4.0..4.0);
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    out
}

/// Nearly flat image in one of three primary colours.
pub fn solid(class: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut rgb = [40.0, 40.0, 40.0];
    rgb[class % 3] = 220.0;
    (0..size * size).flat_map(|_| rgb.map(|v: f64| (v + rng.gen_range(-6.0..6.0)).round() as u8)).collect()
}

pub fn encode_jpeg(rgb: &[u8], size: usize, quality: u8) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut enc = Encoder::new(&mut buf, quality);
    enc.set_sampling_factor(SamplingFactor::R_4_2_0);
    enc.encode(rgb, size as u16, size as u16, ColorType::Rgb).expect("encode");
    buf
}

pub type Generator = fn(usize, usize, &mut ChaCha8Rng) -> Vec<u8>;

/// Writes `root/class{k}/img{i:03}.jpg` for 3 classes.
pub fn write_dataset(root: &Path, per_class: usize, size: usize, seed: u64, gen: Generator) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in 0..3 {
        let dir = root.join(format!("class{class}"));
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            let rgb = gen(class, size, &mut rng);
            std::fs::write(dir.join(format!("img{i:03}.jpg")), encode_jpeg(&rgb, size, 95)).unwrap();
        }
    }
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jpegclass"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn jpegclass")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
