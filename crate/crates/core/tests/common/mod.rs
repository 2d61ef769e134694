#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tilegraft::image::{save_image, BitDepth};
use tilegraft::rng::XorShift64Star;
use tilegraft::{ColorSpace, ImageF};

pub const BIN: &str = env!("CARGO_BIN_EXE_tilegraft");
pub const ECHO: &str = env!("CARGO_BIN_EXE_tilegraft-echo");

/// Gray noise on the 8-bit grid `k/255`, which survives an 8-bit PNG
/// roundtrip exactly.
pub fn gray_noise(w: usize, h: usize, seed: u64) -> ImageF {
    let mut rng = XorShift64Star::new(seed);
    ImageF::from_fn(w, h, ColorSpace::Gray, |_, _, _| {
        rng.below(256) as f64 / 255.0
    })
    .unwrap()
}

/// Gray noise on the grid `k/256`: every sample is exact in f32, so it
/// crosses the subprocess wire format unchanged.
pub fn gray_dyadic(w: usize, h: usize, seed: u64) -> ImageF {
    let mut rng = XorShift64Star::new(seed);
    ImageF::from_fn(w, h, ColorSpace::Gray, |_, _, _| {
        rng.below(256) as f64 / 256.0
    })
    .unwrap()
}

pub fn rgb_noise(w: usize, h: usize, seed: u64) -> ImageF {
    let mut rng = XorShift64Star::new(seed);
    ImageF::from_fn(w, h, ColorSpace::Srgb, |_, _, _| {
        rng.below(256) as f64 / 255.0
    })
    .unwrap()
}

pub fn write_png(dir: &Path, name: &str, img: &ImageF) -> PathBuf {
    let p = dir.join(name);
    save_image(img, &p, BitDepth::Eight).unwrap();
    p
}

pub fn tilegraft(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("spawn tilegraft")
}

pub fn tilegraft_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn tilegraft")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Shell-quoted echo child command with extra arguments.
pub fn echo_cmd(extra: &str) -> String {
    format!("'{ECHO}' {extra}")
}
