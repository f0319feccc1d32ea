//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jasdm::config::ConfigFile;
use jasdm_core::noise::NoiseBundle;
use jasdm_core::ModelSpec;
use statrs::distribution::{ContinuousCDF, Normal};

/// Upper 1e-3 quantile of the Kolmogorov distribution (scipy
/// `kstwobign.isf(1e-3)`); divide by `sqrt(n)` for the critical distance.
pub const KS_CRITICAL_1E3: f64 = 1.949_474_603_504_375;

/// Kolmogorov-Smirnov distance to the standard normal.
pub fn ks_statistic(mut samples: Vec<f64>) -> f64 {
    let normal = Normal::standard();
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `dW / sqrt(h)` over the fine grids of successive benchmark paths.
pub fn normalized_increments(count: usize, seed: u64) -> Vec<f64> {
    let model = ModelSpec::benchmark(0.5, 1.0).unwrap();
    let mut out = Vec::with_capacity(count);
    let mut path = 0;
    while out.len() < count {
        let bundle = NoiseBundle::generate(&model, 64, seed, path).unwrap();
        let nodes = bundle.fine_grid().forward_nodes();
        for (w, dw) in nodes.windows(2).zip(bundle.wiener_fine()) {
            out.push(dw / (w[1] - w[0]).sqrt());
        }
        path += 1;
    }
    out.truncate(count);
    out
}

/// Writes the benchmark model file into `dir`.
pub fn benchmark_config(dir: &Path, alpha: f64, gamma: f64, exponent: u32) -> PathBuf {
    let path = dir.join(format!("model_{alpha}_{gamma}.toml"));
    std::fs::write(
        &path,
        ConfigFile::benchmark(alpha, gamma, exponent).to_toml(),
    )
    .unwrap();
    path
}

pub fn jasdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jasdm"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Files in `dir` whose name ends in `.csv`, sorted.
pub fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
}

pub fn same_bytes(a: &Path, b: &Path) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}
