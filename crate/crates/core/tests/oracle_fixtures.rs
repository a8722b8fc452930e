//! Regenerates oracle-derived fixtures. Run with `--ignored` only when the
//! fixture definition itself changes; the acceptance suite reads the files.

mod common;

use common::{noise_plane, oracle_pmd_step, sample_std, to_rows};
use serde_json::json;

pub const NOISE_SEED: u64 = 0x5eed_0003;

#[test]
#[ignore]
fn regenerate_pmd_noise_oracle() {
    let (w, h, mean, sigma) = (64, 64, 128.0, 10.0);
    let input = noise_plane(w, h, mean, sigma, NOISE_SEED);
    let mut rows = to_rows(&input);
    for _ in 0..20 {
        rows = oracle_pmd_step(&rows, 20.0, 0.25);
    }
    let std_in = input.std_dev();
    let std_out = sample_std(rows.iter().flatten().copied());
    let reduction = 1.0 - std_out / std_in;
    let doc = json!({
        "width": w,
        "height": h,
        "mean": mean,
        "sigma": sigma,
        "seed": NOISE_SEED,
        "iterations": 20,
        "kappa": 20.0,
        "lambda": 0.25,
        "std_in": std_in,
        "std_out": std_out,
        "std_reduction": reduction,
    });
    let path = common::fixtures_dir().join("pmd_noise_oracle.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
    println!("{doc}");
}
