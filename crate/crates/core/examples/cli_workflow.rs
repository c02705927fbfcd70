//! The command-line workflow driven in-process: generate, extract, train,
//! evaluate and predict.
//!
//! cargo run --release --example cli_workflow

use meshgnn::cli::run;
use meshgnn::pipeline::Manifest;

fn step(args: &[&str]) {
    println!("$ meshgnn {}", args.join(" "));
    let code = run(std::iter::once("meshgnn").chain(args.iter().copied()));
    assert_eq!(code, 0, "exit code {code}");
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let (data, cache, run_dir) = (p("data"), p("cache"), p("run"));
    let manifest = format!("{data}/manifest.csv");

    step(&["gen-synthetic", "--out", &data, "--samples", "40", "--structures", "2", "--seed", "5"]);
    step(&["extract-features", "--manifest", &manifest, "--cache-dir", &cache]);
    step(&[
        "train", "--manifest", &manifest, "--structures", "2", "--epochs", "5", "--batch", "16",
        "--aug", "0.1", "--out", &run_dir, "--cache-dir", &cache,
    ]);
    step(&["evaluate", "--checkpoint", &run_dir, "--manifest", &format!("{run_dir}/split_test.csv"), "--cache-dir", &cache]);

    let sample = &Manifest::load(&manifest).unwrap().rows[0];
    let meshes: Vec<String> = sample.meshes.iter().map(|m| m.display().to_string()).collect();
    let mut args = vec!["predict", "--checkpoint", &run_dir];
    args.extend(meshes.iter().map(String::as_str));
    step(&args);
}
