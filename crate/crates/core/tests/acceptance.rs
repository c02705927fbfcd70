//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any hard criterion fails.
//!
//! cargo test --release --test acceptance            # everything
//! cargo test --release --test acceptance -- 3 5     # a subset by number
//!
//! Set `MESHGNN_ACCEPT_FULL_EPOCHS=1` to train the full 50-epoch budget in
//! criteria 6 and 7 instead of stopping once validation AUC reaches 1.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use meshgnn::features::{fpfh, FeatureConfig, FeatureMode};
use meshgnn::graph::{batch, build_graph, Sample};
use meshgnn::mesh::radius_neighbors;
use meshgnn::nn::checkpoint::Checkpoint;
use meshgnn::nn::{
    backward, cross_entropy, gcn_conv_forward, model_forward, spline_basis, ConvKind, ModelConfig,
    ModelParameters,
};
use meshgnn::pipeline::synthetic::{random_rotation, random_translation, sample_meshes};
use meshgnn::pipeline::{
    evaluate, gen_synthetic, roc_auc, train, DomainShift, Manifest, PoseMode, SyntheticConfig,
    TrainConfig,
};
use meshgnn::{Matrix, Mesh};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// 1. FPFH is invariant under rigid motions.
fn fpfh_rigid_invariance() -> Outcome {
    let t0 = Instant::now();
    let data = SyntheticConfig {
        pose: PoseMode::Random,
        ..SyntheticConfig::new(20, 1, 0.3, 101)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let mesh = &sample_meshes(&data, i, i % 2)[0];
        let reference = fpfh(mesh, 10.0, 100, 11);
        for _ in 0..10 {
            let moved = mesh.transformed(&random_rotation(&mut rng), random_translation(&mut rng, 50.0));
            worst = worst.max(fpfh(&moved, 10.0, 100, 11).max_abs_diff(&reference));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst < 1e-6 && secs < 30.0,
        format!("20 meshes x 10 poses, max |dFPFH| = {worst:.2e} (< 1e-6), {secs:.1} s (< 30 s)"),
    )
}

fn loss(params: &ModelParameters, config: &ModelConfig, b: &meshgnn::Batch) -> f64 {
    cross_entropy(&model_forward(params, config, b).unwrap(), &b.labels)
}

// 2. Analytic gradients match central differences.
fn gradient_check() -> Outcome {
    let t0 = Instant::now();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for kind in ConvKind::ALL {
        for dim in [1, 3, 33] {
            let features = common::features_of_dim(dim);
            let samples = common::small_samples(&mut rng, 4, 2, &features);
            let b = batch(&samples).unwrap();
            let mut config = ModelConfig::new(kind, dim, 2);
            config.hidden = 4;
            let mut params = ModelParameters::init(&config, &mut rng);
            for (_, t) in params.iter_mut() {
                t.data.iter_mut().for_each(|x| *x += rng.gen_range(-0.1..0.1));
            }
            let grads = backward(&params, &config, &b).unwrap();
            let names: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
            for name in names {
                let analytic = grads.get(&name).unwrap().data.clone();
                for (i, &a) in analytic.iter().enumerate() {
                    let orig = params.get(&name).unwrap().data[i];
                    params.get_mut(&name).unwrap().data[i] = orig + h;
                    let up = loss(&params, &config, &b);
                    params.get_mut(&name).unwrap().data[i] = orig - h;
                    let down = loss(&params, &config, &b);
                    params.get_mut(&name).unwrap().data[i] = orig;
                    let numeric = (up - down) / (2.0 * h);
                    let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                    worst = worst.max(rel);
                    checked += 1;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 120.0,
        format!("3 convs x dims {{1,3,33}}, {checked} parameters, max rel err {worst:.2e} (< 1e-4), {secs:.1} s (< 120 s)"),
    )
}

fn dense_gcn(x: &Matrix, edges: &[(usize, usize)], w: &Matrix, b: &[f64]) -> Matrix {
    let n = x.rows();
    let mut a = vec![vec![0.0; n]; n];
    for &(s, t) in edges {
        a[t][s] = 1.0;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let xw = x.matmul(w).unwrap();
    let mut out = Matrix::zeros(n, w.cols());
    for t in 0..n {
        for s in 0..n {
            let c = a[t][s] / (deg[t] * deg[s]).sqrt();
            for j in 0..w.cols() {
                out.row_mut(t)[j] += c * xw.row(s)[j];
            }
        }
        for j in 0..w.cols() {
            out.row_mut(t)[j] += b[j];
        }
    }
    out
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

// 3. Fast paths agree with brute-force oracles.
fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    let mut gcn_err = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let m = rng.gen_range(0..=3 * n);
        let edges: Vec<(usize, usize)> = (0..m).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        let (din, dout) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let x = random_matrix(&mut rng, n, din);
        let w = random_matrix(&mut rng, din, dout);
        let b: Vec<f64> = (0..dout).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = gcn_conv_forward(&x, &edges, &w, &b).unwrap();
        gcn_err = gcn_err.max(fast.max_abs_diff(&dense_gcn(&x, &edges, &w, &b)));
    }

    let mut auc_mismatches = 0;
    for trial in 0..100 {
        let n = rng.gen_range(2..=200);
        let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let levels = if trial % 2 == 0 { 5 } else { 1_000_000 };
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let (mut concordant, mut tied, mut pos, mut neg) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..n {
            if labels[i] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            for j in 0..n {
                if labels[i] == 1 && labels[j] == 0 {
                    if scores[i] > scores[j] {
                        concordant += 1;
                    } else if scores[i] == scores[j] {
                        tied += 1;
                    }
                }
            }
        }
        let oracle = (concordant as f64 + 0.5 * tied as f64) / (pos as f64 * neg as f64);
        if roc_auc(&scores, &labels).unwrap().auc != oracle {
            auc_mismatches += 1;
        }
    }

    let mut nb_mismatches = 0;
    for trial in 0..40 {
        let n = rng.gen_range(1..=300);
        let mut points: Vec<[f64; 3]> = (0..n)
            .map(|_| [0, 1, 2].map(|_| rng.gen_range(-20.0..20.0)))
            .collect();
        if n > 3 {
            points[1] = points[0];
        }
        let radius = rng.gen_range(2.0..15.0);
        let cap = if trial % 2 == 0 { 100 } else { rng.gen_range(1..=20) };
        let index = radius_neighbors(&points, radius, cap);
        for q in 0..n {
            let mut expected: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != q)
                .map(|j| {
                    let d = [0, 1, 2].map(|k| points[j][k] - points[q][k]);
                    ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(), j)
                })
                .filter(|&(d, _)| d <= radius)
                .collect();
            expected.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            expected.truncate(cap);
            let got: Vec<usize> = index.neighbors(q).iter().map(|nb| nb.index).collect();
            if got != expected.iter().map(|e| e.1).collect::<Vec<_>>() {
                nb_mismatches += 1;
            }
        }
    }

    outcome(
        gcn_err < 1e-10 && auc_mismatches == 0 && nb_mismatches == 0,
        format!(
            "gcn vs dense max |d| = {gcn_err:.1e} (< 1e-10, 100 graphs); auc vs pair count: {auc_mismatches}/100 differ; \
             radius neighbors vs all pairs: {nb_mismatches} lists differ"
        ),
    )
}

// 4. The spline basis is a partition of unity with single-index boundaries.
fn spline_partition_of_unity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let k = 5;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let u = [0, 1, 2].map(|_| rng.gen_range(0.0..=1.0));
        let sum: f64 = spline_basis(u, k, 1).unwrap().iter().map(|t| t.value).sum();
        worst = worst.max((sum - 1.0).abs());
    }
    let mut boundary_ok = true;
    for d in 0..3 {
        for (edge, knot) in [(0.0, 0), (1.0, k - 1)] {
            for _ in 0..100 {
                let mut u = [0, 1, 2].map(|_| rng.gen_range(0.0..=1.0));
                u[d] = edge;
                let stride = k.pow(d as u32);
                boundary_ok &= spline_basis(u, k, 1)
                    .unwrap()
                    .iter()
                    .all(|t| (t.index / stride) % k == knot);
            }
        }
    }
    let corners = spline_basis([0.0; 3], k, 1).unwrap();
    let far = spline_basis([1.0; 3], k, 1).unwrap();
    boundary_ok &= corners.len() == 1 && corners[0].index == 0 && corners[0].value == 1.0;
    boundary_ok &= far.len() == 1 && far[0].index == k * k * k - 1 && far[0].value == 1.0;
    outcome(
        worst < 1e-12 && boundary_ok,
        format!("10000 points, max |sum - 1| = {worst:.1e} (< 1e-12); boundaries single-index: {boundary_ok}"),
    )
}

/// `mesh` with vertex `i` moved to position `perm[i]`.
fn permuted(mesh: &Mesh, perm: &[usize]) -> Mesh {
    let mut verts = vec![[0.0; 3]; perm.len()];
    for (i, v) in mesh.vertices().iter().enumerate() {
        verts[perm[i]] = *v;
    }
    let faces = mesh.faces().iter().map(|f| f.map(|i| perm[i])).collect();
    Mesh::new(verts, faces).unwrap()
}

// 5. Logits do not depend on node order.
fn permutation_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for kind in ConvKind::ALL {
        for trial in 0..50 {
            let features = common::features_of_dim([1, 3, 33][trial % 3]);
            let samples = common::small_samples(&mut rng, 3, 2, &features);
            let mut config = ModelConfig::new(kind, features.dim(), 2);
            config.hidden = 8;
            let params = ModelParameters::init(&config, &mut rng);
            let reference = model_forward(&params, &config, &batch(&samples).unwrap()).unwrap();
            let shuffled: Vec<Sample> = samples
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    for g in &mut s.graphs {
                        let mut perm: Vec<usize> = (0..g.node_count()).collect();
                        perm.shuffle(&mut rng);
                        *g = build_graph(&permuted(&g.mesh, &perm), &features, g.structure_id);
                    }
                    s
                })
                .collect();
            let logits = model_forward(&params, &config, &batch(&shuffled).unwrap()).unwrap();
            worst = worst.max(logits.max_abs_diff(&reference));
        }
    }
    outcome(worst < 1e-9, format!("3 convs x 50 trials, max |d logit| = {worst:.1e} (< 1e-9)"))
}

fn full_epochs() -> bool {
    std::env::var_os("MESHGNN_ACCEPT_FULL_EPOCHS").is_some_and(|v| v != "0")
}

fn train_config(mode: FeatureMode, aug: f64, seed: u64) -> TrainConfig {
    let mut c = TrainConfig::new(ConvKind::Spline, FeatureConfig::new(mode), 4);
    c.aug_offset = aug;
    c.seed = seed;
    c.stop_at_perfect_val = !full_epochs();
    c
}

/// Train on `manifest`, then evaluate on the test split, optionally read
/// from another dataset that holds the same sample ids.
fn train_and_test(config: &TrainConfig, manifest: &Path, out: &Path, cache: &Path, test_from: Option<&Path>) -> (f64, usize, usize) {
    let (ckpt_path, outcome) = train(config, manifest, out, Some(cache)).unwrap();
    let mut test = Manifest::load(out.join("split_test.csv")).unwrap();
    if let Some(other) = test_from {
        let ids: Vec<String> = test.rows.iter().map(|r| r.sample_id.clone()).collect();
        test = Manifest::load(other).unwrap().select_ids(&ids);
        assert_eq!(test.len(), ids.len());
    }
    let ckpt = Checkpoint::load(ckpt_path).unwrap();
    let metrics = evaluate(&ckpt, &test, Some(cache)).unwrap();
    (metrics.auc().unwrap(), outcome.epochs.len(), outcome.best_epoch())
}

// 6. End-to-end learning on the aligned synthetic set.
fn end_to_end(work: &Path) -> Outcome {
    let t0 = Instant::now();
    let manifest = gen_synthetic(&SyntheticConfig::new(600, 4, 0.3, 6), work.join("aligned")).unwrap();
    let config = train_config(FeatureMode::Fpfh, 0.1, 6);
    let (auc, epochs, best) = train_and_test(&config, &manifest, &work.join("run6"), &work.join("cache"), None);
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        auc >= 0.90 && epochs <= 50 && secs <= 600.0,
        format!(
            "600 samples, spline + fpfh, aug 0.1: test AUC {auc:.4} (>= 0.90), {epochs} epochs run, best epoch {best}, \
             {secs:.0} s end to end (<= 600 s)"
        ),
    )
}

// 7. FPFH holds up under random poses and a shifted test domain; positions do not.
fn pose_robustness(work: &Path) -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let random = SyntheticConfig {
        pose: PoseMode::Random,
        ..SyntheticConfig::new(600, 4, 0.3, 7)
    };
    let manifest = gen_synthetic(&random, work.join("random")).unwrap();
    let shifted = gen_synthetic(
        &SyntheticConfig {
            shift: DomainShift::Translate,
            ..random
        },
        work.join("shifted"),
    )
    .unwrap();
    let cache = work.join("cache");
    let run = |mode, aug, name: &str| {
        train_and_test(&train_config(mode, aug, 7), &manifest, &work.join(name), &cache, Some(&shifted))
    };
    let (fpfh_auc, e1, _) = run(FeatureMode::Fpfh, 0.1, "run7_fpfh");
    let (pos_auc, e2, _) = run(FeatureMode::Positional, 0.1, "run7_pos");
    let (noaug_auc, e3, _) = run(FeatureMode::Fpfh, 0.0, "run7_fpfh_noaug");
    let secs = t0.elapsed().as_secs_f64();
    let gap = fpfh_auc - pos_auc;
    let diff = fpfh_auc - noaug_auc;
    (
        outcome(
            gap >= 0.15,
            format!(
                "shifted-domain test AUC fpfh {fpfh_auc:.4} vs positional {pos_auc:.4}, gap {gap:.4} (>= 0.15); \
                 epochs {e1}/{e2}; {secs:.0} s"
            ),
        ),
        outcome(
            diff >= -0.02,
            format!("fpfh shifted AUC aug 0.1 {fpfh_auc:.4} vs aug 0 {noaug_auc:.4}, change {diff:+.4} (soft >= -0.02); epochs {e3}"),
        ),
    )
}

fn meshgnn(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_meshgnn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "meshgnn {args:?} failed");
}

fn read(path: PathBuf) -> Vec<u8> {
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// 8. Identical train invocations give identical bytes.
fn determinism(work: &Path) -> Outcome {
    let data = work.join("det");
    let data_s = data.to_str().unwrap();
    meshgnn(&["gen-synthetic", "--out", data_s, "--samples", "40", "--structures", "2", "--seed", "8"]);
    let manifest = data.join("manifest.csv");
    let mut same = true;
    let mut compared = Vec::new();
    let runs: Vec<PathBuf> = ["a", "b"].iter().map(|r| work.join(format!("det_{r}"))).collect();
    for out in &runs {
        meshgnn(&[
            "train", "--manifest", manifest.to_str().unwrap(), "--structures", "2", "--conv", "spline",
            "--features", "fpfh", "--aug", "0.1", "--seed", "7", "--epochs", "3", "--batch", "8",
            "--out", out.to_str().unwrap(),
        ]);
    }
    for file in ["epochs.csv", "checkpoint.txt", "split_train.csv", "split_val.csv", "split_test.csv"] {
        let equal = read(runs[0].join(file)) == read(runs[1].join(file));
        same &= equal;
        compared.push(format!("{file} {}", if equal { "identical" } else { "DIFFERENT" }));
    }
    outcome(same, format!("two CLI train runs: {}", compared.join(", ")))
}

// 9. gcn and graphconv ignore edge attributes.
fn edge_attribute_independence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut identical = true;
    let mut trials = 0;
    for kind in [ConvKind::Gcn, ConvKind::GraphConv] {
        for trial in 0..20 {
            let features = common::features_of_dim([1, 3, 33][trial % 3]);
            let samples = common::small_samples(&mut rng, 3, 2, &features);
            let config = ModelConfig::new(kind, features.dim(), 2);
            let params = ModelParameters::init(&config, &mut rng);
            let mut b = batch(&samples).unwrap();
            let before = model_forward(&params, &config, &b).unwrap();
            for u in &mut b.structures {
                u.edge_attrs.as_mut_slice().iter_mut().for_each(|a| *a = rng.gen_range(0.0..=1.0));
            }
            let after = model_forward(&params, &config, &b).unwrap();
            identical &= before
                .as_slice()
                .iter()
                .zip(after.as_slice())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            trials += 1;
        }
    }
    outcome(identical, format!("{trials} trials with randomized edge attributes, logits bit-identical: {identical}"))
}

fn main() {
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| selected.is_empty() || selected.iter().any(|s| s == id || id.starts_with(s.as_str()));
    let work = tempfile::tempdir().unwrap();
    println!("acceptance suite (work dir {})", work.path().display());

    let mut results: Vec<(&str, &str, bool, Outcome)> = Vec::new();
    let mut record = |id: &'static str, name: &'static str, soft: bool, o: Outcome| {
        println!("{} {id:<3} {name}: {}", if o.pass { "PASS" } else if soft { "WARN" } else { "FAIL" }, o.detail);
        results.push((id, name, soft, o));
    };
    if wanted("1") {
        record("1", "fpfh rigid invariance", false, fpfh_rigid_invariance());
    }
    if wanted("2") {
        record("2", "gradient correctness", false, gradient_check());
    }
    if wanted("3") {
        record("3", "oracle equivalence", false, oracle_equivalence());
    }
    if wanted("4") {
        record("4", "spline partition of unity", false, spline_partition_of_unity());
    }
    if wanted("5") {
        record("5", "permutation invariance", false, permutation_invariance());
    }
    if wanted("6") {
        record("6", "end-to-end learning", false, end_to_end(work.path()));
    }
    if wanted("7") {
        let (main, soft) = pose_robustness(work.path());
        record("7", "pose robustness contrast", false, main);
        record("7b", "augmentation does not hurt (soft)", true, soft);
    }
    if wanted("8") {
        record("8", "determinism", false, determinism(work.path()));
    }
    if wanted("9") {
        record("9", "edge-attribute independence", false, edge_attribute_independence());
    }

    let failed: Vec<&str> = results.iter().filter(|r| !r.2 && !r.3.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} criteria run, {} failed{}",
        results.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
