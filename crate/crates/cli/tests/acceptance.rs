//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use clbt_core::align::{detokenize, parse_pharaoh, resolve_one_to_one, AlignmentLinkSet, ContextualPair, WordPieceVocab};
use clbt_core::embed::{
    read_embeddings_from, read_transform_from, write_embeddings_to, write_transform_to, EmbeddingFormat,
    EmbeddingMatrix,
};
use clbt_core::eval::{ablate, evaluate, generate_synthetic, Planted, PrefixMode, SynthSpec, SyntheticData};
use clbt_core::fit::{fit_gd, fit_lsq, fit_procrustes, objective, FitConfig, FitMethod, Moments, TransformMatrix};
use clbt_core::linalg::{dot, gaussian_matrix, norm, random_orthogonal, Matrix};
use clbt_core::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn synth(n_train: usize, n_test: usize, d: usize, sigma: f64, seed: u64) -> SyntheticData {
    generate_synthetic(&SynthSpec {
        n_train,
        n_test,
        d,
        noise_sigma: sigma,
        seed,
        planted: Planted::Orthogonal,
    })
    .expect("valid spec")
}

fn ac1_procrustes_optimality() -> Outcome {
    const CHALLENGERS: u64 = 1000;
    let sigmas = [0.0, 0.01, 0.05];
    let mut instances = Vec::new();
    for (i, &s) in sigmas.iter().enumerate() {
        instances.push((256, s, 1000 + i as u64));
    }
    for i in 0..24 {
        instances.push((64, sigmas[i % 3], 2000 + i as u64));
    }
    for i in 0..23 {
        instances.push((8, sigmas[i % 3], 3000 + i as u64));
    }
    let mut worst_defect = 0.0f64;
    let mut worst_gap = f64::INFINITY;
    let mut worst_path_diff = 0.0f64;
    for &(d, sigma, seed) in &instances {
        let data = synth(20 * d, 0, d, sigma, seed);
        let w = match fit_procrustes(&data.train) {
            Ok(w) => w,
            Err(e) => return Outcome::new(false, format!("d={d} seed={seed}: {e}")),
        };
        worst_defect = worst_defect.max(w.matrix().orthogonality_defect());
        let best = objective(&w, &data.train).unwrap();
        let m = Moments::from_pairs(&data.train);
        for c in 0..CHALLENGERS {
            let q = random_orthogonal(d, seed * 10_000 + c).unwrap();
            let challenger = m.objective_orthogonal(&q).unwrap();
            if c < 2 {
                let direct = objective(&q, &data.train).unwrap();
                worst_path_diff = worst_path_diff.max((direct - challenger).abs());
            }
            worst_gap = worst_gap.min(challenger + 1e-9 - best);
        }
    }
    Outcome::new(
        worst_defect <= 1e-6 && worst_gap >= 0.0 && worst_path_diff <= 1e-9,
        format!(
            "{} instances x {CHALLENGERS} challengers; max ‖WᵀW−I‖ {worst_defect:.2e}; min challenger margin {worst_gap:.3e}; Gram vs direct objective {worst_path_diff:.1e}",
            instances.len()
        ),
    )
}

fn ac2_exact_recovery() -> Outcome {
    let mut worst = 0.0f64;
    let cases = [(8, 8), (8, 160), (64, 64), (64, 1280), (256, 256), (256, 5120)];
    for (i, &(d, n)) in cases.iter().enumerate() {
        let data = synth(n, 0, d, 0.0, 50 + i as u64);
        let w = fit_procrustes(&data.train).unwrap();
        worst = worst.max(w.matrix().sub(&data.planted).unwrap().frobenius_norm());
    }
    Outcome::new(worst <= 1e-6, format!("{} (d, n) cases with n ≥ d; max ‖Ŵ−R‖ {worst:.2e}", cases.len()))
}

fn ac3_gd_matches_lsq() -> Outcome {
    let cfg = FitConfig {
        method: FitMethod::Gd,
        ..Default::default()
    };
    let mut worst_ratio = 0.0f64;
    let mut max_epochs = 0;
    for seed in 0..20 {
        let data = synth(2000, 0, 32, 0.05, 400 + seed);
        let (w, trace) = match fit_gd(&data.train, &cfg) {
            Ok(r) => r,
            Err(e) => return Outcome::new(false, format!("seed {seed}: {e}")),
        };
        let lsq = fit_lsq(&data.train).unwrap().transform.objective();
        worst_ratio = worst_ratio.max(w.objective() / lsq);
        max_epochs = max_epochs.max(trace.epochs());
    }
    Outcome::new(
        worst_ratio <= 1.01 && max_epochs <= 5000,
        format!("20 instances; worst gd/lsq objective ratio {worst_ratio:.6}; max epochs {max_epochs}"),
    )
}

/// Spec invariant, reported separately from the numbered criteria.
fn gd_trace_monotone_after_warmup() -> Outcome {
    let cfg = FitConfig {
        method: FitMethod::Gd,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    let mut violations = 0;
    for seed in 0..20 {
        let data = synth(2000, 0, 32, 0.05, 400 + seed);
        let (_, trace) = fit_gd(&data.train, &cfg).unwrap();
        for w in trace.objectives[100..].windows(2) {
            if w[1] > w[0] {
                violations += 1;
                worst = worst.max((w[1] - w[0]) / w[0]);
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!("{violations} epoch-to-epoch increases after epoch 100 over 20 runs; largest relative increase {worst:.2e}"),
    )
}

fn ac4_retrieval() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in [11, 12, 13] {
        let data = synth(5000, 1000, 64, 0.01, seed);
        let test = data.test.unwrap();
        let w = fit_procrustes(&data.train).unwrap();
        let fitted = evaluate(&w, &test, &[1]).unwrap().precision(1).unwrap();
        let unfitted = evaluate(&Matrix::identity(64), &test, &[1]).unwrap().precision(1).unwrap();
        pass &= fitted >= 0.99 && fitted > unfitted;
        lines.push(format!("seed {seed}: P@1 {fitted:.4} fitted vs {unfitted:.4} identity"));
    }
    Outcome::new(pass, lines.join("; "))
}

fn ac5_data_size_curve() -> Outcome {
    let counts = [100, 1000, 5000, 10000];
    let cfg = FitConfig::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for seed in [21, 22, 23] {
        let clean = synth(10000, 1000, 64, 0.0, seed);
        let rep = ablate(&clean.train, &counts, &cfg, clean.test.as_ref().unwrap(), &[1], PrefixMode::InOrder).unwrap();
        let p1: Vec<f64> = rep.rows.iter().map(|r| r.report.precision(1).unwrap()).collect();
        pass &= p1.iter().all(|&p| p == 1.0);

        let noisy = synth(10000, 1000, 64, 0.05, seed + 100);
        let rep = ablate(&noisy.train, &counts, &cfg, noisy.test.as_ref().unwrap(), &[1], PrefixMode::InOrder).unwrap();
        let at = |c: usize| rep.rows.iter().find(|r| r.pair_count == c).unwrap().test_objective;
        let ratio = at(5000) / at(100);
        pass &= ratio <= 1.10;
        notes.push(format!("seed {seed}: clean P@1 {p1:?}, noisy obj(5000)/obj(100) {ratio:.4}"));
    }
    Outcome::new(pass, notes.join("; "))
}

fn ac6_resolution_fixtures() -> Outcome {
    type Fixture = (&'static [(usize, usize)], &'static [(usize, usize)]);
    let fixtures: [Fixture; 10] = [
        (&[(0, 0), (1, 1)], &[(0, 0), (1, 1)]),
        (&[(0, 0), (0, 1), (1, 1), (2, 1)], &[(0, 0), (1, 1)]),
        (&[(3, 0), (0, 2)], &[(0, 2), (3, 0)]),
        (&[], &[]),
        (&[(0, 2), (0, 1), (0, 0)], &[(0, 0)]),
        (&[(2, 0), (1, 0), (0, 0)], &[(0, 0)]),
        (&[(0, 1), (1, 0)], &[(0, 1), (1, 0)]),
        (&[(0, 1), (0, 2), (1, 1), (1, 2)], &[(0, 1)]),
        (&[(1, 3), (2, 3), (2, 0), (4, 4)], &[(1, 3), (2, 0), (4, 4)]),
        (&[(0, 0), (1, 0), (1, 1), (2, 2), (3, 2), (3, 3)], &[(0, 0), (2, 2)]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    for (i, (links, expected)) in fixtures.iter().enumerate() {
        let expected: Vec<ContextualPair> = expected
            .iter()
            .map(|&(t, s)| ContextualPair {
                sentence_index: 0,
                target_index: t,
                source_index: s,
            })
            .collect();
        for round in 0..5 {
            let mut shuffled = links.to_vec();
            shuffled.shuffle(&mut rng);
            let line: Vec<String> = shuffled.iter().map(|(t, s)| format!("{t}-{s}")).collect();
            let parsed = parse_pharaoh(format!("{}\n", line.join(" ")).as_bytes()).unwrap();
            let got = resolve_one_to_one(&parsed[0], 5, 5).unwrap();
            let sources: std::collections::HashSet<_> = got.iter().map(|p| p.source_index).collect();
            if got != expected || sources.len() != got.len() {
                failures.push(format!("fixture {i} round {round}: {got:?}"));
            }
        }
    }
    let direct = resolve_one_to_one(&AlignmentLinkSet::new(0, [(0, 0), (0, 1), (1, 1), (2, 1)]), 3, 2).unwrap();
    if direct.iter().map(|p| (p.target_index, p.source_index)).collect::<Vec<_>>() != [(0, 0), (1, 1)] {
        failures.push("worked example".into());
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            "10 fixtures x 5 shuffled orders resolve exactly and one-to-one".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn ac7_tokenizer_fixtures() -> Outcome {
    let v1 = WordPieceVocab::new(
        [
            "[UNK]", "can", "##al", "el", "the", "chan", "##nel", "un", "##aff", "##able", "##s", "a", "##b", "##c",
            "##bc", "play", "##ing", "##ed", "house", "##hold", "x",
        ],
        "[UNK]",
    )
    .unwrap();
    let v2 = WordPieceVocab::new(["[UNK]", "can", "##al", "canal"], "[UNK]").unwrap();
    let cases: [(&WordPieceVocab, &str, &[&str]); 20] = [
        (&v1, "canal", &["can", "##al"]),
        (&v2, "canal", &["canal"]),
        (&v1, "el", &["el"]),
        (&v1, "channel", &["chan", "##nel"]),
        (&v1, "unaffable", &["un", "##aff", "##able"]),
        (&v1, "plays", &["play", "##s"]),
        (&v1, "playing", &["play", "##ing"]),
        (&v1, "played", &["play", "##ed"]),
        (&v1, "household", &["house", "##hold"]),
        (&v1, "houses", &["house", "##s"]),
        (&v1, "abc", &["a", "##bc"]),
        (&v1, "ab", &["a", "##b"]),
        (&v1, "ac", &["a", "##c"]),
        (&v1, "abcs", &["a", "##bc", "##s"]),
        (&v1, "zzz", &["[UNK]"]),
        (&v1, "playz", &["[UNK]"]),
        (&v1, "canals", &["can", "##al", "##s"]),
        (&v1, "x", &["x"]),
        (&v1, "the", &["the"]),
        (&v1, "unhouse", &["[UNK]"]),
    ];
    let mut failures = Vec::new();
    for (vocab, word, expected) in cases {
        let got = vocab.tokenize(word).unwrap();
        if got != expected {
            failures.push(format!("{word}: {got:?}"));
        } else if got != [vocab.unk()] && detokenize(&got) != word {
            failures.push(format!("{word}: round trip gave {}", detokenize(&got)));
        }
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            "20 segmentations match; round trips exact except unknown fallback".to_string()
        } else {
            failures.join("; ")
        },
    )
}

fn ac8_format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let raw = gaussian_matrix(50, 12, &mut rng);
    let narrowed: Vec<f64> = raw.as_slice().iter().map(|&v| f64::from(v as f32)).collect();
    let m = Matrix::from_vec(50, 12, narrowed).unwrap();
    let emb = EmbeddingMatrix::new((0..50).map(|i| format!("{}:{}", i / 7, i % 7)).collect(), m).unwrap();
    let mut failures = Vec::new();

    let mut bytes = Vec::new();
    write_embeddings_to(&mut bytes, &emb, EmbeddingFormat::Binary).unwrap();
    let back = read_embeddings_from(&bytes, EmbeddingFormat::Binary).unwrap();
    let same_bits = back
        .vectors()
        .as_slice()
        .iter()
        .zip(emb.vectors().as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let mut again = Vec::new();
    write_embeddings_to(&mut again, &back, EmbeddingFormat::Binary).unwrap();
    if !same_bits || back.keys() != emb.keys() || again != bytes {
        failures.push("CLBE binary round trip".to_string());
    }

    let q = random_orthogonal(16, 3).unwrap();
    let t = TransformMatrix::new(q, FitMethod::Svd, true, 0.125, 99).unwrap();
    let mut tbytes = Vec::new();
    write_transform_to(&mut tbytes, &t).unwrap();
    let tb = read_transform_from(&tbytes).unwrap();
    let exact = tb
        .matrix()
        .as_slice()
        .iter()
        .zip(t.matrix().as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    if !exact || tb != t {
        failures.push("transform round trip".to_string());
    }

    let is_format = |r: Result<(), Error>| matches!(r, Err(Error::Format { .. }));
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    let mut t_bad_magic = tbytes.clone();
    t_bad_magic[1] ^= 0xff;
    let mut corrupt_cases = 0;
    for cut in [0, 3, 10, 20, bytes.len() / 2, bytes.len() - 1] {
        corrupt_cases += 1;
        if !is_format(read_embeddings_from(&bytes[..cut], EmbeddingFormat::Binary).map(|_| ())) {
            failures.push(format!("truncated CLBE at {cut} bytes"));
        }
    }
    for cut in [0, 5, 31, tbytes.len() - 1] {
        corrupt_cases += 1;
        if !is_format(read_transform_from(&tbytes[..cut]).map(|_| ())) {
            failures.push(format!("truncated CLBT at {cut} bytes"));
        }
    }
    corrupt_cases += 2;
    if !is_format(read_embeddings_from(&bad_magic, EmbeddingFormat::Binary).map(|_| ())) {
        failures.push("CLBE bad magic".into());
    }
    if !is_format(read_transform_from(&t_bad_magic).map(|_| ())) {
        failures.push("CLBT bad magic".into());
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("CLBE and CLBT round trips bit-exact; {corrupt_cases} corrupted inputs rejected with format errors")
        } else {
            failures.join("; ")
        },
    )
}

fn ac9_geometry() -> Outcome {
    let data = synth(2000, 0, 64, 0.05, 9);
    let w = fit_procrustes(&data.train).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let us = gaussian_matrix(10_000, 64, &mut rng);
    let vs = gaussian_matrix(10_000, 64, &mut rng);
    let wu = us.matmul_t(w.matrix()).unwrap();
    let wv = vs.matmul_t(w.matrix()).unwrap();
    let cos = |a: &[f64], b: &[f64]| dot(a, b) / (norm(a) * norm(b));
    let mut worst_cos = 0.0f64;
    let mut worst_norm = 0.0f64;
    for i in 0..10_000 {
        worst_cos = worst_cos.max((cos(wu.row(i), wv.row(i)) - cos(us.row(i), vs.row(i))).abs());
        worst_norm = worst_norm.max((norm(wu.row(i)) / norm(us.row(i)) - 1.0).abs());
        worst_norm = worst_norm.max((norm(wv.row(i)) / norm(vs.row(i)) - 1.0).abs());
    }
    Outcome::new(
        worst_cos <= 1e-8 && worst_norm <= 1e-6,
        format!("10000 pairs; max cosine change {worst_cos:.2e}; max relative norm change {worst_norm:.2e}"),
    )
}

/// Runs synth → fit → apply → eval in `dir` and returns every artifact.
fn cli_chain(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let bin = env!("CARGO_BIN_EXE_clbt");
    let steps: [&[&str]; 4] = [
        &["synth", "--n", "2000", "--n-test", "300", "--d", "16", "--noise", "0.05", "--out-dir", "data"],
        &[
            "fit", "--method", "gd", "--batch-size", "128", "--epochs", "200", "--pairs-x", "data/train_x.clbe",
            "--pairs-y", "data/train_y.clbe", "--out", "W.clbt",
        ],
        &["apply", "--transform", "W.clbt", "--in", "data/test_x.clbe", "--out", "mapped.clbe"],
        &["eval", "--pairs-x", "mapped.clbe", "--pairs-y", "data/test_y.clbe", "--out", "report.json"],
    ];
    for (i, args) in steps.iter().enumerate() {
        let out = Command::new(bin)
            .args(*args)
            .args(["--seed", "7", "--summary", &format!("summary{i}.json")])
            .current_dir(dir)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(files)
}

fn ac10_cli_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (fa, fb) = match (cli_chain(a.path()), cli_chain(b.path())) {
        (Ok(x), Ok(y)) => (x, y),
        (Err(e), _) | (_, Err(e)) => return Outcome::new(false, e),
    };
    if fa.keys().ne(fb.keys()) {
        return Outcome::new(false, "runs produced different file sets");
    }
    let mut mismatched = Vec::new();
    let mut binaries = 0;
    let mut reports = 0;
    for (name, bytes) in &fa {
        let other = &fb[name];
        if name.ends_with(".json") {
            reports += 1;
            let mut x: serde_json::Value = serde_json::from_slice(bytes).unwrap();
            let mut y: serde_json::Value = serde_json::from_slice(other).unwrap();
            for v in [&mut x, &mut y] {
                if let Some(o) = v.as_object_mut() {
                    o.remove("wall_time_secs");
                }
            }
            if x != y {
                mismatched.push(name.clone());
            }
        } else {
            binaries += 1;
            if bytes != other {
                mismatched.push(name.clone());
            }
        }
    }
    let report: serde_json::Value = serde_json::from_slice(&fa["report.json"]).unwrap();
    let p1 = report["precision_at_k"]["1"].as_f64().unwrap_or(0.0);
    Outcome::new(
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{binaries} binary artifacts byte-identical, {reports} JSON files identical; P@1 {p1:.4}")
        } else {
            format!("differing: {mismatched:?}")
        },
    )
}

fn main() {
    type Check = (&'static str, &'static str, Duration, fn() -> Outcome);
    let checks: [Check; 10] = [
        ("AC1", "procrustes optimality", Duration::from_secs(60), ac1_procrustes_optimality),
        ("AC2", "exact recovery", Duration::from_secs(10), ac2_exact_recovery),
        ("AC3", "gd matches least squares", Duration::from_secs(300), ac3_gd_matches_lsq),
        ("AC4", "retrieval oracle", Duration::from_secs(30), ac4_retrieval),
        ("AC5", "data-size curve", Duration::from_secs(120), ac5_data_size_curve),
        ("AC6", "alignment resolution fixtures", Duration::MAX, ac6_resolution_fixtures),
        ("AC7", "tokenizer fixtures", Duration::MAX, ac7_tokenizer_fixtures),
        ("AC8", "format round trips", Duration::MAX, ac8_format_round_trips),
        ("AC9", "geometry invariants", Duration::MAX, ac9_geometry),
        ("AC10", "cli determinism", Duration::MAX, ac10_cli_determinism),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in checks {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let within = elapsed <= budget;
        let pass = outcome.pass && within;
        if !pass {
            failed += 1;
        }
        let limit = if budget == Duration::MAX { String::new() } else { format!(" (limit {}s)", budget.as_secs()) };
        println!(
            "{id} {} {name}: {} [{:.1}s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }

    let start = Instant::now();
    let inv = gd_trace_monotone_after_warmup();
    println!(
        "INVARIANT {} gd trace non-increasing after epoch 100 (not a numbered criterion): {} [{:.1}s]",
        if inv.pass { "PASS" } else { "FAIL" },
        inv.detail,
        start.elapsed().as_secs_f64()
    );

    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
