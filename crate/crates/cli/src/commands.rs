use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use clbt_core::align::{
    extract_pairs, parse_bitext, parse_parallel, parse_pharaoh, write_pairs, PairRecord, Segmentation,
    WordPieceVocab,
};
use clbt_core::embed::{
    apply_transform, assemble_pairs, read_embeddings, read_transform, reduce_to_words, write_embeddings,
    write_transform, EmbeddingFormat, EmbeddingMatrix, PairedEmbeddings, Reduction, SentenceSpans,
};
use clbt_core::eval::{ablate, evaluate, export_projection, generate_synthetic, PrefixMode, SynthSpec};
use clbt_core::fit::{fit, fit_lsq, FitConfig, FitMethod};
use clbt_core::linalg::Matrix;
use serde_json::Value;

use crate::args::{AblateArgs, ApplyArgs, Cli, Command, EvalArgs, ExtractArgs, FitArgs, SolverArgs, SynthArgs};
use crate::error::{CliError, CliResult, WithPath};
use crate::summary::Summary;

pub fn run(cli: &Cli) -> CliResult<Value> {
    let summary = match &cli.command {
        Command::ExtractPairs(a) => extract(a, cli.seed)?,
        Command::Fit(a) => fit_cmd(a, cli.seed)?,
        Command::Apply(a) => apply(a, cli.seed)?,
        Command::Eval(a) => eval(a, cli.seed)?,
        Command::Ablate(a) => ablate_cmd(a, cli.seed)?,
        Command::Synth(a) => synth(a, cli.seed)?,
    };
    let value = summary.finish();
    if let Some(path) = &cli.summary {
        write_json(path, &value)?;
    }
    Ok(value)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).at(path)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).at(path)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::usage(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).at(path)
}

fn load(path: &Path) -> CliResult<EmbeddingMatrix> {
    read_embeddings(path, None).at(path)
}

/// Reads row-aligned target and source matrices.
fn load_pairs(x_path: &Path, y_path: &Path) -> CliResult<(EmbeddingMatrix, EmbeddingMatrix, PairedEmbeddings)> {
    let x = load(x_path)?;
    let y = load(y_path)?;
    if x.len() != y.len() {
        return Err(clbt_core::Error::CorpusMismatch {
            left_name: x_path.display().to_string(),
            left: x.len(),
            right_name: y_path.display().to_string(),
            right: y.len(),
        }
        .into());
    }
    let pairs = PairedEmbeddings::new(x.vectors().clone(), y.vectors().clone()).at(x_path)?;
    Ok((x, y, pairs))
}

fn solver_config(s: &SolverArgs, seed: Option<u64>, summary: &mut Summary) -> CliResult<FitConfig> {
    let mut cfg = match &s.config {
        Some(path) => {
            summary.input("config", path);
            let text = fs::read_to_string(path).at(path)?;
            toml::from_str::<FitConfig>(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        }
        None => FitConfig::default(),
    };
    if let Some(m) = s.method {
        cfg.method = m.into();
    }
    if let Some(v) = s.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = s.beta1 {
        cfg.beta1 = v;
    }
    if let Some(v) = s.beta2 {
        cfg.beta2 = v;
    }
    if let Some(v) = s.epochs {
        cfg.max_epochs = v;
    }
    if s.batch_size.is_some() {
        cfg.batch_size = s.batch_size;
    }
    if let Some(v) = s.tolerance {
        cfg.rel_tolerance = v;
    }
    if let Some(v) = s.l2 {
        cfg.l2_weight = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    summary.config("fit", &cfg);
    Ok(cfg)
}

fn extract(a: &ExtractArgs, seed: Option<u64>) -> CliResult<Summary> {
    let mut summary = Summary::new("extract-pairs", seed.unwrap_or(0));
    let bitext = match (&a.bitext, &a.target_text, &a.source_text) {
        (Some(path), _, _) => {
            summary.input("bitext", path);
            parse_bitext(open(path)?).at(path)?
        }
        (None, Some(t), Some(s)) => {
            summary.input("target_text", t);
            summary.input("source_text", s);
            parse_parallel(open(t)?, open(s)?).at(t)?
        }
        _ => return Err(CliError::usage("give --bitext or both --target-text and --source-text")),
    };
    summary.input("align", &a.align);
    let alignments = parse_pharaoh(open(&a.align)?).at(&a.align)?;

    let vocab = match &a.vocab {
        Some(path) => {
            summary.input("vocab", path);
            Some(WordPieceVocab::read(open(path)?, &a.unk).at(path)?)
        }
        None => None,
    };
    let segmentation = match &vocab {
        Some(v) => Segmentation::WordPiece(v),
        None => Segmentation::Pretokenized,
    };
    summary.config("pretokenized", a.pretokenized);
    let extraction = extract_pairs(&bitext, &alignments, segmentation)?;
    let written = write_pairs(create(&a.pairs_out)?, extraction.records()).at(&a.pairs_out)?;
    summary.output("pairs", &a.pairs_out);
    summary.count("sentences", bitext.len());
    summary.count("pairs", written);

    if let (Some(te), Some(se), Some(px), Some(py)) = (&a.target_emb, &a.source_emb, &a.pairs_x, &a.pairs_y) {
        summary.input("target_emb", te);
        summary.input("source_emb", se);
        let reduction: Reduction = a.reduce.into();
        summary.config("reduce", format!("{:?}", reduction).to_lowercase());
        summary.config("strict", a.strict);
        let mut records: Vec<PairRecord> = extraction.records().collect();
        let (target, source) = if reduction == Reduction::LeftMost {
            (load(te)?, load(se)?)
        } else {
            let spans = |pick: fn(&clbt_core::align::SentenceAlignment) -> &Vec<_>| -> Vec<SentenceSpans> {
                extraction
                    .sentences
                    .iter()
                    .map(|s| SentenceSpans {
                        sentence_index: s.sentence_index,
                        spans: pick(s).clone(),
                    })
                    .collect()
            };
            let t = reduce_to_words(&load(te)?, &spans(|s| &s.target_spans), reduction).at(te)?;
            let s = reduce_to_words(&load(se)?, &spans(|s| &s.source_spans), reduction).at(se)?;
            for r in &mut records {
                r.target_first_piece = r.target_index;
                r.source_first_piece = r.source_index;
            }
            (t, s)
        };
        let assembled = assemble_pairs(&records, &target, &source, a.strict)?;
        let provenance = assembled.pairs.provenance().unwrap_or_default();
        let tkeys = provenance.iter().map(|p| format!("{}:{}", p.sentence_index, p.target_index)).collect();
        let skeys = provenance.iter().map(|p| format!("{}:{}", p.sentence_index, p.source_index)).collect();
        let format: EmbeddingFormat = a.format.into();
        write_embeddings(px, &EmbeddingMatrix::new(tkeys, assembled.pairs.x().clone())?, format).at(px)?;
        write_embeddings(py, &EmbeddingMatrix::new(skeys, assembled.pairs.y().clone())?, format).at(py)?;
        summary.output("pairs_x", px);
        summary.output("pairs_y", py);
        summary.count("assembled", assembled.pairs.len());
        summary.count("skipped", assembled.skipped);
    }
    Ok(summary)
}

fn fit_cmd(a: &FitArgs, seed: Option<u64>) -> CliResult<Summary> {
    let mut summary = Summary::new("fit", seed.unwrap_or(0));
    summary.input("pairs_x", &a.pairs_x);
    summary.input("pairs_y", &a.pairs_y);
    let cfg = solver_config(&a.solver, seed, &mut summary)?;
    summary.config("normalize", a.normalize);
    let (_, _, mut pairs) = load_pairs(&a.pairs_x, &a.pairs_y)?;
    if a.normalize {
        pairs = pairs.normalized();
    }
    summary.count("pairs", pairs.len());
    summary.count("target_dim", pairs.target_dim());
    summary.count("source_dim", pairs.source_dim());

    let transform = if cfg.method == FitMethod::Lsq {
        let lsq = fit_lsq(&pairs)?;
        if let Some(r) = lsq.ridge {
            log::warn!("normal equations were singular; added ridge {r:e}");
        }
        summary.result("ridge", lsq.ridge);
        lsq.transform
    } else {
        let (t, trace) = fit(&pairs, &cfg)?;
        if let Some(trace) = trace {
            summary.result("epochs", trace.epochs());
            summary.result("stop", trace.stop);
        }
        t
    };
    write_transform(&a.out, &transform).at(&a.out)?;
    summary.output("transform", &a.out);
    summary.result("method", transform.method());
    summary.result("orthogonal", transform.is_orthogonal());
    summary.result("objective", transform.objective());
    Ok(summary)
}

fn apply(a: &ApplyArgs, seed: Option<u64>) -> CliResult<Summary> {
    let mut summary = Summary::new("apply", seed.unwrap_or(0));
    summary.input("transform", &a.transform);
    summary.input("in", &a.input);
    let t = read_transform(&a.transform).at(&a.transform)?;
    let emb = load(&a.input)?;
    let mapped = apply_transform(&t, &emb).at(&a.input)?;
    write_embeddings(&a.out, &mapped, a.format.into()).at(&a.out)?;
    summary.output("out", &a.out);
    summary.count("vectors", mapped.len());
    summary.count("in_dim", t.in_dim());
    summary.count("out_dim", t.out_dim());
    Ok(summary)
}

fn eval(a: &EvalArgs, seed: Option<u64>) -> CliResult<Summary> {
    let mut summary = Summary::new("eval", seed.unwrap_or(0));
    summary.input("pairs_x", &a.pairs_x);
    summary.input("pairs_y", &a.pairs_y);
    summary.config("k", &a.k);
    let (x, y, pairs) = load_pairs(&a.pairs_x, &a.pairs_y)?;
    let w = match &a.transform {
        Some(path) => {
            summary.input("transform", path);
            read_transform(path).at(path)?.into_matrix()
        }
        None => Matrix::identity(pairs.target_dim()),
    };
    let report = evaluate(&w, &pairs, &a.k)?;
    println!("{report}");
    if let Some(path) = &a.out {
        write_json(path, &report)?;
        summary.output("report", path);
    }
    if let Some(path) = &a.projection {
        let mapped = EmbeddingMatrix::new(x.keys().to_vec(), x.vectors().matmul_t(&w)?)?;
        let csv = export_projection(&[("target", &mapped), ("source", &y)], None)?;
        fs::write(path, csv).at(path)?;
        summary.output("projection", path);
    }
    summary.count("pairs", report.n_eval);
    summary.result("report", &report);
    Ok(summary)
}

fn ablate_cmd(a: &AblateArgs, seed: Option<u64>) -> CliResult<Summary> {
    let mut summary = Summary::new("ablate", seed.unwrap_or(0));
    for (name, p) in [("pairs_x", &a.pairs_x), ("pairs_y", &a.pairs_y), ("test_x", &a.test_x), ("test_y", &a.test_y)] {
        summary.input(name, p);
    }
    let cfg = solver_config(&a.solver, seed, &mut summary)?;
    summary.config("counts", &a.counts);
    summary.config("k", &a.k);
    summary.config("shuffle", a.shuffle);
    let (_, _, train) = load_pairs(&a.pairs_x, &a.pairs_y)?;
    let (_, _, test) = load_pairs(&a.test_x, &a.test_y)?;
    let mode = if a.shuffle { PrefixMode::Shuffled(cfg.seed) } else { PrefixMode::InOrder };
    let report = ablate(&train, &a.counts, &cfg, &test, &a.k, mode)?;
    let mut out = create(&a.out)?;
    out.write_all(report.to_csv().as_bytes()).at(&a.out)?;
    out.flush().at(&a.out)?;
    summary.output("csv", &a.out);
    if let Some(path) = &a.report {
        write_json(path, &report)?;
        summary.output("report", path);
    }
    summary.count("train_pairs", train.len());
    summary.count("test_pairs", test.len());
    for row in &report.rows {
        let p1 = row.report.precision_at_k.values().next().copied();
        summary.result(&format!("pairs_{}", row.pair_count), serde_json::json!({
            "test_objective": row.test_objective,
            "first_precision": p1,
        }));
    }
    Ok(summary)
}

fn synth(a: &SynthArgs, seed: Option<u64>) -> CliResult<Summary> {
    let seed = seed.unwrap_or(0);
    let mut summary = Summary::new("synth", seed);
    let spec = SynthSpec {
        n_train: a.n,
        n_test: a.n_test,
        d: a.d,
        noise_sigma: a.noise,
        seed,
        planted: a.planted.into(),
    };
    summary.config("spec", &spec);
    let data = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out_dir).at(&a.out_dir)?;
    let format: EmbeddingFormat = a.format.into();
    let mut write = |name: &str, m: &Matrix| -> CliResult<()> {
        let path = a.out_dir.join(format!("{name}.clbe"));
        write_embeddings(&path, &EmbeddingMatrix::with_row_keys(m.clone())?, format).at(&path)?;
        summary.output(name, &path);
        Ok(())
    };
    write("train_x", data.train.x())?;
    write("train_y", data.train.y())?;
    if let Some(test) = &data.test {
        write("test_x", test.x())?;
        write("test_y", test.y())?;
    }
    write("planted", &data.planted)?;
    summary.count("train_pairs", data.train.len());
    summary.count("test_pairs", data.test.as_ref().map_or(0, PairedEmbeddings::len));
    Ok(summary)
}
