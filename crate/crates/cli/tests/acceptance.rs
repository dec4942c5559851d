//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::collections::{BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use annobench::annotator::{estimate_cost, parse_response, ChatParams, CostModel};
use annobench::classifier::{
    featurize, loss, loss_and_gradient, train, FeatureVector, FeaturizerConfig, Sample, TrainConfig,
};
use annobench::corpus::{
    self, assign_arxiv_label, default_ai_categories, LabelValue, Publication, Source, SplitRatios,
};
use annobench::evalkit::{confusion, metrics, prompt_matrix_report, PromptCell};
use annobench::promptkit::{prompt_matrix, render_prompt, Clause, PromptSet, PromptSpec};
use anyhow::{bail, ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Ratio tolerance for the metrics oracle.
const RATIO_TOL: f64 = 1e-12;
const METRICS_BUDGET: Duration = Duration::from_secs(5);
const CLASSIFIER_BUDGET: Duration = Duration::from_secs(60);
const CLASSIFIER_MIN_ACCURACY: f64 = 0.99;
const GRADIENT_REL_TOL: f64 = 1e-5;
/// Mean gain tolerance, in percentage points.
const GAIN_TOL: f64 = 0.05;
const COST_RATIO: f64 = 20.0;
const COST_TOL: f64 = 1e-9;
/// Report files carry four decimals.
const REPORT_TOL: f64 = 5e-5;

/// The seven arXiv codes that make a record AI.
const AI_CODES: [&str; 7] = ["cs.AI", "cs.CL", "cs.CV", "cs.LG", "stat.ML", "cs.MA", "cs.RO"];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn metrics_oracle() -> Result<String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let n = rng.random_range(1..=500);
        let pairs: Vec<(LabelValue, LabelValue)> = (0..n)
            .map(|_| {
                (
                    LabelValue::from_is_ai(rng.random()),
                    LabelValue::from_is_ai(rng.random()),
                )
            })
            .collect();
        let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for &(p, g) in &pairs {
            match (p == LabelValue::Ai, g == LabelValue::Ai) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        let c = confusion(pairs.iter().copied())?;
        ensure!(
            (c.tp, c.fp, c.tn, c.fn_) == (tp, fp, tn, fn_),
            "case {case}: counts {c:?} vs recount ({tp},{fp},{tn},{fn_})"
        );
        let m = metrics(c)?;
        let acc = pairs.iter().filter(|(p, g)| p == g).count() as f64 / n as f64;
        ensure!(
            close(m.accuracy, acc, RATIO_TOL),
            "case {case}: accuracy {} vs {acc}",
            m.accuracy
        );
        let p = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
        let r = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
        let f1 = match (p, r) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        for (name, got, want) in [("precision", m.precision, p), ("recall", m.recall, r), ("f1", m.f1, f1)] {
            let ok = match (got, want) {
                (Some(a), Some(b)) => close(a, b, RATIO_TOL),
                (None, None) => true,
                _ => false,
            };
            ensure!(ok, "case {case}: {name} {got:?} vs {want:?}");
        }
    }
    let took = start.elapsed();
    ensure!(took < METRICS_BUDGET, "took {took:?}");
    Ok(format!("1000 lists in {took:.2?}"))
}

fn parser_fixture_and_fuzz() -> Result<String> {
    let text = std::fs::read_to_string(fixtures().join("parser_cases.jsonl"))?;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let case: Value = serde_json::from_str(line)?;
        let response = case["response"].as_str().context("response")?;
        let got = parse_response(response);
        match case["error"].as_str() {
            Some(kind) => {
                let err = got
                    .err()
                    .with_context(|| format!("row {}: {response:?} parsed", i + 1))?;
                ensure!(
                    err.kind.as_str() == kind,
                    "row {}: {response:?} gave {} not {kind}",
                    i + 1,
                    err.kind.as_str()
                );
            }
            None => {
                let p = got.map_err(|e| anyhow::anyhow!("row {}: {response:?}: {e}", i + 1))?;
                ensure!(
                    p.label.as_str() == case["label"].as_str().context("label")?,
                    "row {}: label {:?}",
                    i + 1,
                    p.label
                );
                let want = case["probability"].as_f64().context("probability")?;
                ensure!(
                    p.probability == want,
                    "row {}: probability {} not {want}",
                    i + 1,
                    p.probability
                );
            }
        }
        rows += 1;
    }
    ensure!(rows == 50, "fixture has {rows} rows");

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut parsed = 0;
    for _ in 0..100_000 {
        let len = rng.random_range(0..=300);
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        if let Ok(p) = parse_response(&String::from_utf8_lossy(&bytes)) {
            ensure!(
                (0.0..=1.0).contains(&p.probability),
                "probability {} from {bytes:?}",
                p.probability
            );
            parsed += 1;
        }
    }
    // random bytes rarely form a label, so also fuzz over answer-like tokens
    let tokens = [
        "AI", "Non-AI", "not ai", "0.", "1", "9", ".", "-", "+", " ", ",", "\n", "%", "e5", "GPT-4",
    ];
    for _ in 0..100_000 {
        let s: String = (0..rng.random_range(0..12))
            .map(|_| tokens[rng.random_range(0..tokens.len())])
            .collect();
        if let Ok(p) = parse_response(&s) {
            ensure!(
                (0.0..=1.0).contains(&p.probability),
                "probability {} from {s:?}",
                p.probability
            );
            parsed += 1;
        }
    }
    Ok(format!(
        "50/50 fixture rows, 200k fuzz strings ({parsed} parsed, all in [0,1])"
    ))
}

fn label_rule() -> Result<String> {
    let pool = [
        "cs.AI",
        "cs.CL",
        "cs.CV",
        "cs.LG",
        "stat.ML",
        "cs.MA",
        "cs.RO",
        "cs.CR",
        "cs.DB",
        "cs.NE",
        "cs.IR",
        "cs.HC",
        "math.ST",
        "math.OC",
        "stat.ME",
        "stat.AP",
        "eess.IV",
        "q-bio.NC",
        "physics.data-an",
        "econ.EM",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut records: Vec<Vec<&str>> = AI_CODES.iter().map(|c| vec![*c]).collect();
    while records.len() < 200 {
        let k = rng.random_range(1..=4);
        records.push((0..k).map(|_| pool[rng.random_range(0..pool.len())]).collect());
    }
    let ai_set = default_ai_categories();
    let mut ai = 0;
    for (i, cats) in records.iter().enumerate() {
        let p = Publication::new(format!("r{i}"), Source::Arxiv, "t", "a", 2020).with_categories(cats.iter().copied());
        let oracle = cats.iter().any(|c| AI_CODES.contains(c));
        let got = assign_arxiv_label(&p, &ai_set).value.is_ai();
        ensure!(got == oracle, "record {i} {cats:?}: rule {got}, oracle {oracle}");
        ai += usize::from(oracle);
    }
    Ok(format!("200 records agree ({ai} AI)"))
}

fn split_contract() -> Result<String> {
    let ratios = SplitRatios::new(0.70, 0.15, 0.15)?;
    for n in [10usize, 100, 1000, 12345] {
        let items: Vec<usize> = (0..n).collect();
        let s = corpus::split(&items, &ratios, 42)?;
        let part = 15 * n / 100;
        ensure!(
            (s.train.len(), s.test.len(), s.validation.len()) == (n - 2 * part, part, part),
            "N={n}: sizes {} {} {}",
            s.train.len(),
            s.test.len(),
            s.validation.len()
        );
        let mut seen = HashSet::new();
        for i in s.train.iter().chain(&s.test).chain(&s.validation) {
            ensure!(seen.insert(*i), "N={n}: {i} in two splits");
        }
        ensure!(seen.len() == n, "N={n}: {} of {n} covered", seen.len());
        ensure!(corpus::split(&items, &ratios, 42)? == s, "N={n}: same seed differs");
        if n >= 100 {
            ensure!(
                corpus::split(&items, &ratios, 43)?.test != s.test,
                "N={n}: seed ignored"
            );
        }
    }
    Ok("N = 10, 100, 1000, 12345".into())
}

fn cli(dir: &Path, args: &[&str]) -> Result<()> {
    let o = Command::new(env!("CARGO_BIN_EXE_annobench"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .output()?;
    if !o.status.success() {
        bail!("{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    Ok(())
}

/// label → annotate → eval on the shipped replay fixture. Returns the
/// report files' bytes keyed by name.
fn replay_run(model: &str) -> Result<Vec<(String, Vec<u8>)>> {
    let dir = tempfile::tempdir()?;
    let d = dir.path();
    let corpus = fixtures().join("replay_corpus.jsonl");
    let corpus = corpus.to_str().context("path")?;
    let backend = format!("replay:{}", fixtures().join("replay_responses.jsonl").display());
    cli(d, &["label", corpus, "--rule", "arxiv", "-o", "gold.csv"])?;
    cli(
        d,
        &["annotate", "--corpus", corpus, "--model", model, "--backend", &backend],
    )?;
    let records = d.join("annotations").join(model).join("expert+UC.jsonl");
    let gold = d.join("gold.csv");
    for ext in ["json", "csv"] {
        let (m, c, md) = (
            format!("metrics.{ext}"),
            format!("categories.{ext}"),
            format!("medians.{ext}"),
        );
        cli(
            d,
            &[
                "eval",
                "--annotations",
                records.to_str().context("path")?,
                "--dataset",
                gold.to_str().context("path")?,
                "--corpus",
                corpus,
                "--format",
                ext,
                "-o",
                &m,
                "--categories",
                &c,
                "--medians",
                &md,
            ],
        )?;
    }
    let mut out = Vec::new();
    for name in [
        "metrics.json",
        "categories.json",
        "medians.json",
        "metrics.csv",
        "categories.csv",
        "medians.csv",
    ] {
        out.push((name.to_string(), std::fs::read(d.join(name))?));
    }
    Ok(out)
}

struct Expected {
    model: &'static str,
    accuracy: f64,
    /// (category, n, correct) in table order, then None and Overall.
    categories: [(&'static str, u64, u64); 9],
    medians: [f64; 4],
}

fn replay_end_to_end() -> Result<String> {
    // Hand counts from the fixture construction. Gold AI: p01-p12, Non-AI:
    // p13-p20. p02, p05 and p07 carry two AI categories each.
    let expected = [
        Expected {
            model: "gpt-3.5-turbo",
            accuracy: 0.6,
            categories: [
                ("cs.AI", 2, 2),
                ("cs.CL", 3, 1),
                ("cs.CV", 2, 1),
                ("cs.LG", 4, 4),
                ("cs.MA", 1, 0),
                ("cs.RO", 1, 0),
                ("stat.ML", 2, 2),
                ("None", 8, 5),
                ("Overall", 20, 12),
            ],
            medians: [0.95, 0.9, 0.2, 0.2],
        },
        Expected {
            model: "gpt-4",
            accuracy: 0.9,
            categories: [
                ("cs.AI", 2, 2),
                ("cs.CL", 3, 3),
                ("cs.CV", 2, 2),
                ("cs.LG", 4, 4),
                ("cs.MA", 1, 0),
                ("cs.RO", 1, 1),
                ("stat.ML", 2, 2),
                ("None", 8, 7),
                ("Overall", 20, 18),
            ],
            medians: [0.95, 0.85, 0.95, 0.2],
        },
    ];
    for e in &expected {
        let first = replay_run(e.model)?;
        let second = replay_run(e.model)?;
        for ((name, a), (_, b)) in first.iter().zip(&second) {
            ensure!(a == b, "{}: {name} differs between runs", e.model);
        }
        let get = |name: &str| -> Result<Value> {
            let bytes = &first.iter().find(|(n, _)| n == name).context("missing report")?.1;
            Ok(serde_json::from_slice(bytes)?)
        };
        let m = get("metrics.json")?;
        let acc = m["accuracy"].as_f64().context("accuracy")?;
        ensure!(close(acc, e.accuracy, REPORT_TOL), "{}: accuracy {acc}", e.model);

        let cats = get("categories.json")?;
        let mut rows: Vec<&Value> = cats["rows"].as_array().context("rows")?.iter().collect();
        rows.push(&cats["none"]);
        rows.push(&cats["overall"]);
        ensure!(
            rows.len() == e.categories.len(),
            "{}: {} category rows",
            e.model,
            rows.len()
        );
        for (row, (name, n, hits)) in rows.iter().zip(&e.categories) {
            ensure!(
                row["category"] == *name && row["n"] == *n,
                "{}: row {row} vs {name} n={n}",
                e.model
            );
            let a = row["accuracy"].as_f64().context("accuracy")?;
            ensure!(
                close(a, *hits as f64 / *n as f64, REPORT_TOL),
                "{}: {name} accuracy {a}",
                e.model
            );
        }

        let med = get("medians.json")?;
        for (cell, want) in ["tp", "fp", "tn", "fn"].iter().zip(e.medians) {
            let got = med[cell].as_f64().context("median")?;
            ensure!(
                close(got, want, REPORT_TOL),
                "{}: {cell} median {got} not {want}",
                e.model
            );
        }
    }
    Ok("both models: accuracy, 9 category rows, 4 medians; reports byte-identical".into())
}

fn prompt_matrix_criterion() -> Result<String> {
    let specs = prompt_matrix();
    ensure!(specs.len() == 9, "{} prompts", specs.len());
    let texts: BTreeSet<String> = specs.iter().map(|s| render_prompt(*s).system_text).collect();
    ensure!(texts.len() == 9, "{} distinct texts", texts.len());
    for s in &specs {
        let has = render_prompt(*s)
            .system_text
            .contains("Some papers may be in STEM fields");
        ensure!(
            has == (s.clause != Clause::Base),
            "{}: STEM sentence present = {has}",
            s.id()
        );
    }
    // 3.5 row of the published table, reader/researcher/expert × base/+U/+UC
    let values = [0.79, 0.91, 0.92, 0.76, 0.91, 0.92, 0.78, 0.91, 0.92];
    let cells: Vec<PromptCell> = specs
        .iter()
        .zip(values)
        .map(|(s, a)| PromptCell {
            model: "gpt-3.5-turbo".into(),
            prompt_id: s.id(),
            accuracy: a,
        })
        .collect();
    let table = prompt_matrix_report(&cells)?;
    let gain = table.rows[0].mean_gain_points.context("gain")?;
    ensure!(close(gain, 13.8, GAIN_TOL), "gain {gain}");
    Ok(format!("9 distinct prompts, mean gain {gain:.3} points"))
}

fn separable_docs(n: usize, seed: u64) -> Vec<Publication> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let ai = i % 2 == 0;
            let topic = if ai { "neural" } else { "galaxy" };
            let words: Vec<String> = (0..30)
                .map(|_| match rng.random_range(0..4) {
                    0 => format!("{topic}{}", rng.random_range(0..50)),
                    _ => format!("common{}", rng.random_range(0..2000)),
                })
                .collect();
            let mut p = Publication::new(
                format!("d{i}"),
                Source::Arxiv,
                format!("doc {i}"),
                words.join(" "),
                2020,
            );
            p.categories = vec![if ai { "cs.LG".into() } else { "astro-ph.GA".into() }];
            p
        })
        .collect()
}

fn classifier() -> Result<String> {
    let docs = separable_docs(2000, 5);
    let labeled: Vec<(&Publication, LabelValue)> = docs
        .iter()
        .map(|p| (p, LabelValue::from_is_ai(p.categories[0] == "cs.LG")))
        .collect();
    let (train_set, val_set) = labeled.split_at(1600);
    let featurizer = FeaturizerConfig::default();
    let config = TrainConfig::default();
    let start = Instant::now();
    let (model, log) = train(train_set, val_set, &featurizer, &config)?;
    let took = start.elapsed();
    let val = model.evaluate(val_set)?.accuracy;
    ensure!(val >= CLASSIFIER_MIN_ACCURACY, "validation accuracy {val}");
    ensure!(took < CLASSIFIER_BUDGET, "training took {took:?}");
    ensure!(log.epochs.len() == config.epochs, "{} epochs logged", log.epochs.len());

    let (again, _) = train(train_set, val_set, &featurizer, &config)?;
    ensure!(
        model.to_bytes() == again.to_bytes(),
        "same seed gave different model bytes"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let dim = rng.random_range(1..=32);
        let n = rng.random_range(1..=16);
        let samples: Vec<Sample> = (0..n)
            .map(|_| {
                let counts = (0..rng.random_range(1..=dim))
                    .map(|_| (rng.random_range(0..dim as u32), rng.random_range(0.1..3.0)))
                    .collect();
                Sample {
                    x: FeatureVector::from_counts(counts, dim),
                    y: f64::from(u8::from(rng.random_bool(0.5))),
                    weight: rng.random_range(0.5..2.0),
                }
            })
            .collect();
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(0.0..0.1);
        let (_, grad, grad_b) = loss_and_gradient(&w, b, &samples, l2);
        let h = 1e-6;
        let mut check = |analytic: f64, plus: f64, minus: f64| -> Result<()> {
            let numeric = (plus - minus) / (2.0 * h);
            // relative to the larger magnitude, floored so exact zeros compare absolutely
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            ensure!(rel <= GRADIENT_REL_TOL, "analytic {analytic} vs numeric {numeric}");
            Ok(())
        };
        for j in 0..dim {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            check(grad[j], loss(&wp, b, &samples, l2), loss(&wm, b, &samples, l2))?;
        }
        check(grad_b, loss(&w, b + h, &samples, l2), loss(&w, b - h, &samples, l2))?;
    }
    // the hashed featurizer is what the model sees
    ensure!(!featurize("a", "b", &featurizer).is_empty());
    Ok(format!(
        "val accuracy {val:.4} in {took:.2?}; worst gradient rel err {worst:.1e}; bit-identical"
    ))
}

fn cost_ratio() -> Result<String> {
    let pubs: Vec<Publication> = std::fs::read_to_string(fixtures().join("replay_corpus.jsonl"))?
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    let prompts = PromptSet::builtin();
    let costs = CostModel::default();
    let mut worst = 0.0f64;
    for spec in prompt_matrix() {
        let est = |model: &str| estimate_cost(&pubs, &prompts, spec, &ChatParams::for_model(model), &costs);
        let ratio = est("gpt-4")? / est("gpt-3.5-turbo")?;
        worst = worst.max((ratio - COST_RATIO).abs());
        ensure!(
            close(ratio, COST_RATIO, COST_TOL),
            "{}: ratio {ratio}",
            PromptSpec::id(&spec)
        );
    }
    Ok(format!("9 prompts, max |ratio - 20| = {worst:.1e}"))
}

fn main() {
    type Check = fn() -> Result<String>;
    let criteria: [(&str, Check); 8] = [
        ("metrics oracle", metrics_oracle),
        ("parser fixtures and fuzz", parser_fixture_and_fuzz),
        ("arXiv label rule", label_rule),
        ("split contract", split_contract),
        ("replay end-to-end", replay_end_to_end),
        ("prompt matrix", prompt_matrix_criterion),
        ("baseline classifier", classifier),
        ("cost estimator ratio", cost_ratio),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(e)) => {
                failed += 1;
                println!("FAIL  {name}: {e:#}");
            }
            Err(panic) => {
                failed += 1;
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL  {name}: panicked: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
