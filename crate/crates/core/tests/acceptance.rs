//! Acceptance suite: runs every criterion and prints one PASS/FAIL line each.

mod common;

use ctxlab::agent::{
    run_react, toolset_for, ReactOutcome, RepoContext, ScriptedPolicy, StopReason, Stopping,
    StrategyConfig, ToolsetKind, Verdict,
};
use ctxlab::corpus::{
    load_snapshot, EntityExtractor, ExtractorRegistry, PythonExtractor, SnapshotOptions,
};
use ctxlab::evaluation::{
    bold_mask, correlation_report, parse_patch, prf, render_markdown, CorrelationError, EntityRef,
    GoldLocalization, Prf, ReasoningLevel, StrategyRow,
};
use ctxlab::retrieval::{index_term_split, Bm25Index, Bm25Params, Document};
use ctxlab::{CodeIndex, Execution, LineSpan, RepoSnapshot, SourceFile, TokenCounter};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("metric oracle equivalence", metric_oracle),
        ("bm25 correctness", bm25_correctness),
        ("entity extraction", entity_extraction),
        ("patch localization", patch_localization),
        ("stopping state machines", stopping_machines),
        ("end-to-end golden run", golden_run),
        ("correlation sanity on published rows", correlation_sanity),
        ("report bolding", report_bolding),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL\n{why}", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

// 1

fn brute_force_prf(retrieved: &[u8], gold: &[u8]) -> (f64, f64, f64) {
    let mut r: Vec<u8> = Vec::new();
    for x in retrieved {
        if !r.contains(x) {
            r.push(*x);
        }
    }
    let mut g: Vec<u8> = Vec::new();
    for x in gold {
        if !g.contains(x) {
            g.push(*x);
        }
    }
    let mut hits = 0usize;
    for x in &r {
        for y in &g {
            if x == y {
                hits += 1;
            }
        }
    }
    let p = if r.is_empty() {
        0.0
    } else {
        hits as f64 / r.len() as f64
    };
    let rc = hits as f64 / g.len() as f64;
    let f = if p + rc > 0.0 {
        2.0 * p * rc / (p + rc)
    } else {
        0.0
    };
    (p, rc, f)
}

fn metric_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let start = Instant::now();
    for case in 0..1000 {
        let retrieved: Vec<u8> = (0..rng.random_range(0..=20))
            .map(|_| rng.random_range(0..30))
            .collect();
        let gold: Vec<u8> = (0..rng.random_range(1..=20))
            .map(|_| rng.random_range(0..30))
            .collect();
        let got = prf(
            &retrieved.iter().copied().collect::<BTreeSet<_>>(),
            &gold.iter().copied().collect::<BTreeSet<_>>(),
        )
        .map_err(|e| e.to_string())?;
        let (p, r, f) = brute_force_prf(&retrieved, &gold);
        ensure!(
            got.precision == p && got.recall == r && got.f1 == f,
            "case {case}: {got:?} vs oracle ({p}, {r}, {f}) for {retrieved:?} / {gold:?}"
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("1000 pairs in {elapsed:.0?}"))
}

// 2

fn doc(i: usize, text: &str) -> Document {
    Document::new(&format!("d{i}.py"), LineSpan::new(1, 1), text)
}

/// Okapi score computed term by term, straight from the definition.
fn reference_scores(texts: &[String], query: &str) -> Vec<f64> {
    let docs: Vec<Vec<String>> = texts.iter().map(|t| index_term_split(t)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let terms: BTreeSet<String> = index_term_split(query).into_iter().collect();
    docs.iter()
        .map(|d| {
            let mut score = 0.0;
            for term in &terms {
                let df = docs.iter().filter(|o| o.contains(term)).count() as f64;
                let tf = d.iter().filter(|t| *t == term).count() as f64;
                if df == 0.0 || tf == 0.0 {
                    continue;
                }
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                score += idf * tf * (1.2 + 1.0)
                    / (tf + 1.2 * (1.0 - 0.75 + 0.75 * d.len() as f64 / avg));
            }
            score
        })
        .collect()
}

fn bm25_correctness() -> Outcome {
    let texts = [
        "parse config file",
        "parse parse token stream",
        "config loader reads config file from disk",
        "token",
        "write file",
    ];
    let index = Bm25Index::build(
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| doc(i + 1, t))
            .collect(),
        Bm25Params::default(),
        Execution::Sequential,
    );
    // hand-computed table: one row per query, one column per document
    let table: [(&str, [f64; 5]); 4] = [
        (
            "parse config",
            [
                1.83946802118179,
                1.1468487137315537,
                0.9275504469415258,
                0.0,
                0.0,
            ],
        ),
        (
            "token file",
            [
                0.5662491327922052,
                0.81652196451461,
                0.37609084192915115,
                1.2309222096630021,
                0.6481822870547428,
            ],
        ),
        (
            "disk stream missing",
            [0.0, 1.2929528455332648, 0.967302408691864, 0.0, 0.0],
        ),
        (
            "file",
            [
                0.5662491327922052,
                0.0,
                0.37609084192915115,
                0.0,
                0.6481822870547428,
            ],
        ),
    ];
    for (query, want) in table {
        let terms = index_term_split(query);
        for (i, w) in want.iter().enumerate() {
            let got = index
                .score(&terms, &format!("d{}.py:1-1", i + 1))
                .map_err(|e| e.to_string())?;
            ensure!(
                (got - w).abs() < 1e-9,
                "{query:?} on d{}: {got} vs {w}",
                i + 1
            );
        }
    }

    let vocab = [
        "alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "iota", "kappa",
    ];
    let mut rng = StdRng::seed_from_u64(11);
    for corpus in 0..100 {
        let n = rng.random_range(1..=50);
        let texts: Vec<String> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..=12);
                (0..len)
                    .map(|_| vocab[rng.random_range(0..vocab.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let query = (0..rng.random_range(1..=3))
            .map(|_| vocab[rng.random_range(0..vocab.len())])
            .collect::<Vec<_>>()
            .join(" ");
        let index = Bm25Index::build(
            texts.iter().enumerate().map(|(i, t)| doc(i, t)).collect(),
            Bm25Params::default(),
            Execution::Sequential,
        );
        let scores = reference_scores(&texts, &query);
        let mut expected: Vec<(String, f64)> = scores
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > 0.0)
            .map(|(i, s)| (format!("d{i}.py:1-1"), *s))
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let got: Vec<(String, f64)> = index
            .ranked(&query)
            .into_iter()
            .map(|(i, s)| (index.documents()[i].doc_id.clone(), s))
            .collect();
        ensure!(
            got.len() == expected.len(),
            "corpus {corpus}: {} ranked vs {}",
            got.len(),
            expected.len()
        );
        for (g, e) in got.iter().zip(&expected) {
            ensure!(
                g.0 == e.0 && (g.1 - e.1).abs() < 1e-9,
                "corpus {corpus} query {query:?}: {got:?} vs {expected:?}"
            );
        }
    }
    Ok("4x5 hand table within 1e-9, 100 random corpora ranked".into())
}

// 3

fn entity_extraction() -> Outcome {
    let dir = common::fixtures().join("python");
    let annotations: BTreeMap<String, Value> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("annotations.json")).unwrap())
            .unwrap();
    ensure!(
        annotations.len() >= 10,
        "only {} annotated files",
        annotations.len()
    );
    let mut entities = 0;
    for (name, want) in &annotations {
        let content =
            std::fs::read_to_string(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let extraction = PythonExtractor.extract(&SourceFile::new(name.as_str(), content));
        let got: BTreeSet<(String, String, usize, usize)> = extraction
            .entities
            .iter()
            .map(|e| {
                (
                    e.kind.to_string(),
                    e.qualified_name.clone(),
                    e.span.start,
                    e.span.end,
                )
            })
            .collect();
        let expected: BTreeSet<(String, String, usize, usize)> =
            serde_json::from_value(want["entities"].clone()).unwrap();
        ensure!(got == expected, "{name}: got {got:?}, want {expected:?}");
        let parse_error = want["parse_error"].as_bool().unwrap();
        ensure!(
            extraction.parse_error.is_some() == parse_error,
            "{name}: parse error {:?}, annotated {parse_error}",
            extraction.parse_error
        );
        entities += got.len();
    }
    Ok(format!("{} files, {entities} entities", annotations.len()))
}

// 4

fn patch_localization() -> Outcome {
    let python = common::fixtures().join("python");
    let snapshot = load_snapshot(&python, &SnapshotOptions::default(), Execution::Sequential)
        .map_err(|e| e.to_string())?;
    let index = CodeIndex::build(
        &snapshot,
        &ExtractorRegistry::default(),
        Execution::Sequential,
    );
    let diffs = common::fixtures().join("diffs");
    let expected: BTreeMap<String, Value> =
        serde_json::from_str(&std::fs::read_to_string(diffs.join("expected.json")).unwrap())
            .unwrap();
    ensure!(expected.len() >= 8, "only {} diffs", expected.len());

    let mut kinds = BTreeSet::new();
    for (name, want) in &expected {
        let text = std::fs::read_to_string(diffs.join(name)).unwrap();
        let patch = parse_patch(&text).map_err(|e| format!("{name}: {e}"))?;
        let paths: Vec<(Option<String>, Option<String>)> = patch
            .file_changes
            .iter()
            .map(|c| (c.path_before.clone(), c.path_after.clone()))
            .collect();
        let want_paths: Vec<(Option<String>, Option<String>)> =
            serde_json::from_value(want["paths"].clone()).unwrap();
        ensure!(paths == want_paths, "{name}: paths {paths:?}");
        let hunks: Vec<[usize; 4]> = patch
            .file_changes
            .iter()
            .flat_map(|c| &c.hunks)
            .map(|h| [h.pre_start, h.pre_len, h.post_start, h.post_len])
            .collect();
        let want_hunks: Vec<[usize; 4]> = serde_json::from_value(want["hunks"].clone()).unwrap();
        ensure!(hunks == want_hunks, "{name}: hunks {hunks:?}");

        let gold = GoldLocalization::from_patch(&patch, &snapshot, &index);
        let files: BTreeSet<String> = serde_json::from_value(want["files"].clone()).unwrap();
        ensure!(gold.files == files, "{name}: files {:?}", gold.files);
        let entities: BTreeSet<EntityRef> =
            serde_json::from_value::<Vec<(String, String)>>(want["entities"].clone())
                .unwrap()
                .into_iter()
                .map(|(f, q)| EntityRef::new(f, q))
                .collect();
        ensure!(
            gold.entities == entities,
            "{name}: entities {:?}",
            gold.entities
        );
        let missing: Vec<String> = serde_json::from_value(want["missing_files"].clone()).unwrap();
        ensure!(
            gold.missing_files == missing,
            "{name}: missing {:?}",
            gold.missing_files
        );
        let module_level = want["module_level_changes"].as_u64().unwrap() as usize;
        ensure!(
            gold.module_level_changes == module_level,
            "{name}: module-level {}",
            gold.module_level_changes
        );

        if patch.file_changes.len() > 1 {
            kinds.insert("multi-file");
        }
        if patch.file_changes.iter().any(|c| c.is_rename()) {
            kinds.insert("rename");
        }
        if patch
            .file_changes
            .iter()
            .any(|c| c.deleted_lines().is_empty() && !c.insertion_anchors().is_empty())
        {
            kinds.insert("pure addition");
        }
        if entities.is_empty() && module_level > 0 {
            kinds.insert("module-level only");
        }
        if patch
            .file_changes
            .iter()
            .all(|c| c.deleted_lines().is_empty())
            && !entities.is_empty()
        {
            kinds.insert("anchor inside entity");
        }
    }
    ensure!(kinds.len() == 5, "uncovered categories, saw {kinds:?}");
    Ok(format!(
        "{} diffs covering {}",
        expected.len(),
        kinds.into_iter().collect::<Vec<_>>().join(", ")
    ))
}

// 5

/// One function whose whole text is exactly `bytes` long.
fn padded_function(name: &str, marker: &str, bytes: usize) -> String {
    let head = format!("def {name}():\n    return '{marker}");
    let pad = bytes - head.len() - 2;
    let text = format!("{head}{}'\n", "x".repeat(pad));
    assert_eq!(text.len(), bytes);
    text
}

fn stop_fixture() -> RepoContext {
    let files = vec![
        SourceFile::new("a.py", padded_function("a", "MARK_A", 1200)),
        SourceFile::new("b.py", padded_function("b", "MARK_B", 796)),
        SourceFile::new("c.py", "C=1\n"),
        SourceFile::new("d.py", "D=2\n"),
        SourceFile::new("e.py", padded_function("e", "MARK_E", 1200)),
    ];
    RepoContext::build(
        RepoSnapshot::from_files("/", files),
        &ExtractorRegistry::default(),
        40,
        Bm25Params::default(),
        Execution::Sequential,
    )
}

fn call(fragment: &str) -> String {
    format!("```tool\nsearch_code\ncode_str={fragment}\n```")
}

fn replay(
    repo: &RepoContext,
    outputs: &[&str],
    verdicts: &[&str],
    stopping: Stopping,
    max_steps: usize,
) -> ReactOutcome {
    let config = StrategyConfig {
        max_steps,
        ..StrategyConfig::new(ToolsetKind::Acr, stopping)
    };
    let tools = toolset_for(ToolsetKind::Acr, repo, config.top_k, config.result_limit);
    let policy = ScriptedPolicy::new(
        outputs.iter().map(|s| s.to_string()).collect(),
        verdicts.iter().map(|s| s.to_string()).collect(),
    );
    run_react(
        tools.as_ref(),
        "task",
        &policy,
        &config,
        &TokenCounter::approximate(),
    )
    .expect("run completes")
}

fn tokens_per_step(o: &ReactOutcome) -> Vec<usize> {
    o.transcript.iter().map(|s| s.context_tokens).collect()
}

fn stopping_machines() -> Outcome {
    let repo = stop_fixture();
    let (a, b, c, d, e) = (
        call("MARK_A"),
        call("MARK_B"),
        call("C=1"),
        call("D=2"),
        call("MARK_E"),
    );
    let malformed = "```tool\nsearch_file\nname=a.py\n```";

    // CL: 300-token results against 500
    let o = replay(&repo, &[&a, &e], &[], Stopping::Cl, 25);
    ensure!(
        o.stop_reason == StopReason::CriterionMet && tokens_per_step(&o) == [300, 600],
        "cl 300+300: {:?}",
        tokens_per_step(&o)
    );
    // CL: lands on exactly 500
    let o = replay(&repo, &[&a, &b, &c], &[], Stopping::Cl, 25);
    ensure!(
        o.stop_reason == StopReason::CriterionMet && tokens_per_step(&o) == [300, 499, 500],
        "cl 500: {:?}",
        tokens_per_step(&o)
    );
    // CL: 499 is not enough; prose keeps the loop going until the next call
    let o = replay(&repo, &[&a, &b, "thinking", &d], &[], Stopping::Cl, 25);
    ensure!(
        o.stop_reason == StopReason::CriterionMet && tokens_per_step(&o) == [300, 499, 499, 500],
        "cl 499: {:?}",
        tokens_per_step(&o)
    );
    let o = replay(&repo, &[&a, &b], &[], Stopping::Cl, 6);
    ensure!(
        o.stop_reason == StopReason::StepLimit
            && o.transcript.len() == 6
            && o.context.total_tokens() == 499,
        "cl cap: {:?}",
        o.stop_reason
    );

    // TC: first output without a call, a malformed call does not count
    let o = replay(&repo, &[&a, malformed, "done", &e], &[], Stopping::Tc, 25);
    ensure!(
        o.stop_reason == StopReason::NoToolCall
            && o.transcript.len() == 3
            && o.transcript[1].parse_error.is_some()
            && o.transcript[..2].iter().all(|s| s.attempted_call())
            && !o.transcript[2].attempted_call(),
        "tc: {:?} after {} steps",
        o.stop_reason,
        o.transcript.len()
    );
    let o = replay(&repo, &[&a, &e, &b, &c], &[], Stopping::Tc, 3);
    ensure!(
        o.stop_reason == StopReason::StepLimit && o.transcript.len() == 3,
        "tc cap: {:?}",
        o.stop_reason
    );

    // SR: sufficient matches the TC run, insufficient extends it
    let trace = [a.as_str(), "enough", e.as_str(), "now enough"];
    let tc = replay(&repo, &trace, &[], Stopping::Tc, 25);
    let sr = replay(&repo, &trace, &["SUFFICIENT"], Stopping::Sr, 25);
    ensure!(
        sr.stop_reason == StopReason::ReflectionSufficient
            && sr.transcript.len() == tc.transcript.len()
            && sr.context == tc.context,
        "sr sufficient: {} vs tc {}",
        sr.transcript.len(),
        tc.transcript.len()
    );
    let sr = replay(
        &repo,
        &trace,
        &["INSUFFICIENT need more", "SUFFICIENT"],
        Stopping::Sr,
        25,
    );
    ensure!(
        sr.stop_reason == StopReason::ReflectionSufficient
            && sr.transcript.len() == tc.transcript.len() + 2
            && sr.transcript[1].reflection.as_ref().map(|r| r.verdict)
                == Some(Verdict::Insufficient)
            && sr.transcript[3].reflection.as_ref().map(|r| r.verdict) == Some(Verdict::Sufficient),
        "sr insufficient: {} steps",
        sr.transcript.len()
    );
    let sr = replay(&repo, &trace, &["maybe", "SUFFICIENT"], Stopping::Sr, 25);
    ensure!(
        sr.transcript.len() == tc.transcript.len() + 2
            && sr.transcript[1].reflection.as_ref().map(|r| r.verdict)
                == Some(Verdict::Unparseable),
        "sr garbage verdict: {} steps",
        sr.transcript.len()
    );
    let sr = replay(&repo, &["hm"], &["INSUFFICIENT"; 8], Stopping::Sr, 5);
    ensure!(
        sr.stop_reason == StopReason::StepLimit
            && sr.transcript.len() == 5
            && sr.diagnostics.reflections == 5,
        "sr cap: {:?}",
        sr.stop_reason
    );
    Ok("cl 499/500 boundaries, tc, sr extension, step caps".into())
}

// 6

fn golden_run() -> Outcome {
    let lab = common::Lab::ingested();
    common::check_golden(&lab)?;
    common::check_reruns_identical(&lab)?;
    Ok("7 configurations x 3 instances, reruns byte-identical".into())
}

// 7 and 8

struct Published {
    rows: Vec<StrategyRow>,
    bold: Vec<[bool; 6]>,
}

fn published_rows() -> Published {
    let text = std::fs::read_to_string(common::fixtures().join("results/published.tsv")).unwrap();
    let mut rows = Vec::new();
    let mut bold = Vec::new();
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
    {
        let cells: Vec<&str> = line.split('\t').collect();
        let level = match cells[2] {
            "Baseline" => ReasoningLevel::Baseline,
            "ReAct + CL" => ReasoningLevel::Cl,
            "ReAct + TC" => ReasoningLevel::Tc,
            "ReAct + SR" => ReasoningLevel::Sr,
            "ACR (custom)" => ReasoningLevel::AcrCustom,
            other => panic!("unknown strategy {other}"),
        };
        let mut marks = [false; 6];
        let mut values = [0.0; 6];
        for (i, cell) in cells[3..9].iter().enumerate() {
            marks[i] = cell.starts_with('*');
            values[i] = cell.trim_start_matches('*').parse::<f64>().unwrap() / 100.0;
        }
        let prf = |v: &[f64]| Prf {
            precision: v[0],
            recall: v[1],
            f1: v[2],
        };
        rows.push(StrategyRow {
            dataset: cells[0].to_string(),
            toolset: cells[1].to_string(),
            strategy: cells[2].to_string(),
            reasoning_level: level,
            file: Some(prf(&values[..3])),
            entity: Some(prf(&values[3..])),
            avg_context_tokens: cells[9].parse().unwrap(),
            instances: 0,
        });
        bold.push(marks);
    }
    Published { rows, bold }
}

fn correlation_sanity() -> Outcome {
    let Published { rows, .. } = published_rows();
    ensure!(rows.len() == 16, "{} rows", rows.len());
    let report = correlation_report(&rows).map_err(|e| e.to_string())?;
    let get = |r: &Result<f64, CorrelationError>| r.as_ref().copied().map_err(|e| e.to_string());
    let pf = get(&report.file.precision_vs_reasoning)?;
    let pe = get(&report.entity.precision_vs_reasoning)?;
    let rf = get(&report.file.recall_vs_ctxlen)?;
    let re = get(&report.entity.recall_vs_ctxlen)?;
    ensure!(
        pf > 0.7 && pe > 0.7,
        "precision vs reasoning: file {pf}, entity {pe}"
    );
    ensure!(
        rf > 0.0 && re > 0.0,
        "recall vs context length: file {rf}, entity {re}"
    );
    Ok(format!(
        "P~reasoning file {pf:.4} entity {pe:.4}; R~ctxlen file {rf:.4} entity {re:.4}"
    ))
}

fn report_bolding() -> Outcome {
    let Published { rows, bold } = published_rows();
    let mask = bold_mask(&rows);
    for (i, (got, want)) in mask.iter().zip(&bold).enumerate() {
        ensure!(
            got == want,
            "{} / {} / {}: {got:?} vs {want:?}",
            rows[i].dataset,
            rows[i].toolset,
            rows[i].strategy
        );
    }
    let table = render_markdown(&rows);
    let rendered = table.matches("**").count() / 2;
    let marked = bold.iter().flatten().filter(|b| **b).count();
    ensure!(
        rendered == marked,
        "rendered {rendered} bold cells, expected {marked}"
    );
    Ok(format!("{marked} bold cells across 4 blocks"))
}
