//! One PASS/FAIL line per acceptance criterion, each with its tolerance and
//! runtime budget. Runs without any external service.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::Value;

use themis::bench::{self, AuditMode, BenchmarkManifest};
use themis::filter::{self, FilterConfig, NgramIndex, Verdict};
use themis::metrics::{self, PromptMode};
use themis::mining::judge::ReplayJudge;
use themis::mining::{self, JudgeClient, MiningConfig, MiningServices};
use themis::scorer::{ScoreError, ScoreRequest, ScoreResponse, Scorer, ToyRewardModel};
use themis::train::{self, LossConfig, MixSampler, PairFeatures, ToyLM, TrainConfig, TrainStage};
use themis::types::{CommitRecord, Criterion, Language, PreferencePair, RankedCandidate};

use common::*;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn main() {
    let checks: &[(&str, &str, Check, u64)] = &[
        ("1", "loss/gradient fidelity", c1_gradients, 10),
        ("2", "toy training", c2_training, 60),
        ("3", "criteria-mix sampler", c3_sampler, 5),
        ("4", "dedup oracle equivalence", c4_dedup, 30),
        ("5", "decontamination oracle equivalence", c5_decontam, 10),
        ("6", "mining funnel audit", c6_mining, 60),
        ("7", "metric oracles", c7_metrics, 60),
        ("8a", "benchmark audit: zero deltas", c8a_zero_deltas, 60),
        ("8b", "benchmark audit: total 8866", c8b_total, 60),
        ("9", "end-to-end determinism", c9_determinism, 120),
    ];
    let mut failed = Vec::new();
    for (id, name, check, budget) in checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(d) if elapsed > Duration::from_secs(*budget) => Err(format!("{d}; over the {budget}s budget")),
            other => other,
        };
        match result {
            Ok(detail) => println!("acceptance {id:>2} {name}: PASS ({detail}; {:.2}s < {budget}s)", elapsed.as_secs_f64()),
            Err(detail) => {
                println!("acceptance {id:>2} {name}: FAIL ({detail}; {:.2}s)", elapsed.as_secs_f64());
                failed.push(*id);
            }
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}

// 1 ------------------------------------------------------------------------

fn c1_gradients() -> Result<String, String> {
    const H: f64 = 1e-6;
    const TOL: f64 = 1e-5;
    const FLOOR: f64 = 1e-3;
    let mut r = rng(1);
    let vocab = vocabulary(300);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for draw in 0..100 {
        let n = r.random_range(3..12);
        let task = words(&mut r, &vocab, n).join(" ");
        let n = r.random_range(4..16);
        let chosen = words(&mut r, &vocab, n).join(" ");
        let n = r.random_range(4..16);
        let rejected = words(&mut r, &vocab, n).join(" ");
        let p = pair(&format!("d{draw}"), Criterion::FC, Language::Python, "X", &task, &chosen, &rejected);
        let lm = ToyLM::fit([chosen.as_str(), rejected.as_str(), task.as_str()], 0.1);
        let pf = PairFeatures::new(&p, &lm);
        let stage = if draw % 2 == 0 { TrainStage::Pm } else { TrainStage::Pt };
        let cfg = LossConfig { literal_center_sign: draw % 5 == 4, ..LossConfig::for_stage(stage) };
        let mut model = ToyRewardModel::zeros();
        let active: BTreeSet<usize> = pf.chosen.0.iter().chain(&pf.rejected.0).map(|(i, _)| *i).collect();
        for &i in &active {
            model.weights[i] = r.random_range(-1.0..1.0);
        }
        let analytic = train::grad_parts(&pf, &model, &cfg).map_err(|e| e.to_string())?;
        // One untouched coordinate must have zero gradient both ways.
        let idle = (0..).map(|k| k * 7919 % themis::scorer::FEATURE_DIM).find(|k| !active.contains(k)).unwrap();
        for &i in active.iter().chain(std::iter::once(&idle)) {
            let total = |delta: f64| {
                let mut m = model.clone();
                m.weights[i] += delta;
                train::loss_parts(&pf, &m, &cfg).unwrap().total
            };
            let fd = (total(H) - total(-H)) / (2.0 * H);
            let a = analytic.get(&i).copied().unwrap_or(0.0);
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(FLOOR);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    ensure(worst < TOL, format!("max relative error {worst:.2e} >= {TOL:e}"))?;
    let zero = pair("z", Criterion::FC, Language::Python, "X", "t", "a b", "c d");
    let lm = ToyLM::fit(["a b"], 0.1);
    let parts = train::loss(&zero, &ToyRewardModel::zeros(), &lm, &LossConfig::for_stage(TrainStage::Pm)).unwrap();
    let bt_err = (parts.bt - (-(0.5f64).ln())).abs();
    ensure(bt_err <= 1e-12, format!("bt at delta 0 off by {bt_err:e}"))?;
    Ok(format!("100 draws, {checked} coordinates, max rel err {worst:.2e} < 1e-5 (denominator floor 1e-3); bt(0) err {bt_err:.1e}"))
}

// 2 ------------------------------------------------------------------------

/// Chosen responses open with `begin check bounds`, rejected ones with
/// `begin skip bounds`; bodies are random. A weight on the two marker
/// bigrams separates every pair.
pub fn separable_pairs(n: usize, seed: u64) -> Vec<PreferencePair> {
    let mut r = rng(seed);
    let vocab = vocabulary(500);
    (0..n)
        .map(|i| {
            let task = words(&mut r, &vocab, 8).join(" ");
            let chosen = format!("begin check bounds {}", words(&mut r, &vocab, 12).join(" "));
            let rejected = format!("begin skip bounds {}", words(&mut r, &vocab, 12).join(" "));
            let c = Criterion::ALL[i % 5];
            pair(&format!("s{i}"), c, Language::Python, "Synthetic", &task, &chosen, &rejected)
        })
        .collect()
}

fn c2_training() -> Result<String, String> {
    let data = separable_pairs(2000, 2);
    let loss = LossConfig::for_stage(TrainStage::Pm);
    ensure(loss.lambda == 0.25 && loss.mu == 0.001, "PM coefficients")?;
    let cfg = TrainConfig { epochs: 2, seed: 2, ..TrainConfig::default() };
    let res = train::train_toy(&data, &loss, &cfg, None).map_err(|e| e.to_string())?;
    let acc = res.curve.last().unwrap().accuracy;
    ensure(acc >= 0.95, format!("accuracy after 2 epochs {acc:.4} < 0.95"))?;
    let frozen = TrainConfig { lr: 0.0, ..cfg };
    let still = train::train_toy(&data, &loss, &frozen, None).map_err(|e| e.to_string())?;
    let same = still.curve.iter().all(|e| e.accuracy == still.initial_accuracy) && still.state.model == ToyRewardModel::zeros();
    ensure(same, "lr=0 changed accuracy or weights")?;
    Ok(format!(
        "2000 pairs, accuracy {:.4} -> {:.4} in 2 epochs (>= 0.95); lr=0 keeps {:.4}",
        res.initial_accuracy, acc, still.initial_accuracy
    ))
}

// 3 ------------------------------------------------------------------------

fn c3_sampler() -> Result<String, String> {
    let s = MixSampler { rng_seed: 3, ..MixSampler::default() };
    ensure((s.p_none, s.p_all, s.p_single) == (0.15, 0.20, 0.65), "default mix")?;
    let n = 100_000u64;
    let mut counts = [0u64; 3];
    for key in 0..n {
        let slot = match s.mode_for(key, Criterion::ALL[(key % 5) as usize]) {
            train::CriteriaMode::None => 0,
            train::CriteriaMode::All => 1,
            train::CriteriaMode::Single(c) => {
                ensure(c == Criterion::ALL[(key % 5) as usize], "single mode must keep the pair's criterion")?;
                2
            }
        };
        counts[slot] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
    for (f, p) in freq.iter().zip([0.15, 0.20, 0.65]) {
        ensure((f - p).abs() <= 0.01, format!("frequency {f:.4} vs {p}"))?;
    }
    Ok(format!("none/all/single = {:.4}/{:.4}/{:.4} within 0.01", freq[0], freq[1], freq[2]))
}

// 4 ------------------------------------------------------------------------

fn c4_dedup() -> Result<String, String> {
    let cfg = FilterConfig::pm();
    ensure(cfg.shingle_size == 20 && cfg.jaccard_threshold == 0.75, "dedup constants")?;
    let pairs = dedup_fixture(4);
    let (verdicts, under) = filter::minhash_dedup(&pairs, &cfg);
    let got: BTreeSet<usize> = verdicts.iter().enumerate().filter(|(_, v)| !v.passed()).map(|(i, _)| i).collect();
    let want = brute_force_drops(&pairs, 20, 0.75);
    ensure(under.is_empty(), "no document should be under-shingled")?;
    ensure(got == want, format!("drop sets differ: minhash-only {:?}, oracle-only {:?}", got.difference(&want).collect::<Vec<_>>(), want.difference(&got).collect::<Vec<_>>()))?;
    ensure(want.len() >= 30, format!("fixture planted too few duplicates ({})", want.len()))?;
    Ok(format!("200 docs, {} dropped by both", got.len()))
}

// 5 ------------------------------------------------------------------------

fn c5_decontam() -> Result<String, String> {
    let mut r = rng(5);
    let vocab = vocabulary(5000);
    let bench: Vec<Vec<String>> = (0..50).map(|_| words(&mut r, &vocab, 40)).collect();
    let mut train_prompts: Vec<Vec<String>> = (0..500).map(|_| words(&mut r, &vocab, 40)).collect();
    let mut truth = BTreeSet::new();
    let targets: Vec<usize> = (0..500).collect::<Vec<_>>().choose_multiple(&mut r, 40).copied().collect();
    for (k, &t) in targets.iter().enumerate() {
        let b = &bench[k % 50];
        let start = r.random_range(1..b.len() - 14);
        let at = r.random_range(1..train_prompts[t].len() - 14);
        if k < 20 {
            train_prompts[t].splice(at..at + 13, b[start..start + 13].iter().cloned());
            truth.insert(t);
        } else {
            // 12 matching tokens, fenced by tokens that differ from the
            // benchmark's neighbours on both sides.
            train_prompts[t].splice(at..at + 12, b[start..start + 12].iter().cloned());
            for (pos, avoid) in [(at - 1, &b[start - 1]), (at + 12, &b[start + 12])] {
                while &train_prompts[t][pos] == avoid {
                    train_prompts[t][pos] = vocab[r.random_range(0..vocab.len())].clone();
                }
            }
        }
    }
    let bench_text: Vec<String> = bench.iter().map(|b| b.join(" ")).collect();
    let pairs: Vec<PreferencePair> = train_prompts
        .iter()
        .enumerate()
        .map(|(i, t)| pair(&format!("t{i}"), Criterion::FC, Language::Python, "X", &t.join(" "), "a", "b"))
        .collect();
    let index = NgramIndex::build(bench_text.iter().map(String::as_str), 13);
    let got: BTreeSet<usize> = filter::decontaminate(&pairs, &index)
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v, Verdict::Reject { reason, .. } if reason == "ngram_overlap"))
        .map(|(i, _)| i)
        .collect();
    // Naive scan over every 13-token window pair.
    let oracle: BTreeSet<usize> = train_prompts
        .iter()
        .enumerate()
        .filter(|(_, t)| t.windows(13).any(|w| bench.iter().any(|b| b.windows(13).any(|bw| bw == w))))
        .map(|(i, _)| i)
        .collect();
    ensure(oracle == truth, "fixture check: oracle disagrees with the planted overlaps")?;
    ensure(got == truth, format!("dropped {:?}, expected {:?}", got, truth))?;
    Ok("500x50 fixture, exactly the 20 planted 13-gram overlaps dropped, 20 12-gram near misses kept".into())
}

// 6 ------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Label {
    Pass,
    Reject(&'static str),
}

fn c6_mining() -> Result<String, String> {
    let cfg = MiningConfig::default();
    ensure(
        (cfg.min_stars, cfg.min_contributors, cfg.min_issues, cfg.message_len_min, cfg.message_len_max) == (15, 5, 10, 10, 15000),
        "mining thresholds",
    )?;
    let mut r = rng(6);
    let mut records: Vec<(CommitRecord, Label)> = Vec::new();
    let mut replies = Vec::new();
    let at = |y, m, d, h, mi, s| Utc.with_ymd_and_hms(y, m, d, h, mi, s).unwrap();
    for i in 0..1000usize {
        let language = if i % 2 == 0 { Language::Python } else { Language::JavaScript };
        let (new, old) = code(language, &mut r);
        let (criterion, message) = SINGLE_CRITERION_MESSAGES[i % 5];
        let sha = format!("{i:040x}");
        let mut c = commit(&sha, &format!("org/repo{}", i % 37), language, message, &old, &new);
        let mut ratings: Vec<(Criterion, u8)> = vec![(criterion, 5)];
        let label = match i % 40 {
            0 => {
                c.license = "proprietary".into();
                Label::Reject("license")
            }
            1 => {
                c.message = "fix memory".into(); // 10 chars
                Label::Reject("message_length")
            }
            2 => {
                c.message = format!("fix memory {}", "x".repeat(15000 - 11));
                Label::Reject("message_length")
            }
            3 => {
                c.message = "Initial commit".into();
                Label::Reject("blocklist")
            }
            4 => {
                c.message = "Merge branch 'feature/speedup' into main".into();
                Label::Reject("blocklist")
            }
            5 | 6 => {
                c.stars = 14;
                Label::Reject("stars")
            }
            7 | 8 => {
                c.contributors = 4;
                Label::Reject("contributors")
            }
            9 | 10 => {
                c.issues = 9;
                Label::Reject("issues")
            }
            11 => {
                c.authored_at = at(2019, 5, 31, 23, 59, 59);
                Label::Reject("date")
            }
            12 => {
                c.authored_at = at(2021, 2, 1, 0, 0, 0);
                Label::Reject("date")
            }
            13 | 14 => {
                c.merged_pr = false;
                Label::Reject("merged_pr")
            }
            15 => {
                c.reverted = true;
                Label::Reject("reverted")
            }
            16 => {
                c.message = "tweak wording of the greeting".into();
                Label::Reject("no_criteria")
            }
            17 | 18 => {
                ratings = vec![(criterion, 2)];
                Label::Reject("judge_rejected")
            }
            19 => {
                c.message = "fix bug and make the lookup loop faster".into();
                ratings = vec![(Criterion::FC, 5), (Criterion::EE, 5)];
                Label::Reject("multi_purpose")
            }
            // Boundary values that must pass.
            20 => {
                c.stars = 15;
                c.contributors = 5;
                c.issues = 10;
                Label::Pass
            }
            21 => {
                c.message = "fix memory.".into(); // 11 chars
                ratings = vec![(Criterion::ME, 5)];
                Label::Pass
            }
            22 => {
                c.message = format!("fix memory {}", "x".repeat(15000 - 12));
                ratings = vec![(Criterion::ME, 5)];
                Label::Pass
            }
            23 => {
                c.authored_at = at(2019, 6, 1, 0, 0, 0);
                Label::Pass
            }
            24 => {
                c.authored_at = at(2021, 1, 31, 23, 59, 59);
                Label::Pass
            }
            25 => {
                c.message = "fix bug and make the lookup loop faster".into();
                ratings = vec![(Criterion::FC, 5), (Criterion::EE, 4)];
                Label::Pass
            }
            _ => Label::Pass,
        };
        let key = format!("{}@{}", c.repo, c.commit_sha);
        for (crit, rating) in &ratings {
            for j in ["j1", "j2"] {
                replies.push((j, format!("{key}:{}", crit.as_str()), rating_reply(*rating)));
            }
        }
        if i % 3 == 0 {
            c.extra.insert("instruction".into(), Value::String(instruction(&mut r, &format!("t{i}"))));
        } else {
            replies.push(("j1", format!("{key}:instruction"), instruction_reply(&instruction(&mut r, &format!("t{i}")))));
        }
        records.push((c, label));
    }
    let j1 = ReplayJudge::new("j1", replies.iter().filter(|x| x.0 == "j1").map(|x| (x.1.clone(), x.2.clone())));
    let j2 = ReplayJudge::new("j2", replies.iter().filter(|x| x.0 == "j2").map(|x| (x.1.clone(), x.2.clone())));
    let judges: Vec<&dyn JudgeClient> = vec![&j1, &j2];
    let svc = MiningServices { judges, instruction_judge: None, classifier: None };
    let recs: Vec<CommitRecord> = records.iter().map(|(c, _)| c.clone()).collect();
    let out = mining::mine(&recs, &cfg, &svc).map_err(|e| e.to_string())?;
    let mut want: BTreeMap<String, usize> = BTreeMap::new();
    let mut want_pairs = 0;
    for (_, l) in &records {
        match l {
            Label::Pass => want_pairs += 1,
            Label::Reject(reason) => *want.entry(reason.to_string()).or_insert(0) += 1,
        }
    }
    let got = out.reject_counts();
    ensure(got == want, format!("reject counts {got:?} != labels {want:?}"))?;
    ensure(out.pairs.len() == want_pairs, format!("{} pairs, expected {want_pairs}", out.pairs.len()))?;
    Ok(format!("1000 records, {want_pairs} pairs, {} reasons matched exactly", want.len()))
}

// 7 ------------------------------------------------------------------------

/// Rank by counting: rank = #smaller + (#equal + 1) / 2.
fn oracle_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let eq = xs.iter().filter(|y| *y == x).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

/// Deterministic scorer with frequent ties that fails on responses
/// containing `FAIL`.
struct HashScorer;

impl Scorer for HashScorer {
    fn model_id(&self) -> &str {
        "hash"
    }
    fn score_unchecked(&self, req: &ScoreRequest) -> Result<ScoreResponse, ScoreError> {
        if req.response.contains("FAIL") {
            return Err(ScoreError::EndpointUnreachable("injected".into()));
        }
        let reward = (themis::text::fnv1a64(req.response.as_bytes()) % 4) as f64;
        Ok(ScoreResponse { reward, model_id: "hash".into(), latency_ms: 0 })
    }
}

fn c7_metrics() -> Result<String, String> {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..1000 {
        let n = r.random_range(1..=40);
        let levels = r.random_range(2..12);
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 * 0.25).collect();
        let ys: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0f64)).collect();
        let want = if n < 2 { None } else { oracle_pearson(&oracle_ranks(&xs), &oracle_ranks(&ys)) };
        match (metrics::spearman(&xs, &ys), want) {
            (Some(a), Some(b)) => {
                worst = worst.max((a - b).abs());
                compared += 1;
            }
            (None, None) => {}
            (a, b) => return Err(format!("definedness differs: {a:?} vs {b:?} on {xs:?}")),
        }
    }
    ensure(worst <= 1e-12, format!("spearman off by {worst:e}"))?;

    for f in 0..1000 {
        let problems: BTreeMap<String, Vec<RankedCandidate>> = (0..r.random_range(1..6))
            .map(|p| {
                let len = r.random_range(1..=40);
                let list = (0..len)
                    .map(|c| RankedCandidate {
                        problem_id: format!("p{p}"),
                        candidate_id: Some(format!("c{c:02}")),
                        solution: String::new(),
                        rm_score: r.random_range(0..6) as f64,
                        ground_truth_pass_fraction: [0.0, 0.5, 1.0][r.random_range(0..3)],
                        extra: Default::default(),
                    })
                    .collect();
                (format!("p{p}"), list)
            })
            .collect();
        let max_k = problems.values().map(Vec::len).min().unwrap();
        for miss in [false, true] {
            let mut prev: Option<themis::metrics::HitsResult> = None;
            for k in 1..=max_k {
                let h = metrics::hits_at_k(&problems, k, miss).map_err(|e| e.to_string())?;
                if let Some(p) = &prev {
                    ensure(h.mean >= p.mean, format!("fixture {f}: hits@{k} {} < hits@{} {}", h.mean, k - 1, p.mean))?;
                    ensure(p.hits.iter().all(|(id, hit)| !hit || h.hits[id]), format!("fixture {f}: a hit was lost at k={k}"))?;
                }
                prev = Some(h);
            }
        }
    }

    let mut reports = 0;
    for rep in 0..200 {
        let n = r.random_range(1..80);
        let pairs: Vec<PreferencePair> = (0..n)
            .map(|i| {
                let fail = rep % 4 == 0 && r.random_range(0..20) == 0;
                let chosen = format!("c{} {}", r.random_range(0..50), if fail { "FAIL" } else { "" });
                let subset = ["A", "B", "C"][r.random_range(0..3)];
                pair(
                    &format!("r{rep}-{i}"),
                    Criterion::ALL[r.random_range(0..5)],
                    Language::ALL[r.random_range(0..8)],
                    subset,
                    "task",
                    &chosen,
                    &format!("r{}", r.random_range(0..50)),
                )
            })
            .collect();
        let mode = [PromptMode::None, PromptMode::All, PromptMode::Single][rep % 3];
        let report = metrics::pairwise_accuracy(&pairs, &HashScorer, mode, 4).map_err(|e| e.to_string())?;
        ensure(report.decomposition_holds(), format!("report {rep} breaks the decomposition identity"))?;
        let adv = metrics::adversarial_accuracy(&pairs, &HashScorer, mode, 4).map_err(|e| e.to_string())?;
        ensure(adv.report.decomposition_holds(), format!("adversarial report {rep} breaks the identity"))?;
        let fam: u64 = adv.by_family.values().map(|t| t.n).sum();
        ensure(fam == adv.report.overall.n, "family counts do not add up")?;
        reports += 2;
    }
    Ok(format!(
        "spearman max diff {worst:.1e} over {compared} lists (<= 1e-12); hits@k monotone on 1000 fixtures; identity holds on {reports} reports"
    ))
}

// 8 ------------------------------------------------------------------------

fn manifest_corpus(m: &BenchmarkManifest) -> Vec<PreferencePair> {
    let mut out = Vec::new();
    for (cell, n) in &m.cells {
        for i in 0..*n {
            out.push(pair(
                &format!("{}/{}/{}/{i}", cell.subset, cell.criterion, cell.language),
                cell.criterion,
                cell.language,
                &cell.subset,
                "task",
                "good",
                "bad",
            ));
        }
    }
    out.shuffle(&mut rng(8));
    out
}

fn c8a_zero_deltas() -> Result<String, String> {
    let m = BenchmarkManifest::code_reward_bench();
    let (pairs, audit) = bench::assemble(manifest_corpus(&m), &m, AuditMode::Strict).map_err(|e| e.to_string())?;
    ensure(audit.is_exact(), format!("{} flagged cells", audit.flagged().count()))?;
    ensure(audit.rows.iter().all(|r| r.delta == 0), "non-zero delta")?;
    ensure(pairs.len() as u64 == m.cell_sum(), "pair count")?;
    Ok(format!("{} cells, all deltas 0, {} pairs", audit.rows.len(), pairs.len()))
}

fn c8b_total() -> Result<String, String> {
    let m = BenchmarkManifest::code_reward_bench();
    let (_, audit) = bench::assemble(manifest_corpus(&m), &m, AuditMode::Lenient).map_err(|e| e.to_string())?;
    let total = audit.actual_total();
    ensure(total == 8866, format!("assembled total {total} != 8866; the published per-cell counts sum to {}", m.cell_sum()))?;
    Ok(format!("total {total}"))
}

// 9 ------------------------------------------------------------------------

fn themis(dir: &Path, workers: &str, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_themis"))
        .current_dir(dir)
        .args(["--workers", workers])
        .args(args)
        .env_remove("THEMIS_SCORER_URL")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("themis {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(())
}

pub fn run_pipeline(dir: &Path, workers: &str) -> Result<(), String> {
    write_pipeline_workspace(dir);
    themis(dir, workers, &["mine", "--config", "config.toml", "--in", "commits.jsonl", "--out", "mined.jsonl"])?;
    themis(dir, workers, &["filter", "--config", "config.toml", "--in", "mined.jsonl", "--out", "clean.jsonl"])?;
    themis(dir, workers, &["assemble", "--config", "config.toml", "--in", "clean.jsonl", "--out", "bench.jsonl"])?;
    themis(dir, workers, &["train-toy", "--config", "config.toml", "--data", "clean.jsonl", "--out", "weights.json"])?;
    themis(
        dir,
        workers,
        &["eval", "--config", "config.toml", "--bench", "bench.jsonl", "--scorer", "toy:weights.json", "--out", "report.md"],
    )?;
    Ok(())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        let mut bytes = std::fs::read(&p).unwrap();
        if name.ends_with(".manifest.json") {
            let mut v: Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("created_at");
            v.as_object_mut().unwrap().remove("workers");
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

fn c9_determinism() -> Result<String, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(a.path(), "1")?;
    run_pipeline(b.path(), "4")?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    ensure(sa.keys().eq(sb.keys()), "different output file sets")?;
    let differing: Vec<&String> = sa.keys().filter(|k| sa[*k] != sb[*k]).collect();
    ensure(differing.is_empty(), format!("outputs differ: {differing:?}"))?;
    let bench = records(&String::from_utf8_lossy(&sa["bench.jsonl"])).len();
    ensure(bench > 0, "empty benchmark, nothing compared")?;
    Ok(format!("{} files byte-identical across runs with 1 and 4 workers ({bench} benchmark pairs)", sa.len()))
}
