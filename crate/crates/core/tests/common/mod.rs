#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use themis::mining::judge::RecordedReply;
use themis::text::TokenStream;
use themis::types::{CommitRecord, Criterion, Language, PreferencePair, Split};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ne", "su", "ta", "ri", "po", "ve", "zu", "ba", "de", "fi", "go", "hu", "ja",
    "ke", "li", "mo", "nu", "pa", "qui", "ro", "sa", "te", "vi", "wo", "xa", "ye", "zo",
];

/// `n` distinct lowercase pseudo-words.
pub fn vocabulary(n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let s = SYLLABLES.len();
    let mut i = 0usize;
    while out.len() < n {
        let w = format!("{}{}{}", SYLLABLES[i % s], SYLLABLES[(i / s) % s], SYLLABLES[(i / (s * s)) % s]);
        out.push(w);
        i += 1;
    }
    out
}

pub fn words(rng: &mut ChaCha8Rng, vocab: &[String], n: usize) -> Vec<String> {
    (0..n).map(|_| vocab.choose(rng).unwrap().clone()).collect()
}

const COMMON: &[&str] = &[
    "the", "of", "and", "to", "a", "in", "is", "that", "for", "it", "with", "on", "this", "from",
    "each", "list", "string", "number", "numbers", "value", "values", "array", "input", "output",
    "integer", "file", "data", "class", "method", "first", "sum", "count", "order", "result",
];

/// An English-looking task prompt that passes the default language and
/// perplexity gates; `tag` makes it unique.
pub fn instruction(rng: &mut ChaCha8Rng, tag: &str) -> String {
    let body: Vec<&str> = (0..14).map(|_| *COMMON.choose(rng).unwrap()).collect();
    format!("Write a function {tag} that should return the {} .", body.join(" "))
}

pub fn ident(rng: &mut ChaCha8Rng) -> String {
    let a = SYLLABLES.choose(rng).unwrap();
    let b = SYLLABLES.choose(rng).unwrap();
    format!("{a}{b}_{}", rng.random_range(0..10_000))
}

/// A small nested function as `(new, old)`; the old version keeps an
/// unused copy of its input.
pub fn code(language: Language, rng: &mut ChaCha8Rng) -> (String, String) {
    let (name, xs, acc) = (ident(rng), ident(rng), ident(rng));
    let (n1, n2, n3) = (rng.random_range(0..100), rng.random_range(0..100), rng.random_range(2..9));
    match language {
        Language::Python => {
            let f = |extra: &str| {
                format!(
                    "def {name}({xs}):\n{extra}    {acc} = {n1}\n    for item in {xs}:\n        if item > {n2}:\n            {acc} += item * {n3}\n    return {acc}\n"
                )
            };
            (f(""), f(&format!("    tmp = list({xs})\n")))
        }
        Language::JavaScript => {
            let f = |extra: &str| {
                format!(
                    "function {name}({xs}) {{\n{extra}  let {acc} = {n1};\n  for (const item of {xs}) {{\n    if (item > {n2}) {{\n      {acc} += item * {n3};\n    }}\n  }}\n  return {acc};\n}}\n"
                )
            };
            (f(""), f(&format!("  const tmp = [...{xs}];\n")))
        }
        other => panic!("no code template for {other}"),
    }
}

pub fn pair(
    id: &str,
    criterion: Criterion,
    language: Language,
    subset: &str,
    task: &str,
    chosen: &str,
    rejected: &str,
) -> PreferencePair {
    PreferencePair {
        id: id.to_string(),
        criteria_prompt: None,
        task_prompt: task.to_string(),
        chosen: chosen.to_string(),
        rejected: rejected.to_string(),
        criterion,
        language,
        subset: subset.to_string(),
        split: Split::Eval,
        extra: Map::new(),
    }
}

/// A commit that passes every record gate of the eval-window defaults.
pub fn commit(sha: &str, repo: &str, language: Language, message: &str, old: &str, new: &str) -> CommitRecord {
    CommitRecord {
        commit_sha: sha.to_string(),
        repo: repo.to_string(),
        license: "mit".into(),
        language,
        message: message.to_string(),
        old_file: old.to_string(),
        new_file: new.to_string(),
        authored_at: Utc.with_ymd_and_hms(2020, 6, 15, 12, 0, 0).unwrap(),
        stars: 120,
        contributors: 12,
        issues: 40,
        merged_pr: true,
        reverted: false,
        extra: Map::new(),
    }
}

/// Commit messages that tag exactly one criterion with the shipped terms.
pub const SINGLE_CRITERION_MESSAGES: &[(Criterion, &str)] = &[
    (Criterion::FC, "fix bug when the input list is empty"),
    (Criterion::EE, "make the lookup loop faster"),
    (Criterion::ME, "fix memory growth in the reader"),
    (Criterion::RM, "break down the long handler"),
    (Criterion::SH, "avoid directory traversal in upload path"),
];

pub fn rating_reply(rating: u8) -> String {
    format!("[SUMMARY]The change is focused.[/SUMMARY]\n[RATING]{rating}[/RATING]")
}

pub fn instruction_reply(text: &str) -> String {
    format!("[INSTRUCTION]{text}[/INSTRUCTION]")
}

pub fn reply(judge: &str, key: String, reply: String) -> RecordedReply {
    RecordedReply { judge_id: judge.to_string(), key, reply }
}

pub fn write_jsonl<T: serde::Serialize>(path: &Path, rows: &[T]) {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).unwrap());
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Inputs for a full mine -> filter -> assemble -> train-toy -> eval run,
/// written into `dir` with relative paths only.
pub fn write_pipeline_workspace(dir: &Path) {
    let mut r = rng(2024);
    let langs = [Language::Python, Language::JavaScript];
    let mut commits = Vec::new();
    let mut replies = Vec::new();
    for i in 0..120 {
        let language = langs[i % 2];
        let (criterion, message) = SINGLE_CRITERION_MESSAGES[i % SINGLE_CRITERION_MESSAGES.len()];
        let (new, old) = code(language, &mut r);
        let repo = format!("org{}/proj{}", i % 7, i % 11);
        let sha = format!("{:040x}", 0x5eed_0000_u64 + i as u64);
        let mut c = commit(&sha, &repo, language, message, &old, &new);
        match i % 12 {
            7 => c.stars = 3,
            8 => c.merged_pr = false,
            _ => {}
        }
        let key = format!("{repo}@{sha}");
        let rating = if i % 13 == 5 { 2 } else { 5 };
        for j in ["j1", "j2"] {
            replies.push(reply(j, format!("{key}:{}", criterion.as_str()), rating_reply(rating)));
        }
        let task = instruction(&mut r, &format!("task{i}"));
        replies.push(reply("j1", format!("{key}:instruction"), instruction_reply(&task)));
        commits.push(c);
    }
    // One contaminated instruction: it repeats a benchmark prompt verbatim.
    let bench_prompt = "Write a function that returns the sum of each value in the input list of integers from the file";
    replies.retain(|x| x.key != format!("org3/proj3@{:040x}:instruction", 0x5eed_0000_u64 + 3));
    replies.push(reply("j1", format!("org3/proj3@{:040x}:instruction", 0x5eed_0000_u64 + 3), instruction_reply(bench_prompt)));
    write_jsonl(&dir.join("commits.jsonl"), &commits);
    write_jsonl(&dir.join("judges.jsonl"), &replies);
    let bench = pair("bench-0", Criterion::FC, Language::Python, "HumanEvalPack", bench_prompt, "def f(x):\n    return x\n", "def f(x):\n    pass\n");
    write_jsonl(&dir.join("bench_prompts.jsonl"), &[bench]);
    let mut manifest = String::from("name = \"fixture\"\ntotal = 60\n");
    for c in Criterion::ALL {
        manifest.push_str(&format!(
            "\n[[group]]\nsubset = \"CommitPref\"\ncriterion = \"{}\"\ncounts = {{ \"Python\" = 6, \"JavaScript\" = 6 }}\n",
            c.as_str()
        ));
    }
    std::fs::write(dir.join("manifest.toml"), manifest).unwrap();
    std::fs::write(
        dir.join("config.toml"),
        "rng_seed = 11\n\n[mining]\npreset = \"eval\"\n\n[[mining.judges]]\nkind = \"replay\"\nid = \"j1\"\npath = \"judges.jsonl\"\n\n\
         [[mining.judges]]\nkind = \"replay\"\nid = \"j2\"\npath = \"judges.jsonl\"\n\n[filter]\npreset = \"pm\"\nbench_prompts = [\"bench_prompts.jsonl\"]\n\n\
         [assemble]\nmanifest = \"manifest.toml\"\n\n[train]\nstage = \"pm\"\nepochs = 2\nmix = true\n\n[eval]\ncriteria_mode = \"single\"\n",
    )
    .unwrap();
}

pub fn json_lines(text: &str) -> Vec<Value> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).unwrap()).collect()
}

/// Records of a JSONL output, without the schema header line.
pub fn records(text: &str) -> Vec<Value> {
    json_lines(text).into_iter().filter(|x| x.get("_schema").is_none()).collect()
}

pub fn edit(tokens: &[String], positions: &[usize], vocab: &[String], r: &mut ChaCha8Rng) -> Vec<String> {
    let mut out = tokens.to_vec();
    for &p in positions {
        loop {
            let w = vocab[r.random_range(0..vocab.len())].clone();
            if w != out[p] {
                out[p] = w;
                break;
            }
        }
    }
    out
}

/// Exact Jaccard over string shingles with the same greedy keep-first rule,
/// comparing every pair.
pub fn brute_force_drops(pairs: &[PreferencePair], size: usize, threshold: f64) -> BTreeSet<usize> {
    let docs: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| TokenStream::normalize_all([p.task_prompt.as_str(), &p.chosen, &p.rejected]).tokens().to_vec())
        .collect();
    let sets: Vec<HashSet<String>> = docs.iter().map(|d| d.windows(size).map(|w| w.join(" ")).collect()).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = BTreeSet::new();
    for i in 0..docs.len() {
        if sets[i].is_empty() {
            continue;
        }
        let dup = kept.iter().any(|&j| {
            let inter = sets[i].intersection(&sets[j]).count();
            let union = sets[i].len() + sets[j].len() - inter;
            inter as f64 / union as f64 >= threshold
        });
        if dup {
            dropped.insert(i);
        } else {
            kept.push(i);
        }
    }
    dropped
}

/// 200 documents of 600 tokens: 140 unrelated bases, 20 exact copies,
/// 20 one-token edits (J >= 0.93) and 20 distractors with six spread edits
/// (J around 0.66), shuffled. Keeps clear of the 0.75-0.80 band where
/// 16x8 banding misses a noticeable share of true duplicates.
pub fn dedup_fixture(seed: u64) -> Vec<PreferencePair> {
    let mut r = rng(seed);
    let vocab = vocabulary(3000);
    let len = 600;
    let mut docs: Vec<Vec<String>> = (0..140).map(|_| words(&mut r, &vocab, len)).collect();
    for k in 0..60 {
        let base = docs[r.random_range(0..140)].clone();
        let doc = match k % 3 {
            0 => base,
            1 => edit(&base, &[r.random_range(0..len)], &vocab, &mut r),
            _ => edit(&base, &[50, 150, 250, 350, 450, 550], &vocab, &mut r),
        };
        docs.push(doc);
    }
    docs.shuffle(&mut r);
    docs.iter()
        .enumerate()
        .map(|(i, d)| {
            let (head, tail) = d.split_at(10);
            pair(&format!("doc{i:03}"), Criterion::FC, Language::Python, "X", &head.join(" "), &tail.join(" "), "x")
        })
        .collect()
}
