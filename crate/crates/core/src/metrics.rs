//! Evaluation metrics: pairwise preference accuracy with breakdowns,
//! listwise Hits@k and rank correlation, adversarial accuracy, and report
//! rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::{all_criteria_prompt, single_criterion_prompt};
use crate::scorer::{score_batch, ScoreError, ScoreRequest, Scorer};
use crate::types::{Criterion, Language, PreferencePair, RankedCandidate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("problem {problem_id} has {len} candidates, need at least {k}")]
    ListTooShort { problem_id: String, len: usize, k: usize },
    #[error("problem {problem_id} has {len} candidates, expected {expected}")]
    ListSizeMismatch { problem_id: String, len: usize, expected: usize },
    #[error(transparent)]
    Scorer(#[from] ScoreError),
}

/// System prompt shown to the scorer during pairwise evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    None,
    All,
    #[default]
    Single,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::None => "none",
            PromptMode::All => "all",
            PromptMode::Single => "single",
        }
    }

    pub fn prompt_for(self, criterion: Criterion) -> Option<String> {
        match self {
            PromptMode::None => None,
            PromptMode::All => Some(all_criteria_prompt()),
            PromptMode::Single => Some(single_criterion_prompt(criterion)),
        }
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(PromptMode::None),
            "all" => Ok(PromptMode::All),
            "single" => Ok(PromptMode::Single),
            _ => Err(format!("unknown criteria mode {s:?} (expected none, all or single)")),
        }
    }
}

/// Integer outcome counts for one group of pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub n: u64,
    pub correct: u64,
    pub ties: u64,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }

    fn add(&mut self, correct: bool, tie: bool) {
        self.n += 1;
        self.correct += u64::from(correct);
        self.ties += u64::from(tie);
    }

    fn merge(&mut self, other: &Tally) {
        self.n += other.n;
        self.correct += other.correct;
        self.ties += other.ties;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub criteria_mode: PromptMode,
    pub n_pairs: u64,
    pub ties: u64,
    pub overall_accuracy: f64,
    pub overall: Tally,
    pub by_criterion: BTreeMap<Criterion, Tally>,
    pub by_language: BTreeMap<Language, Tally>,
    pub by_subset: BTreeMap<String, Tally>,
    /// True when some subsets were dropped because scoring failed.
    pub partial: bool,
    pub failed_subsets: Vec<String>,
    pub errors: Vec<PairError>,
}

impl EvalReport {
    /// Overall counts equal the sum over every partition, and the overall
    /// accuracy equals the count-weighted mean of cell accuracies.
    pub fn decomposition_holds(&self) -> bool {
        fn sum<'a>(cells: impl Iterator<Item = &'a Tally>) -> Tally {
            let mut t = Tally::default();
            cells.for_each(|c| t.merge(c));
            t
        }
        let parts = [
            sum(self.by_criterion.values()),
            sum(self.by_language.values()),
            sum(self.by_subset.values()),
        ];
        parts.iter().all(|p| *p == self.overall)
            && self.overall.n == self.n_pairs
            && self.overall.ties == self.ties
            && self.overall_accuracy == self.overall.accuracy()
    }
}

/// Decision rule shared by every pairwise metric: strictly greater wins,
/// ties lose.
pub fn decide(chosen: f64, rejected: f64) -> (bool, bool) {
    (chosen > rejected, chosen == rejected)
}

fn requests(pairs: &[PreferencePair], mode: PromptMode) -> Vec<ScoreRequest> {
    pairs
        .iter()
        .flat_map(|p| {
            let sys = mode.prompt_for(p.criterion);
            [
                ScoreRequest { criteria_prompt: sys.clone(), task_prompt: p.task_prompt.clone(), response: p.chosen.clone() },
                ScoreRequest { criteria_prompt: sys, task_prompt: p.task_prompt.clone(), response: p.rejected.clone() },
            ]
        })
        .collect()
}

/// Per-pair outcome; `None` when either side failed to score.
type Outcome = Option<(bool, bool)>;

fn score_pairs(
    pairs: &[PreferencePair],
    scorer: &dyn Scorer,
    mode: PromptMode,
    max_in_flight: usize,
) -> Result<(Vec<Outcome>, Vec<PairError>), MetricsError> {
    let results = score_batch(&requests(pairs, mode), scorer, max_in_flight)?;
    let mut outcomes = Vec::with_capacity(pairs.len());
    let mut errors = Vec::new();
    for (p, rs) in pairs.iter().zip(results.chunks(2)) {
        match (&rs[0], &rs[1]) {
            (Ok(c), Ok(r)) => outcomes.push(Some(decide(c.reward, r.reward))),
            (Err(e), _) | (_, Err(e)) => {
                errors.push(PairError { id: p.id.clone(), error: e.to_string() });
                outcomes.push(None);
            }
        }
    }
    Ok((outcomes, errors))
}

fn tally(
    pairs: &[PreferencePair],
    outcomes: &[Outcome],
    model_id: &str,
    mode: PromptMode,
    errors: Vec<PairError>,
) -> EvalReport {
    let mut failed: Vec<String> = pairs
        .iter()
        .zip(outcomes)
        .filter(|(_, o)| o.is_none())
        .map(|(p, _)| p.subset.clone())
        .collect();
    failed.sort();
    failed.dedup();
    let mut r = EvalReport {
        model_id: model_id.to_string(),
        criteria_mode: mode,
        n_pairs: 0,
        ties: 0,
        overall_accuracy: 0.0,
        overall: Tally::default(),
        by_criterion: BTreeMap::new(),
        by_language: BTreeMap::new(),
        by_subset: BTreeMap::new(),
        partial: !failed.is_empty(),
        failed_subsets: Vec::new(),
        errors,
    };
    for (p, o) in pairs.iter().zip(outcomes) {
        if failed.binary_search(&p.subset).is_ok() {
            continue;
        }
        let (correct, tie) = o.expect("failed subsets were skipped");
        r.overall.add(correct, tie);
        r.by_criterion.entry(p.criterion).or_default().add(correct, tie);
        r.by_language.entry(p.language).or_default().add(correct, tie);
        r.by_subset.entry(p.subset.clone()).or_default().add(correct, tie);
    }
    r.n_pairs = r.overall.n;
    r.ties = r.overall.ties;
    r.overall_accuracy = r.overall.accuracy();
    r.failed_subsets = failed;
    r
}

/// Score both sides of every pair (exactly `2 * pairs.len()` scorer calls)
/// and aggregate. A subset containing any scoring failure is left out and the
/// report is marked partial.
pub fn pairwise_accuracy(
    pairs: &[PreferencePair],
    scorer: &dyn Scorer,
    mode: PromptMode,
    max_in_flight: usize,
) -> Result<EvalReport, MetricsError> {
    let (outcomes, errors) = score_pairs(pairs, scorer, mode, max_in_flight)?;
    Ok(tally(pairs, &outcomes, scorer.model_id(), mode, errors))
}

/// Metadata key naming the perturbation applied to an adversarial pair.
pub const PERTURBATION_KEY: &str = "perturbation";
const UNPERTURBED: &str = "unperturbed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialReport {
    pub accuracy: f64,
    pub report: EvalReport,
    pub by_family: BTreeMap<String, Tally>,
}

/// Pairwise accuracy on perturbed pairs, broken down by perturbation family.
pub fn adversarial_accuracy(
    pairs: &[PreferencePair],
    scorer: &dyn Scorer,
    mode: PromptMode,
    max_in_flight: usize,
) -> Result<AdversarialReport, MetricsError> {
    let (outcomes, errors) = score_pairs(pairs, scorer, mode, max_in_flight)?;
    let report = tally(pairs, &outcomes, scorer.model_id(), mode, errors);
    let mut by_family: BTreeMap<String, Tally> = BTreeMap::new();
    for (p, o) in pairs.iter().zip(&outcomes) {
        if report.failed_subsets.binary_search(&p.subset).is_ok() {
            continue;
        }
        let (correct, tie) = o.expect("failed subsets were skipped");
        let family = p.extra_str(PERTURBATION_KEY).unwrap_or(UNPERTURBED).to_string();
        by_family.entry(family).or_default().add(correct, tie);
    }
    Ok(AdversarialReport { accuracy: report.overall_accuracy, report, by_family })
}

/// Candidates grouped by problem id, in first-seen order within a problem.
pub fn group_problems(cands: Vec<RankedCandidate>) -> BTreeMap<String, Vec<RankedCandidate>> {
    let mut out: BTreeMap<String, Vec<RankedCandidate>> = BTreeMap::new();
    for c in cands {
        out.entry(c.problem_id.clone()).or_default().push(c);
    }
    out
}

/// Indices of `list` from best to worst: score descending, then candidate id
/// ascending, then list position.
pub fn ranking(list: &[RankedCandidate]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..list.len()).collect();
    idx.sort_by(|&a, &b| {
        list[b]
            .rm_score
            .total_cmp(&list[a].rm_score)
            .then_with(|| list[a].candidate_id.cmp(&list[b].candidate_id))
            .then(a.cmp(&b))
    });
    idx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsResult {
    pub k: usize,
    pub mean: f64,
    pub n_problems: usize,
    pub n_excluded: usize,
    pub hits: BTreeMap<String, bool>,
}

/// Mean over problems of "a fully correct candidate ranks in the top `k`".
/// Problems with no fully correct candidate are excluded, or counted as
/// misses when `count_impossible_as_miss` is set.
pub fn hits_at_k(
    problems: &BTreeMap<String, Vec<RankedCandidate>>,
    k: usize,
    count_impossible_as_miss: bool,
) -> Result<HitsResult, MetricsError> {
    let mut hits = BTreeMap::new();
    let mut excluded = 0;
    for (pid, list) in problems {
        if list.len() < k {
            return Err(MetricsError::ListTooShort { problem_id: pid.clone(), len: list.len(), k });
        }
        if !list.iter().any(RankedCandidate::fully_correct) {
            if count_impossible_as_miss {
                hits.insert(pid.clone(), false);
            } else {
                excluded += 1;
            }
            continue;
        }
        let hit = ranking(list).into_iter().take(k).any(|i| list[i].fully_correct());
        hits.insert(pid.clone(), hit);
    }
    let n = hits.len();
    let mean = if n == 0 { 0.0 } else { hits.values().filter(|h| **h).count() as f64 / n as f64 };
    Ok(HitsResult { k, mean, n_problems: n, n_excluded: excluded, hits })
}

/// 1-based ranks with ties sharing the mean of the positions they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho with average ranks; `None` when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCorrResult {
    pub list_size: usize,
    pub median: f64,
    pub n_problems: usize,
    /// Problems whose correlation is undefined (constant scores or truths).
    pub n_degenerate: usize,
    pub per_problem: BTreeMap<String, f64>,
}

/// Median over problems of Spearman(rm_score, pass fraction).
pub fn rank_corr(
    problems: &BTreeMap<String, Vec<RankedCandidate>>,
    list_size: usize,
) -> Result<RankCorrResult, MetricsError> {
    let mut per_problem = BTreeMap::new();
    let mut degenerate = 0;
    for (pid, list) in problems {
        if list.len() != list_size {
            return Err(MetricsError::ListSizeMismatch { problem_id: pid.clone(), len: list.len(), expected: list_size });
        }
        let scores: Vec<f64> = list.iter().map(|c| c.rm_score).collect();
        let truth: Vec<f64> = list.iter().map(|c| c.ground_truth_pass_fraction).collect();
        match spearman(&scores, &truth) {
            Some(rho) => {
                per_problem.insert(pid.clone(), rho);
            }
            None => degenerate += 1,
        }
    }
    let values: Vec<f64> = per_problem.values().copied().collect();
    Ok(RankCorrResult {
        list_size,
        median: median(&values).unwrap_or(0.0),
        n_problems: values.len(),
        n_degenerate: degenerate,
        per_problem,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListwiseReport {
    pub model_id: String,
    pub k: usize,
    pub list_size: usize,
    pub hits_at_k_mean: f64,
    pub rank_corr_median: f64,
    pub n_problems: usize,
    pub n_excluded: usize,
    pub n_degenerate: usize,
}

pub fn listwise_report(
    model_id: &str,
    problems: &BTreeMap<String, Vec<RankedCandidate>>,
    k: usize,
    list_size: usize,
    count_impossible_as_miss: bool,
) -> Result<ListwiseReport, MetricsError> {
    let hits = hits_at_k(problems, k, count_impossible_as_miss)?;
    let rc = rank_corr(problems, list_size)?;
    Ok(ListwiseReport {
        model_id: model_id.to_string(),
        k,
        list_size,
        hits_at_k_mean: hits.mean,
        rank_corr_median: rc.median,
        n_problems: problems.len(),
        n_excluded: hits.n_excluded,
        n_degenerate: rc.n_degenerate,
    })
}

/// Replace each candidate's `rm_score` with the scorer's reward. Candidates
/// need a `task_prompt` metadata field; those without one keep their score.
pub fn rescore_candidates(
    cands: &mut [RankedCandidate],
    scorer: &dyn Scorer,
    max_in_flight: usize,
) -> Result<(), MetricsError> {
    let idx: Vec<usize> = (0..cands.len())
        .filter(|&i| cands[i].extra.get("task_prompt").and_then(|v| v.as_str()).is_some())
        .collect();
    let reqs: Vec<ScoreRequest> = idx
        .iter()
        .map(|&i| {
            let c = &cands[i];
            let x = c.extra["task_prompt"].as_str().expect("filtered above");
            ScoreRequest::new(None, x, &c.solution)
        })
        .collect();
    for (i, r) in idx.into_iter().zip(score_batch(&reqs, scorer, max_in_flight)?) {
        cands[i].rm_score = r?.reward;
    }
    Ok(())
}

/// Truncate toward zero at `decimals` places. The value is first printed
/// with extra digits so binary representation error cannot pull a
/// terminating decimal down (0.29 stays "0.29").
pub fn fmt_trunc(x: f64, decimals: usize) -> String {
    let wide = format!("{:.*}", decimals + 6, x);
    let cut = match wide.find('.') {
        Some(dot) if decimals == 0 => wide[..dot].to_string(),
        Some(dot) => wide[..dot + 1 + decimals].to_string(),
        None => wide,
    };
    if cut.starts_with('-') && cut[1..].chars().all(|c| c == '0' || c == '.') {
        cut[1..].to_string()
    } else {
        cut
    }
}

/// Accuracy as a percentage with two decimals.
pub fn fmt_acc(acc: f64) -> String {
    fmt_trunc(acc * 100.0, 2)
}

pub fn fmt_rho(rho: f64) -> String {
    fmt_trunc(rho, 4)
}

/// Everything a report can render.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    #[serde(default)]
    pub pairwise: Vec<EvalReport>,
    #[serde(default)]
    pub listwise: Vec<ListwiseReport>,
    #[serde(default)]
    pub adversarial: Vec<AdversarialReport>,
}

impl ReportBundle {
    pub fn is_empty(&self) -> bool {
        self.pairwise.is_empty() && self.listwise.is_empty() && self.adversarial.is_empty()
    }

    pub fn extend(&mut self, other: ReportBundle) {
        self.pairwise.extend(other.pairwise);
        self.listwise.extend(other.listwise);
        self.adversarial.extend(other.adversarial);
    }
}

fn cell<K: Ord>(map: &BTreeMap<K, Tally>, key: &K) -> String {
    map.get(key).map_or_else(|| "-".to_string(), |t| fmt_acc(t.accuracy()))
}

/// Markdown and CSV renderings; identical input gives identical bytes.
pub fn emit_report(bundle: &ReportBundle) -> (String, String) {
    let mut md = String::new();
    let mut csv = String::from("table,model,mode,group,key,n,correct,ties,value\n");
    if !bundle.pairwise.is_empty() {
        md.push_str("## Criteria-level accuracy (%)\n\n| Model | Mode |");
        for c in Criterion::ALL {
            let _ = write!(md, " {} |", c.column());
        }
        md.push_str(" Overall |\n|---|---|");
        md.push_str(&"---:|".repeat(Criterion::ALL.len() + 1));
        md.push('\n');
        for r in &bundle.pairwise {
            let flag = if r.partial { " (partial)" } else { "" };
            let _ = write!(md, "| {}{flag} | {} |", r.model_id, r.criteria_mode.as_str());
            for c in Criterion::ALL {
                let _ = write!(md, " {} |", cell(&r.by_criterion, &c));
            }
            let _ = writeln!(md, " {} |", fmt_acc(r.overall_accuracy));
        }
        md.push_str("\n## Language-level accuracy (%)\n\n| Model | Mode |");
        for l in Language::ALL {
            let _ = write!(md, " {l} |");
        }
        md.push_str(" Overall |\n|---|---|");
        md.push_str(&"---:|".repeat(Language::ALL.len() + 1));
        md.push('\n');
        for r in &bundle.pairwise {
            let _ = write!(md, "| {} | {} |", r.model_id, r.criteria_mode.as_str());
            for l in Language::ALL {
                let _ = write!(md, " {} |", cell(&r.by_language, &l));
            }
            let _ = writeln!(md, " {} |", fmt_acc(r.overall_accuracy));
        }
        md.push_str("\n## Subset accuracy (%)\n\n| Model | Mode | Subset | Pairs | Ties | Accuracy |\n|---|---|---|---:|---:|---:|\n");
        for r in &bundle.pairwise {
            for (s, t) in &r.by_subset {
                let _ = writeln!(md, "| {} | {} | {s} | {} | {} | {} |", r.model_id, r.criteria_mode.as_str(), t.n, t.ties, fmt_acc(t.accuracy()));
            }
            for s in &r.failed_subsets {
                let _ = writeln!(md, "| {} | {} | {s} | - | - | failed |", r.model_id, r.criteria_mode.as_str());
            }
        }
        for r in &bundle.pairwise {
            let mode = r.criteria_mode.as_str();
            let mut row = |group: &str, key: &str, t: &Tally| {
                let _ = writeln!(csv, "pairwise,{},{mode},{group},{key},{},{},{},{}", r.model_id, t.n, t.correct, t.ties, fmt_acc(t.accuracy()));
            };
            row("overall", "all", &r.overall);
            for (c, t) in &r.by_criterion {
                row("criterion", c.as_str(), t);
            }
            for (l, t) in &r.by_language {
                row("language", l.as_str(), t);
            }
            for (s, t) in &r.by_subset {
                row("subset", s, t);
            }
        }
    }
    if !bundle.listwise.is_empty() {
        if !md.is_empty() {
            md.push('\n');
        }
        md.push_str("## Listwise re-ranking\n\n| Model | Hits@k (Mean) | Rank Corr. (Median) | Problems | Excluded | Degenerate |\n|---|---:|---:|---:|---:|---:|\n");
        for r in &bundle.listwise {
            let _ = writeln!(
                md,
                "| {} | {} (k={}) | {} (n={}) | {} | {} | {} |",
                r.model_id,
                fmt_acc(r.hits_at_k_mean),
                r.k,
                fmt_rho(r.rank_corr_median),
                r.list_size,
                r.n_problems,
                r.n_excluded,
                r.n_degenerate
            );
            let _ = writeln!(csv, "listwise,{},,hits_at_k,{},{},,,{}", r.model_id, r.k, r.n_problems, fmt_acc(r.hits_at_k_mean));
            let _ = writeln!(csv, "listwise,{},,rank_corr,{},{},,,{}", r.model_id, r.list_size, r.n_problems, fmt_rho(r.rank_corr_median));
        }
    }
    if !bundle.adversarial.is_empty() {
        if !md.is_empty() {
            md.push('\n');
        }
        md.push_str("## Adversarial accuracy (%)\n\n| Model | Mode | Perturbation | Pairs | Accuracy |\n|---|---|---|---:|---:|\n");
        for a in &bundle.adversarial {
            let (m, mode) = (&a.report.model_id, a.report.criteria_mode.as_str());
            for (f, t) in &a.by_family {
                let _ = writeln!(md, "| {m} | {mode} | {f} | {} | {} |", t.n, fmt_acc(t.accuracy()));
                let _ = writeln!(csv, "adversarial,{m},{mode},family,{f},{},{},{},{}", t.n, t.correct, t.ties, fmt_acc(t.accuracy()));
            }
            let _ = writeln!(md, "| {m} | {mode} | all | {} | {} |", a.report.n_pairs, fmt_acc(a.accuracy));
            let o = &a.report.overall;
            let _ = writeln!(csv, "adversarial,{m},{mode},overall,all,{},{},{},{}", o.n, o.correct, o.ties, fmt_acc(a.accuracy));
        }
    }
    (md, csv)
}

/// Ordering helper for callers that want problems with best-first lists.
pub fn sorted_by_rank(list: &[RankedCandidate]) -> Vec<&RankedCandidate> {
    ranking(list).into_iter().map(|i| &list[i]).collect()
}
