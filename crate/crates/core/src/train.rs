//! Preference training objective on the toy reward model.
//!
//! The loss for one pair is
//! `softplus(-(r_c - r_r)) + lambda * NLL(y_c) + mu * (r_c + r_r)^2`
//! where the NLL comes from a separate bigram LM and therefore contributes
//! nothing to the reward weights' gradient.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::prompts::{all_criteria_prompt, single_criterion_prompt};
use crate::scorer::{features, Features, ToyRewardModel, FEATURE_SPACE};
use crate::text::TokenStream;
use crate::types::{Criterion, PreferencePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainStage {
    #[serde(alias = "PT")]
    Pt,
    #[serde(alias = "PM")]
    Pm,
}

impl std::str::FromStr for TrainStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pt" => Ok(TrainStage::Pt),
            "pm" => Ok(TrainStage::Pm),
            _ => Err(format!("unknown stage {s:?} (expected pt or pm)")),
        }
    }
}

impl TrainStage {
    pub fn default_epochs(self) -> usize {
        match self {
            TrainStage::Pt => 2,
            TrainStage::Pm => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub lambda: f64,
    pub mu: f64,
    pub stage: TrainStage,
    /// Subtract the centering term instead of adding it.
    #[serde(default)]
    pub literal_center_sign: bool,
}

impl LossConfig {
    pub fn for_stage(stage: TrainStage) -> Self {
        let (lambda, mu) = match stage {
            TrainStage::Pt => (0.4, 0.01),
            TrainStage::Pm => (0.25, 0.001),
        };
        LossConfig { lambda, mu, stage, literal_center_sign: false }
    }

    fn center_sign(&self) -> f64 {
        if self.literal_center_sign {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("non-finite {term} term")]
    NonFinite { term: &'static str },
    #[error("training diverged at step {}: {source}", state.step)]
    Divergence { state: Box<TrainState>, source: Box<TrainError> },
    #[error("empty training set")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
}

const BOS: &str = "<s>";
const UNK: &str = "<unk>";

/// Add-alpha bigram language model over a closed vocabulary. Unknown tokens
/// map to `<unk>`; every sequence starts from `<s>`.
#[derive(Debug, Clone)]
pub struct ToyLM {
    index: HashMap<String, usize>,
    /// Number of predictable tokens (vocabulary plus `<unk>`).
    outcomes: usize,
    bigrams: HashMap<(usize, usize), f64>,
    context: HashMap<usize, f64>,
    alpha: f64,
}

impl ToyLM {
    pub fn fit<'a>(corpus: impl IntoIterator<Item = &'a str>, alpha: f64) -> Self {
        assert!(alpha > 0.0, "smoothing must be positive");
        let docs: Vec<Vec<String>> = corpus.into_iter().map(|t| TokenStream::normalize(t).tokens().to_vec()).collect();
        let mut index = HashMap::new();
        index.insert(UNK.to_string(), 0);
        for tok in docs.iter().flatten() {
            let n = index.len();
            index.entry(tok.clone()).or_insert(n);
        }
        let outcomes = index.len();
        index.insert(BOS.to_string(), outcomes);
        let mut lm = ToyLM { index, outcomes, bigrams: HashMap::new(), context: HashMap::new(), alpha };
        for d in &docs {
            let ids = lm.ids(d);
            for w in ids.windows(2) {
                *lm.bigrams.entry((w[0], w[1])).or_insert(0.0) += 1.0;
                *lm.context.entry(w[0]).or_insert(0.0) += 1.0;
            }
        }
        lm
    }

    fn ids(&self, tokens: &[String]) -> Vec<usize> {
        let mut out = vec![self.index[BOS]];
        out.extend(tokens.iter().map(|t| self.index.get(t).copied().unwrap_or(0)));
        out
    }

    pub fn vocab_size(&self) -> usize {
        self.outcomes
    }

    fn log_prob_ids(&self, prev: usize, next: usize) -> f64 {
        let c = self.bigrams.get(&(prev, next)).copied().unwrap_or(0.0);
        let n = self.context.get(&prev).copied().unwrap_or(0.0);
        ((c + self.alpha) / (n + self.alpha * self.outcomes as f64)).ln()
    }

    /// `log p(next | prev)` for raw tokens.
    pub fn log_prob(&self, prev: &str, next: &str) -> f64 {
        let id = |t: &str| self.index.get(t).copied().unwrap_or(0);
        self.log_prob_ids(id(prev), id(next))
    }

    /// Every predictable token, for normalization checks.
    pub fn outcomes(&self) -> Vec<&str> {
        let mut v: Vec<(&str, usize)> = self.index.iter().filter(|(_, i)| **i < self.outcomes).map(|(t, i)| (t.as_str(), *i)).collect();
        v.sort_by_key(|(_, i)| *i);
        v.into_iter().map(|(t, _)| t).collect()
    }

    /// Negative log-likelihood of a response's tokens.
    pub fn nll(&self, text: &str) -> f64 {
        let ids = self.ids(TokenStream::normalize(text).tokens());
        -ids.windows(2).map(|w| self.log_prob_ids(w[0], w[1])).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub bt: f64,
    pub lm: f64,
    pub center: f64,
}

/// `-log sigmoid(-z)` evaluated without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Precomputed inputs for one pair.
#[derive(Debug, Clone)]
pub struct PairFeatures {
    pub chosen: Features,
    pub rejected: Features,
    pub nll: f64,
}

impl PairFeatures {
    pub fn new(pair: &PreferencePair, lm: &ToyLM) -> Self {
        let p = pair.criteria_prompt.as_deref();
        PairFeatures {
            chosen: features(p, &pair.task_prompt, &pair.chosen),
            rejected: features(p, &pair.task_prompt, &pair.rejected),
            nll: lm.nll(&pair.chosen),
        }
    }
}

fn check(term: &'static str, v: f64) -> Result<f64, TrainError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TrainError::NonFinite { term })
    }
}

pub fn loss_parts(pf: &PairFeatures, model: &ToyRewardModel, cfg: &LossConfig) -> Result<LossParts, TrainError> {
    let rc = check("reward", model.reward_features(&pf.chosen))?;
    let rr = check("reward", model.reward_features(&pf.rejected))?;
    let bt = check("bt", softplus(-(rc - rr)))?;
    let lm = check("lm", cfg.lambda * pf.nll)?;
    let center = check("center", cfg.center_sign() * cfg.mu * (rc + rr).powi(2))?;
    Ok(LossParts { total: bt + lm + center, bt, lm, center })
}

pub fn loss(pair: &PreferencePair, model: &ToyRewardModel, lm: &ToyLM, cfg: &LossConfig) -> Result<LossParts, TrainError> {
    loss_parts(&PairFeatures::new(pair, lm), model, cfg)
}

/// Sparse gradient of the total loss with respect to the reward weights.
pub fn grad_parts(pf: &PairFeatures, model: &ToyRewardModel, cfg: &LossConfig) -> Result<BTreeMap<usize, f64>, TrainError> {
    let rc = check("reward", model.reward_features(&pf.chosen))?;
    let rr = check("reward", model.reward_features(&pf.rejected))?;
    let g_bt = -sigmoid(-(rc - rr));
    let g_c = cfg.center_sign() * 2.0 * cfg.mu * (rc + rr);
    let mut out = BTreeMap::new();
    for (i, v) in &pf.chosen.0 {
        *out.entry(*i).or_insert(0.0) += (g_bt + g_c) * v;
    }
    for (i, v) in &pf.rejected.0 {
        *out.entry(*i).or_insert(0.0) += (-g_bt + g_c) * v;
    }
    for v in out.values() {
        check("gradient", *v)?;
    }
    Ok(out)
}

pub fn grad(pair: &PreferencePair, model: &ToyRewardModel, lm: &ToyLM, cfg: &LossConfig) -> Result<BTreeMap<usize, f64>, TrainError> {
    grad_parts(&PairFeatures::new(pair, lm), model, cfg)
}

/// Which criteria prompt a training sample is shown with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriteriaMode {
    None,
    All,
    Single(Criterion),
}

impl CriteriaMode {
    pub fn prompt(self) -> Option<String> {
        match self {
            CriteriaMode::None => None,
            CriteriaMode::All => Some(all_criteria_prompt()),
            CriteriaMode::Single(c) => Some(single_criterion_prompt(c)),
        }
    }

    pub fn apply(self, pair: &PreferencePair) -> PreferencePair {
        PreferencePair { criteria_prompt: self.prompt(), ..pair.clone() }
    }
}

/// Categorical draw over no prompt, the all-criteria prompt, or the prompt
/// for the pair's own criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSampler {
    pub p_none: f64,
    pub p_all: f64,
    pub p_single: f64,
    pub rng_seed: u64,
}

impl Default for MixSampler {
    fn default() -> Self {
        MixSampler { p_none: 0.15, p_all: 0.20, p_single: 0.65, rng_seed: 0 }
    }
}

impl MixSampler {
    pub fn validate(&self) -> Result<(), TrainError> {
        let ps = [self.p_none, self.p_all, self.p_single];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) || (ps.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(TrainError::Config(format!("mix probabilities {ps:?} must be in [0, 1] and sum to 1")));
        }
        Ok(())
    }

    /// Mode for draw number `key`. Each key reads its own ChaCha stream, so
    /// draws are independent of evaluation order.
    pub fn mode_for(&self, key: u64, criterion: Criterion) -> CriteriaMode {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(key);
        let u: f64 = rng.random();
        if u < self.p_none {
            CriteriaMode::None
        } else if u < self.p_none + self.p_all {
            CriteriaMode::All
        } else {
            CriteriaMode::Single(criterion)
        }
    }

    /// Sequential draws `0, 1, 2, ...` for one pair.
    pub fn sample_criteria_mode(&self, pair: &PreferencePair, key: u64) -> CriteriaMode {
        self.mode_for(key, pair.criterion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub cosine: bool,
    pub warmup_frac: f64,
    /// Criteria-prompt mixing; `None` trains on pairs as given.
    pub mix: Option<MixSampler>,
    pub lm_alpha: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            lr: 0.5,
            batch_size: 16,
            seed: 0,
            cosine: false,
            warmup_frac: 0.05,
            mix: None,
            lm_alpha: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: ToyRewardModel,
    pub step: usize,
    pub loss_components: LossParts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub bt: f64,
    pub lm: f64,
    pub center: f64,
    pub total: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub state: TrainState,
    pub initial_accuracy: f64,
    pub curve: Vec<EpochStats>,
    /// Mean batch loss after every step.
    pub step_losses: Vec<LossParts>,
}

/// Fraction of pairs with `r_c > r_r` strictly.
pub fn pairwise_accuracy(pairs: &[PairFeatures], model: &ToyRewardModel) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let wins = pairs
        .iter()
        .filter(|p| model.reward_features(&p.chosen) > model.reward_features(&p.rejected))
        .count();
    wins as f64 / pairs.len() as f64
}

fn lr_at(cfg: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    if !cfg.cosine {
        return cfg.lr;
    }
    let warmup = ((total_steps as f64) * cfg.warmup_frac).ceil() as usize;
    if step < warmup {
        return cfg.lr * (step + 1) as f64 / warmup as f64;
    }
    let span = (total_steps - warmup).max(1) as f64;
    let progress = (step - warmup) as f64 / span;
    cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

fn mean_parts(parts: &[LossParts]) -> LossParts {
    let n = parts.len().max(1) as f64;
    let mut m = LossParts::default();
    for p in parts {
        m.total += p.total;
        m.bt += p.bt;
        m.lm += p.lm;
        m.center += p.center;
    }
    LossParts { total: m.total / n, bt: m.bt / n, lm: m.lm / n, center: m.center / n }
}

/// Mini-batch gradient descent from `init` (zero weights when `None`).
/// Single-threaded; with a fixed seed the result is bit-reproducible.
pub fn train_toy(
    dataset: &[PreferencePair],
    loss_cfg: &LossConfig,
    cfg: &TrainConfig,
    init: Option<ToyRewardModel>,
) -> Result<TrainResult, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if cfg.batch_size == 0 || !cfg.lr.is_finite() || cfg.lr < 0.0 {
        return Err(TrainError::Config("batch_size must be positive and lr finite and non-negative".into()));
    }
    if let Some(m) = &cfg.mix {
        m.validate()?;
    }
    let lm = ToyLM::fit(dataset.iter().map(|p| p.chosen.as_str()), cfg.lm_alpha);
    let plain: Vec<PairFeatures> = dataset.iter().map(|p| PairFeatures::new(p, &lm)).collect();
    let mut state = TrainState { model: init.unwrap_or_default(), step: 0, loss_components: LossParts::default() };
    let initial_accuracy = pairwise_accuracy(&plain, &state.model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps_per_epoch = dataset.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut curve = Vec::new();
    let mut step_losses = Vec::new();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_parts = Vec::with_capacity(dataset.len());
        for batch in order.chunks(cfg.batch_size) {
            let mut parts = Vec::with_capacity(batch.len());
            let mut g: BTreeMap<usize, f64> = BTreeMap::new();
            let fail = |e: TrainError, state: &TrainState| TrainError::Divergence {
                state: Box::new(state.clone()),
                source: Box::new(e),
            };
            for &i in batch {
                let pf = match &cfg.mix {
                    None => plain[i].clone(),
                    Some(mix) => {
                        let key = (epoch as u64) << 32 | i as u64;
                        let pair = mix.sample_criteria_mode(&dataset[i], key).apply(&dataset[i]);
                        PairFeatures::new(&pair, &lm)
                    }
                };
                parts.push(loss_parts(&pf, &state.model, loss_cfg).map_err(|e| fail(e, &state))?);
                for (k, v) in grad_parts(&pf, &state.model, loss_cfg).map_err(|e| fail(e, &state))? {
                    *g.entry(k).or_insert(0.0) += v;
                }
            }
            let lr = lr_at(cfg, state.step, total_steps);
            let scale = lr / batch.len() as f64;
            let mut next = state.model.clone();
            for (k, v) in g {
                next.weights[k] -= scale * v;
            }
            if next.weights.iter().any(|w| !w.is_finite()) {
                return Err(fail(TrainError::NonFinite { term: "weights" }, &state));
            }
            state.model = next;
            state.step += 1;
            let mean = mean_parts(&parts);
            state.loss_components = mean;
            step_losses.push(mean);
            epoch_parts.extend(parts);
        }
        let m = mean_parts(&epoch_parts);
        curve.push(EpochStats {
            epoch: epoch + 1,
            bt: m.bt,
            lm: m.lm,
            center: m.center,
            total: m.total,
            accuracy: pairwise_accuracy(&plain, &state.model),
        });
    }
    Ok(TrainResult { state, initial_accuracy, curve, step_losses })
}

pub fn curve_csv(curve: &[EpochStats]) -> String {
    let mut out = String::from("epoch,bt,lm,center,total,accuracy\n");
    for e in curve {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            e.epoch, e.bt, e.lm, e.center, e.total, e.accuracy
        ));
    }
    out
}

/// Weights file contents with the run's seed, configs and feature space.
pub fn weights_json(model: &ToyRewardModel, loss_cfg: &LossConfig, cfg: &TrainConfig) -> String {
    model.to_json(json!({
        "seed": cfg.seed,
        "loss": loss_cfg,
        "train": cfg,
        "feature_space": FEATURE_SPACE,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Language, Split};

    fn pair(chosen: &str, rejected: &str) -> PreferencePair {
        PreferencePair {
            id: "p".into(),
            criteria_prompt: None,
            task_prompt: "do it".into(),
            chosen: chosen.into(),
            rejected: rejected.into(),
            criterion: Criterion::SH,
            language: Language::Python,
            subset: "s".into(),
            split: Split::Train,
            extra: Default::default(),
        }
    }

    fn lm() -> ToyLM {
        ToyLM::fit(["a b c", "b c d"], 0.5)
    }

    #[test]
    fn stage_defaults() {
        let pt = LossConfig::for_stage(TrainStage::Pt);
        assert_eq!((pt.lambda, pt.mu), (0.4, 0.01));
        let pm = LossConfig::for_stage(TrainStage::Pm);
        assert_eq!((pm.lambda, pm.mu), (0.25, 0.001));
        assert_eq!(TrainStage::Pt.default_epochs(), 2);
        assert_eq!(TrainStage::Pm.default_epochs(), 1);
    }

    #[test]
    fn bt_at_zero_margin() {
        let cfg = LossConfig { lambda: 0.0, mu: 0.5, ..LossConfig::for_stage(TrainStage::Pm) };
        let l = loss(&pair("a b", "c d"), &ToyRewardModel::zeros(), &lm(), &cfg).unwrap();
        assert!((l.bt - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(l.center, 0.0);
    }

    #[test]
    fn bt_at_margin_two() {
        // Reference value from a 40-digit decimal evaluation of ln(1 + e^-2).
        let pf = PairFeatures {
            chosen: Features(vec![(0, 1.0)]),
            rejected: Features(vec![(1, 1.0)]),
            nll: 3.0,
        };
        let mut m = ToyRewardModel::zeros();
        m.weights[0] = 1.0;
        m.weights[1] = -1.0;
        let cfg = LossConfig { lambda: 0.0, mu: 0.0, ..LossConfig::for_stage(TrainStage::Pm) };
        let l = loss_parts(&pf, &m, &cfg).unwrap();
        assert!((l.total - 0.126_928_011_042_972_5).abs() < 1e-15);
        // symmetric rewards cancel the centering term for any mu
        let cfg = LossConfig { mu: 7.0, ..cfg };
        assert_eq!(loss_parts(&pf, &m, &cfg).unwrap().center, 0.0);
    }

    #[test]
    fn literal_sign_flips_center() {
        let pf = PairFeatures { chosen: Features(vec![(0, 1.0)]), rejected: Features(vec![(0, 1.0)]), nll: 0.0 };
        let mut m = ToyRewardModel::zeros();
        m.weights[0] = 1.0;
        let cfg = LossConfig::for_stage(TrainStage::Pt);
        let plus = loss_parts(&pf, &m, &cfg).unwrap().center;
        let minus = loss_parts(&pf, &m, &LossConfig { literal_center_sign: true, ..cfg }).unwrap().center;
        assert!((plus - 0.04).abs() < 1e-15);
        assert_eq!(minus, -plus);
    }

    #[test]
    fn zero_gradients() {
        let p = pair("same text", "same text!");
        let cfg = LossConfig::for_stage(TrainStage::Pt);
        let g = grad(&p, &ToyRewardModel::zeros(), &lm(), &cfg).unwrap();
        assert!(g.values().all(|v| *v == 0.0));
    }

    #[test]
    fn lm_rows_normalize() {
        let lm = lm();
        for prev in ["<s>", "a", "b", "zzz"] {
            let s: f64 = lm.outcomes().iter().map(|n| lm.log_prob(prev, n).exp()).sum();
            assert!((s - 1.0).abs() < 1e-9, "{prev}: {s}");
        }
        assert_eq!(lm.vocab_size(), 5);
    }

    #[test]
    fn sampler_degenerate_and_deterministic() {
        let p = pair("a", "b");
        let s = MixSampler { p_none: 0.0, p_all: 0.0, p_single: 1.0, rng_seed: 1 };
        assert!((0..100).all(|k| s.sample_criteria_mode(&p, k) == CriteriaMode::Single(Criterion::SH)));
        let d = MixSampler::default();
        let a: Vec<_> = (0..50).map(|k| d.sample_criteria_mode(&p, k)).collect();
        let b: Vec<_> = (0..50).map(|k| d.sample_criteria_mode(&p, k)).collect();
        assert_eq!(a, b);
        let prompt = CriteriaMode::Single(Criterion::SH).prompt().unwrap();
        assert!(prompt.contains("**Security Hardness**"));
        assert!(MixSampler { p_none: 0.5, ..d }.validate().is_err());
    }

    #[test]
    fn repeated_pair_loss_decreases() {
        let data = vec![pair("safe code here", "unsafe code there")];
        let cfg = TrainConfig { epochs: 10, lr: 0.01, batch_size: 1, ..TrainConfig::default() };
        let r = train_toy(&data, &LossConfig::for_stage(TrainStage::Pm), &cfg, None).unwrap();
        let bts: Vec<f64> = r.step_losses.iter().map(|l| l.bt).collect();
        assert!(bts.windows(2).all(|w| w[1] < w[0]), "{bts:?}");
    }

    #[test]
    fn zero_lr_keeps_weights() {
        let data = vec![pair("x y", "y x"), pair("q", "r")];
        let cfg = TrainConfig { epochs: 2, lr: 0.0, ..TrainConfig::default() };
        let r = train_toy(&data, &LossConfig::for_stage(TrainStage::Pm), &cfg, None).unwrap();
        assert_eq!(r.state.model, ToyRewardModel::zeros());
        assert_eq!(r.curve.last().unwrap().accuracy, r.initial_accuracy);
    }

    #[test]
    fn cosine_schedule_shape() {
        let cfg = TrainConfig { lr: 1.0, cosine: true, warmup_frac: 0.1, ..TrainConfig::default() };
        assert!((lr_at(&cfg, 0, 100) - 0.1).abs() < 1e-12);
        assert!((lr_at(&cfg, 9, 100) - 1.0).abs() < 1e-12);
        assert!((lr_at(&cfg, 10, 100) - 1.0).abs() < 1e-12);
        assert!(lr_at(&cfg, 99, 100) < 0.001);
    }
}
