//! Train the hashed-feature reward model with the pairwise loss, the
//! language-model term and reward centering, then check held-out accuracy.
//!
//! ```text
//! cargo run --example train_toy_rm
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Map;

use themis::train::{self, LossConfig, MixSampler, PairFeatures, ToyLM, TrainConfig, TrainStage};
use themis::types::{Criterion, Language, PreferencePair, Split};

const NAMES: &[&str] = &["items", "rows", "values", "nums", "parts", "scores", "keys", "lines"];

/// The preferred version guards against an empty input; the other does not.
fn example(i: usize, rng: &mut ChaCha8Rng) -> PreferencePair {
    let xs = NAMES[rng.random_range(0..NAMES.len())];
    let f = format!("{}_{}", ["mean", "first", "peak", "head"][i % 4], rng.random_range(0..1000));
    let body = format!("    total = sum({xs})\n    return total / len({xs})\n");
    PreferencePair {
        id: format!("p{i}"),
        criteria_prompt: None,
        task_prompt: format!("Write {f} over the list {xs}."),
        chosen: format!("def {f}({xs}):\n    if not {xs}:\n        return None\n{body}"),
        rejected: format!("def {f}({xs}):\n{body}"),
        criterion: Criterion::FC,
        language: Language::Python,
        subset: "CommitPref".into(),
        split: Split::Train,
        extra: Map::new(),
    }
}

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data: Vec<PreferencePair> = (0..300).map(|i| example(i, &mut rng)).collect();
    let (train_set, held_out) = data.split_at(240);

    let loss = LossConfig::for_stage(TrainStage::Pm);
    let cfg = TrainConfig { epochs: 3, cosine: true, mix: Some(MixSampler::default()), ..TrainConfig::default() };
    println!("loss: lambda={} mu={}", loss.lambda, loss.mu);
    let result = train::train_toy(train_set, &loss, &cfg, None)?;

    println!("epoch      bt      lm  center  train-acc");
    println!("    0       -       -       -  {:.3}", result.initial_accuracy);
    for e in &result.curve {
        println!("{:>5}  {:.4}  {:>6.2}  {:.4}  {:.3}", e.epoch, e.bt, e.lm, e.center, e.accuracy);
    }

    let lm = ToyLM::fit(train_set.iter().map(|p| p.chosen.as_str()), cfg.lm_alpha);
    let feats: Vec<PairFeatures> = held_out.iter().map(|p| PairFeatures::new(p, &lm)).collect();
    println!("held-out accuracy: {:.3}", train::pairwise_accuracy(&feats, &result.state.model));
    Ok(())
}
