//! Score a few responses against a reward-model server.
//!
//! The server must accept `POST /v1/reward` with `{system, prompt, response}`
//! and reply `{"reward": <number>}`.
//!
//! ```text
//! THEMIS_SCORER_URL=http://localhost:8000 cargo run --example remote_scorer
//! ```

use themis::net::RetryPolicy;
use themis::scorer::{self, RemoteScorer, ScoreRequest, ENV_URL};
use themis::train::CriteriaMode;
use themis::types::Criterion;

fn main() -> anyhow::Result<()> {
    if std::env::var(ENV_URL).is_err() {
        eprintln!("set {ENV_URL} to the base URL of a reward server to run this example");
        return Ok(());
    }
    let rm = RemoteScorer::from_env(RetryPolicy::default())?;
    let criteria = CriteriaMode::Single(Criterion::ME).prompt();
    let task = "Return the number of distinct words in a large text file.";
    let responses = [
        "def count(path):\n    return len(set(open(path).read().split()))\n",
        "def count(path):\n    seen = set()\n    with open(path) as f:\n        for line in f:\n            seen.update(line.split())\n    return len(seen)\n",
    ];
    let reqs: Vec<ScoreRequest> = responses.iter().map(|r| ScoreRequest::new(criteria.as_deref(), task, r)).collect();
    for (i, r) in scorer::score_batch(&reqs, &rm, 2)?.into_iter().enumerate() {
        match r {
            Ok(s) => println!("response {i}: reward {:.4} from {} in {} ms", s.reward, s.model_id, s.latency_ms),
            Err(e) => println!("response {i}: {e}"),
        }
    }
    Ok(())
}
