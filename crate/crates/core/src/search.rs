//! Random-search NAS on top of the proxy: seeded sampling over a space's
//! cell encodings, batch scoring, and argmax selection.

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::json;

use crate::arch::{Architecture, CellKind, EncodingFormat, SearchSpaceDescriptor};
use crate::entropy::trial_rng;
use crate::parse::{self, ParseError};
use crate::sed::{self, SedBreakdown};
use crate::spaces::{DARTS_TOKENS, TSS_TOKENS};

/// Configuration for a random-search run.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Sample without replacement.
    pub dedup: bool,
    /// Where to write the selected encoding and its breakdown (JSON).
    pub output: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(
        "space {space}: requested {requested} distinct samples, only {available} encodings exist"
    )]
    NotEnoughDistinct {
        space: String,
        requested: usize,
        available: u64,
    },
    #[error("sampled encoding failed to parse: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Invalid(#[from] sed::InvalidArchitecture),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Search result: the argmax-proxy architecture, its score and breakdown,
/// and the wall time spent scoring (sampling and parsing excluded).
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_encoding: String,
    pub best_sed: f64,
    pub breakdown: SedBreakdown,
    pub scored: usize,
    pub scoring_time: Duration,
}

/// Number of distinct cell encodings for enumerable families.
fn space_cardinality(space: &SearchSpaceDescriptor) -> Option<u64> {
    match space.family {
        EncodingFormat::TssCellString => Some((TSS_TOKENS.len() as u64).pow(space.slots_per_cell)),
        _ => None,
    }
}

/// Draws `n` architectures uniformly per operation slot, with replacement
/// unless `dedup`. Deterministic given the seed: sample `i` always derives
/// from the counter-based stream `(seed, i)`, so a sample's identity does
/// not depend on how many came before it.
pub fn sample_random(
    space: &SearchSpaceDescriptor,
    n: usize,
    seed: u64,
    dedup: bool,
) -> Result<Vec<Architecture>, SearchError> {
    if n == 0 {
        return Err(SearchError::Config("n_samples must be >= 1".into()));
    }
    if dedup {
        if let Some(total) = space_cardinality(space) {
            if n as u64 > total {
                return Err(SearchError::NotEnoughDistinct {
                    space: space.id.clone(),
                    requested: n,
                    available: total,
                });
            }
        }
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut counter = 0u64;
    // With dedup, collisions draw fresh counters; cap the attempts so a
    // saturated non-enumerable space errors instead of spinning.
    let max_attempts = (n as u64).saturating_mul(1000).max(1_000_000);
    while out.len() < n {
        if counter >= max_attempts {
            return Err(SearchError::NotEnoughDistinct {
                space: space.id.clone(),
                requested: n,
                available: out.len() as u64,
            });
        }
        let encoding = sample_encoding(space, seed, counter);
        counter += 1;
        if dedup && !seen.insert(encoding.clone()) {
            continue;
        }
        let arch = parse::parse_in_space(&encoding, space)?;
        out.push(arch);
    }
    Ok(out)
}

fn sample_encoding(space: &SearchSpaceDescriptor, seed: u64, counter: u64) -> String {
    let mut rng = trial_rng(seed, counter);
    match space.family {
        EncodingFormat::TssCellString => {
            let pick = |rng: &mut rand_chacha::ChaCha8Rng| {
                TSS_TOKENS[rng.random_range(0..TSS_TOKENS.len())]
            };
            let ops = [
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
                pick(&mut rng),
            ];
            parse::format_tss(&ops)
        }
        EncodingFormat::DartsGenotype => {
            let nodes = (space.slots_per_cell / 2).max(1) as usize;
            let cell = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut pairs = Vec::with_capacity(nodes * 2);
                for node in 0..nodes {
                    // Two distinct predecessors among the node's inputs.
                    let choices = node + 2;
                    let first = rng.random_range(0..choices);
                    let second = loop {
                        let s = rng.random_range(0..choices);
                        if s != first {
                            break s;
                        }
                    };
                    for input in [first.min(second), first.max(second)] {
                        let token = DARTS_TOKENS[rng.random_range(0..DARTS_TOKENS.len())];
                        pairs.push(json!([token, input]));
                    }
                }
                pairs
            };
            let normal = cell(&mut rng);
            let reduce = cell(&mut rng);
            serde_json::to_string(&json!({ "normal": normal, "reduce": reduce }))
                .expect("genotype serialization cannot fail")
        }
        EncodingFormat::GenericJson => {
            // One sampled cell per cell kind present in the skeleton,
            // `slots_per_cell` uniform draws from the inventory each.
            let sample_counts = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut counts = vec![0u32; space.opt.len()];
                for _ in 0..space.slots_per_cell {
                    counts[rng.random_range(0..space.opt.len())] += 1;
                }
                counts
            };
            let normal = sample_counts(&mut rng);
            let reduce = sample_counts(&mut rng);
            let blocks: Vec<serde_json::Value> = space
                .skeleton
                .iter()
                .flat_map(|stage| {
                    let counts = match stage.cell {
                        CellKind::Normal => &normal,
                        CellKind::Reduce => &reduce,
                    };
                    let entries: Vec<serde_json::Value> = counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c > 0)
                        .map(|(op, &c)| json!({ "op": op, "n": c }))
                        .collect();
                    std::iter::repeat_n(json!({ "counts": entries }), stage.repeat as usize)
                })
                .collect();
            let doc = json!({
                "schema": parse::SCHEMA_VERSION,
                "space": serde_json::from_str::<serde_json::Value>(&parse::serialize_space(space))
                    .expect("space JSON is valid"),
                "arch": { "blocks": blocks },
            });
            serde_json::to_string(&doc).expect("doc serialization cannot fail")
        }
    }
}

/// Samples, scores, and selects the architecture with the greatest proxy
/// value; score ties break to the lexicographically smallest encoding. The
/// reported time covers scoring only.
pub fn search(
    space: &SearchSpaceDescriptor,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    if config.n_samples == 0 {
        return Err(SearchError::Config("n_samples must be >= 1".into()));
    }
    let archs = sample_random(space, config.n_samples, config.seed, config.dedup)?;

    let start = Instant::now();
    let scores = sed::batch_score(&archs, space);
    let scoring_time = start.elapsed();

    let mut best: Option<(usize, f64)> = None;
    for (i, score) in scores.iter().enumerate() {
        let s = score.as_ref().map_err(|e| e.clone())?;
        best = match best {
            None => Some((i, *s)),
            Some((bi, bs)) => {
                if *s > bs || (*s == bs && archs[i].encoding < archs[bi].encoding) {
                    Some((i, *s))
                } else {
                    Some((bi, bs))
                }
            }
        };
    }
    let (best_idx, best_sed) = best.expect("n_samples >= 1 checked above");
    let breakdown = sed::sed(&archs[best_idx], space)?;

    let outcome = SearchOutcome {
        best_encoding: archs[best_idx].encoding.clone(),
        best_sed,
        breakdown,
        scored: archs.len(),
        scoring_time,
    };
    if let Some(path) = &config.output {
        let doc = json!({
            "encoding": outcome.best_encoding,
            "sed": outcome.best_sed,
            "scored": outcome.scored,
            "scoring_seconds": outcome.scoring_time.as_secs_f64(),
            "breakdown": outcome.breakdown,
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc).expect("json")).map_err(
            |source| SearchError::Io {
                path: path.clone(),
                source,
            },
        )?;
    }
    Ok(outcome)
}

/// Every encoding of the NATS-Bench-TSS cell space, in odometer order over
/// the canonical token list: 5^6 = 15,625 strings.
pub fn enumerate_tss_encodings() -> Vec<String> {
    let k = TSS_TOKENS.len();
    let mut out = Vec::with_capacity(k.pow(6));
    let mut idx = [0usize; 6];
    loop {
        let ops = [
            TSS_TOKENS[idx[0]],
            TSS_TOKENS[idx[1]],
            TSS_TOKENS[idx[2]],
            TSS_TOKENS[idx[3]],
            TSS_TOKENS[idx[4]],
            TSS_TOKENS[idx[5]],
        ];
        out.push(parse::format_tss(&ops));
        // Odometer increment, last slot fastest.
        let mut pos = 5;
        loop {
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
            if pos == 0 {
                return out;
            }
            pos -= 1;
        }
    }
}
