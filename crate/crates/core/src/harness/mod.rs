//! Simulated attackers and pass-rate measurement.
//!
//! Three baseline bots play episodes against a [`Target`]: fetch a fresh
//! challenge, submit up to the attempt budget, and record whether any
//! submission passed. [`BankTarget`] runs the real lifecycle in-process
//! with a frozen clock, so a run is a pure function of its seed. The HTTP
//! target lives in the service crate.

pub mod combiner;

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{Category, QuestionBank};
use crate::lifecycle::{ChallengeStore, ChallengeView, LifecycleConfig, LifecycleError, Timestamp, VerifyOutcome};
use crate::stats::{self, Real};

/// z for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

/// Margin above which a deadline counts as slack.
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 10.0;

/// Guesses used when no dictionary is supplied.
pub const DEFAULT_DICTIONARY: [&str; 10] = [
    "east", "west", "north", "south", "1", "2", "3", "5", "7", "10",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("at least one trial is required")]
    NoTrials,
    #[error("target unreachable: {0}")]
    TargetUnreachable(String),
    #[error("target refused the request: {0}")]
    Target(String),
}

/// Question text seen by Replay mapped to the answer it learned.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayMemory {
    pub seen: HashMap<String, String>,
    /// Guesses for prompts not in memory.
    pub fallback: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BotStrategy {
    RandomGuess { dictionary: Vec<String> },
    Replay(ReplayMemory),
    NumericCombiner { max_depth: u8 },
}

impl BotStrategy {
    pub fn random(dictionary: impl IntoIterator<Item = impl Into<String>>) -> Self {
        BotStrategy::RandomGuess {
            dictionary: dictionary.into_iter().map(Into::into).collect(),
        }
    }

    pub fn replay(fallback: impl IntoIterator<Item = impl Into<String>>) -> Self {
        BotStrategy::Replay(ReplayMemory {
            seen: HashMap::new(),
            fallback: fallback.into_iter().map(Into::into).collect(),
        })
    }

    pub fn combiner() -> Self {
        BotStrategy::NumericCombiner { max_depth: 2 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BotStrategy::RandomGuess { .. } => "random",
            BotStrategy::Replay(_) => "replay",
            BotStrategy::NumericCombiner { .. } => "combiner",
        }
    }

    /// Whether Replay already holds an answer for this prompt.
    pub fn remembers(&self, prompt: &Prompt<'_>) -> bool {
        match self {
            BotStrategy::Replay(m) => m.seen.contains_key(&prompt.key()),
            _ => false,
        }
    }

    /// Teaches Replay the answer to a solved prompt. Other bots ignore it.
    pub fn observe(&mut self, prompt: &Prompt<'_>, answer: &str) {
        if let BotStrategy::Replay(m) = self {
            m.seen.entry(prompt.key()).or_insert_with(|| answer.to_owned());
        }
    }
}

/// What a bot sees of a challenge.
#[derive(Debug, Clone, Copy)]
pub struct Prompt<'a> {
    pub view: &'a ChallengeView,
    pub image: Option<&'a [u8]>,
}

impl Prompt<'_> {
    /// Replay's memory key: the exact question text.
    pub fn key(&self) -> String {
        self.view.question.clone()
    }
}

/// Per-episode scratch state.
#[derive(Debug)]
pub struct EpisodeState {
    pub attempt: u32,
    rng: ChaCha8Rng,
    combos: Option<Vec<i64>>,
    budget: u32,
}

impl EpisodeState {
    pub fn new(seed: u64, budget: u32) -> Self {
        Self {
            attempt: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            combos: None,
            budget,
        }
    }
}

/// Produces the next submission for `prompt`.
pub fn attempt(strategy: &BotStrategy, prompt: &Prompt<'_>, state: &mut EpisodeState) -> String {
    let out = match strategy {
        BotStrategy::RandomGuess { dictionary } => draw(dictionary, &mut state.rng),
        BotStrategy::Replay(m) => match m.seen.get(&prompt.key()) {
            Some(answer) => answer.clone(),
            None => draw(&m.fallback, &mut state.rng),
        },
        BotStrategy::NumericCombiner { max_depth } => {
            let budget = state.budget as usize;
            let combos = state.combos.get_or_insert_with(|| {
                let numbers = combiner::extract_integers(&prompt.view.question);
                combiner::candidates(&numbers, *max_depth, budget)
            });
            combos
                .get(state.attempt as usize)
                .map(i64::to_string)
                .unwrap_or_default()
        }
    };
    state.attempt += 1;
    out
}

fn draw(words: &[String], rng: &mut ChaCha8Rng) -> String {
    if words.is_empty() {
        return String::new();
    }
    words[rng.random_range(0..words.len())].clone()
}

/// A freshly issued challenge as the bot receives it.
#[derive(Debug, Clone)]
pub struct Issued {
    pub view: ChallengeView,
    pub image: Option<Vec<u8>>,
}

/// Something that issues and grades challenges.
pub trait Target {
    /// Categories this target can issue.
    fn categories(&mut self) -> Result<Vec<Category>, HarnessError>;
    fn issue(&mut self, category: Category, seed: u64) -> Result<Issued, HarnessError>;
    fn answer(&mut self, challenge_id: &str, submission: &str) -> Result<VerifyOutcome, HarnessError>;
    /// The canonical answer, where the target lets an observer see it.
    fn reveal(&mut self, challenge_id: &str) -> Option<String>;
}

/// In-process lifecycle over a bank, clock frozen at a fixed instant.
#[derive(Debug)]
pub struct BankTarget<'a> {
    bank: &'a QuestionBank,
    store: ChallengeStore,
    now: Timestamp,
}

impl<'a> BankTarget<'a> {
    pub fn new(bank: &'a QuestionBank, attempts_per_challenge: u32) -> Self {
        let config = LifecycleConfig {
            max_attempts_per_challenge: attempts_per_challenge.max(1),
            ..LifecycleConfig::with_secret([0; 32])
        };
        Self {
            bank,
            store: ChallengeStore::new(config),
            now: Timestamp(1_400_000_000),
        }
    }
}

impl Target for BankTarget<'_> {
    fn categories(&mut self) -> Result<Vec<Category>, HarnessError> {
        Ok(Category::ALL
            .into_iter()
            .filter(|c| c.is_supported() && !self.bank.templates(*c).is_empty())
            .collect())
    }

    fn issue(&mut self, category: Category, seed: u64) -> Result<Issued, HarnessError> {
        let view = self
            .store
            .issue(self.bank, "bot", category, self.now, seed)
            .map_err(|e: LifecycleError| HarnessError::Target(e.to_string()))?;
        let image = self.store.image(&view.id);
        Ok(Issued { view, image })
    }

    fn answer(&mut self, challenge_id: &str, submission: &str) -> Result<VerifyOutcome, HarnessError> {
        self.store
            .verify(challenge_id, submission, self.now)
            .map_err(|e| HarnessError::Target(e.to_string()))
    }

    fn reveal(&mut self, challenge_id: &str) -> Option<String> {
        let c = self.store.challenge(challenge_id)?;
        c.rendered.canonical_answers.into_iter().next()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    /// Scored episodes.
    pub trials: u64,
    /// Unscored episodes played first (Replay learns during them).
    pub warmup: u64,
    pub attempts: u32,
    pub seed: u64,
    /// Categories to draw from; empty means everything the target offers.
    pub categories: Vec<Category>,
    /// Record wall-clock time per episode. Off by default because it makes
    /// reports differ between runs.
    pub measure_wall_clock: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            trials: 1000,
            warmup: 0,
            attempts: 3,
            seed: 0,
            categories: Vec::new(),
            measure_wall_clock: false,
        }
    }
}

/// Successes out of trials with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub successes: u64,
    pub pass_rate: f64,
    pub wilson_95: (f64, f64),
}

impl Tally {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (pass_rate, wilson_95) = if trials == 0 {
            (0.0, (0.0, 1.0))
        } else {
            (
                successes as f64 / trials as f64,
                stats::wilson_interval(successes, trials, Z_95),
            )
        };
        Self {
            trials,
            successes,
            pass_rate,
            wilson_95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub strategy: String,
    pub seed: u64,
    pub warmup: u64,
    #[serde(flatten)]
    pub overall: Tally,
    pub attempts_budget: u32,
    /// Submissions made across scored episodes.
    pub attempts_used: u64,
    pub per_category: BTreeMap<Category, Tally>,
    /// Requested categories that were skipped because nothing can issue them.
    pub unsupported: Vec<Category>,
    /// Scored episodes whose prompt Replay had already seen.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub replay_seen: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_ms_per_episode: Option<f64>,
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of episode `i` in a run seeded with `seed`.
pub fn episode_seed(seed: u64, i: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ i)
}

/// Plays `warmup + trials` episodes and reports the scored ones.
pub fn run_trials(
    strategy: &mut BotStrategy,
    target: &mut dyn Target,
    config: &TrialConfig,
) -> Result<TrialReport, HarnessError> {
    if config.trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let offered = target.categories()?;
    let wanted = if config.categories.is_empty() {
        offered.clone()
    } else {
        config.categories.clone()
    };
    let (usable, unsupported): (Vec<Category>, Vec<Category>) = wanted
        .into_iter()
        .partition(|c| c.is_supported() && offered.contains(c));

    let mut per_category: BTreeMap<Category, (u64, u64)> = usable.iter().map(|c| (*c, (0, 0))).collect();
    let mut successes = 0;
    let mut played = 0;
    let mut attempts_used = 0;
    let mut seen = 0;
    let started = Instant::now();

    if !usable.is_empty() {
        for i in 0..config.warmup + config.trials {
            let scored = i >= config.warmup;
            let seed = episode_seed(config.seed, i);
            let mut pick = ChaCha8Rng::seed_from_u64(seed);
            let category = usable[pick.random_range(0..usable.len())];
            let issued = target.issue(category, pick.random())?;
            let prompt = Prompt {
                view: &issued.view,
                image: issued.image.as_deref(),
            };
            if scored && strategy.remembers(&prompt) {
                seen += 1;
            }

            let mut state = EpisodeState::new(pick.random(), config.attempts);
            let mut winner = None;
            for _ in 0..config.attempts {
                let submission = attempt(strategy, &prompt, &mut state);
                if scored {
                    attempts_used += 1;
                }
                match target.answer(&issued.view.id, &submission)? {
                    VerifyOutcome::Passed { .. } => {
                        winner = Some(submission);
                        break;
                    }
                    VerifyOutcome::WrongAnswer { .. } => {}
                    _ => break,
                }
            }

            let passed = winner.is_some();
            if let Some(answer) = winner.or_else(|| target.reveal(&issued.view.id)) {
                strategy.observe(&prompt, &answer);
            }
            if scored {
                played += 1;
                let slot = per_category.get_mut(&category).expect("category tallied");
                slot.0 += 1;
                if passed {
                    successes += 1;
                    slot.1 += 1;
                }
            }
        }
    }

    let episodes = if usable.is_empty() { 0 } else { config.warmup + config.trials };
    Ok(TrialReport {
        strategy: strategy.label().to_owned(),
        seed: config.seed,
        warmup: config.warmup,
        overall: Tally::new(successes, played),
        attempts_budget: config.attempts,
        attempts_used,
        per_category: per_category
            .into_iter()
            .map(|(c, (n, k))| (c, Tally::new(k, n)))
            .collect(),
        unsupported,
        replay_seen: matches!(strategy, BotStrategy::Replay(_)).then_some(seen),
        wall_clock_ms_per_episode: (config.measure_wall_clock && episodes > 0)
            .then(|| started.elapsed().as_secs_f64() * 1000.0 / episodes as f64),
    })
}

/// Wilson score interval, re-exported for report consumers.
pub fn wilson_interval<F: Real>(k: u64, n: u64, z: F) -> (F, F) {
    stats::wilson_interval(k, n, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRow<F> {
    pub category: Category,
    pub mean_seconds: F,
    /// Deadline divided by the mean solve time.
    pub margin: F,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarginError {
    #[error("mean solve time for `{0}` must be positive")]
    NonPositiveMean(Category),
}

/// How many times over the deadline covers each category's mean solve time.
/// Rows whose margin is strictly above `threshold` are flagged: the deadline
/// leaves an attacker that much more time than a human needs.
pub fn time_margin_report<F: Real>(
    category_times: &BTreeMap<Category, F>,
    deadline_secs: F,
    threshold: F,
) -> Result<Vec<MarginRow<F>>, MarginError> {
    category_times
        .iter()
        .map(|(category, mean)| {
            if *mean <= F::zero() {
                return Err(MarginError::NonPositiveMean(*category));
            }
            let margin = deadline_secs / *mean;
            Ok(MarginRow {
                category: *category,
                mean_seconds: *mean,
                margin,
                flagged: margin > threshold,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
