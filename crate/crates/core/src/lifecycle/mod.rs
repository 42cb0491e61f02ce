//! Challenge lifecycle: issue, retry, verify, redeem and sweep.
//!
//! All state lives in a [`ChallengeStore`] behind one lock, so every
//! check-and-transition is atomic. Callers pass the current time in
//! explicitly; nothing here reads the system clock.

mod journal;
pub mod token;

use std::collections::HashMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use parking_lot::Mutex;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::{instantiate_with_policy, sample_template, BankError, Category, QuestionBank, RenderedQuestion};
use crate::grading::{grade, GradingPolicy};
use journal::{Journal, Record};
pub use token::{RejectReason, TokenPayload, TokenSigner};

/// Seconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn plus(self, secs: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(secs))
    }
}

/// Time source injected into long-running components.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp(
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        )
    }
}

/// Settable clock for tests and simulations.
#[derive(Debug, Default)]
pub struct ManualClock(std::sync::atomic::AtomicU64);

impl ManualClock {
    pub fn new(t: Timestamp) -> Self {
        Self(std::sync::atomic::AtomicU64::new(t.0))
    }

    pub fn set(&self, t: Timestamp) {
        self.0.store(t.0, std::sync::atomic::Ordering::SeqCst);
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, std::sync::atomic::Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.0.load(std::sync::atomic::Ordering::SeqCst))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifecycleConfig {
    /// Seconds a challenge stays answerable; reset by a retry.
    pub time_limit_secs: u64,
    pub max_attempts_per_challenge: u32,
    pub max_retries_per_session: u32,
    pub pass_token_ttl_secs: u64,
    /// How long decided challenges are kept before a sweep evicts them.
    pub retention_secs: u64,
    #[serde(with = "hex_key")]
    pub signing_secret: [u8; 32],
    pub grading: GradingPolicy,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            time_limit_secs: 600,
            max_attempts_per_challenge: 3,
            max_retries_per_session: 10,
            pass_token_ttl_secs: 120,
            retention_secs: 3600,
            signing_secret: [0; 32],
            grading: GradingPolicy::default(),
        }
    }
}

impl LifecycleConfig {
    pub fn with_secret(secret: [u8; 32]) -> Self {
        Self {
            signing_secret: secret,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.time_limit_secs == 0 {
            return Err("time_limit_secs must be positive".into());
        }
        if self.max_attempts_per_challenge == 0 || self.max_retries_per_session == 0 {
            return Err("attempt and retry budgets must be at least 1".into());
        }
        if self.pass_token_ttl_secs == 0 {
            return Err("pass_token_ttl_secs must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChallengeState {
    Active,
    Passed,
    Failed,
    Expired,
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub id: String,
    pub session_id: String,
    pub category: Category,
    pub rendered: RenderedQuestion,
    pub issued_at: Timestamp,
    pub deadline: Timestamp,
    pub attempts_used: u32,
    pub state: ChallengeState,
    #[serde(default)]
    pub decided_at: Option<Timestamp>,
}

/// What the solver gets to see. Holds no answer material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeView {
    pub id: String,
    pub category: Category,
    pub question: String,
    /// Path of the image endpoint, text category only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub image: Option<String>,
    pub deadline: Timestamp,
    pub attempts_remaining: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VerifyOutcome {
    Passed { pass_token: String },
    WrongAnswer { attempts_remaining: u32 },
    Expired,
    Exhausted,
    Unknown,
    AlreadyDecided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum RedeemOutcome {
    Accepted { challenge_id: String },
    Rejected { reason: RejectReason },
}

#[derive(Debug, Error)]
pub enum LifecycleError {
    #[error("category `{0}` is not supported")]
    UnsupportedCategory(Category),
    #[error("category `{0}` has no templates")]
    EmptyCategory(Category),
    #[error("retry budget exhausted for this session")]
    RateLimited,
    #[error("unknown challenge")]
    Unknown,
    #[error("challenge already decided")]
    AlreadyDecided,
    #[error("journal write failed: {0}")]
    Journal(#[from] std::io::Error),
}

impl From<BankError> for LifecycleError {
    fn from(e: BankError) -> Self {
        match e {
            BankError::EmptyCategory(c) => LifecycleError::EmptyCategory(c),
            BankError::UnsupportedCategory(c) => LifecycleError::UnsupportedCategory(c),
            // sampling only ever fails with the two variants above
            other => unreachable!("sampling error {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct SessionState {
    pub(crate) retries_used: u32,
    pub(crate) last_seen: u64,
}

#[derive(Debug, Default)]
pub(crate) struct StoreInner {
    pub(crate) challenges: HashMap<String, Challenge>,
    pub(crate) sessions: HashMap<String, SessionState>,
    /// Signature of each redeemed token and its expiry.
    pub(crate) spent: HashMap<String, u64>,
}

/// Server-side challenge state.
#[derive(Debug)]
pub struct ChallengeStore {
    config: LifecycleConfig,
    signer: TokenSigner,
    inner: Mutex<StoreInner>,
    journal: Option<Mutex<Journal>>,
}

/// Mixes the caller's seed before instantiation so template choice and slot
/// values do not share a stream (splitmix64 finalizer).
fn instance_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn new_challenge_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rng().fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

impl ChallengeStore {
    pub fn new(config: LifecycleConfig) -> Self {
        let signer = TokenSigner::new(config.signing_secret);
        Self {
            config,
            signer,
            inner: Mutex::new(StoreInner::default()),
            journal: None,
        }
    }

    /// A store persisted to an append-only journal at `path`, replaying
    /// whatever the journal already holds.
    pub fn with_journal(config: LifecycleConfig, path: &Path) -> std::io::Result<Self> {
        let mut inner = StoreInner::default();
        let journal = Journal::open(path, &mut inner)?;
        let signer = TokenSigner::new(config.signing_secret);
        Ok(Self {
            config,
            signer,
            inner: Mutex::new(inner),
            journal: Some(Mutex::new(journal)),
        })
    }

    pub fn config(&self) -> &LifecycleConfig {
        &self.config
    }

    fn record(&self, records: &[Record]) -> Result<(), std::io::Error> {
        if let Some(j) = &self.journal {
            let mut j = j.lock();
            for r in records {
                j.append(r)?;
            }
        }
        Ok(())
    }

    fn view(&self, c: &Challenge) -> ChallengeView {
        ChallengeView {
            id: c.id.clone(),
            category: c.category,
            question: c.rendered.text.clone(),
            image: c
                .rendered
                .image
                .as_ref()
                .map(|_| format!("/v1/challenges/{}/image", c.id)),
            deadline: c.deadline,
            attempts_remaining: self
                .config
                .max_attempts_per_challenge
                .saturating_sub(c.attempts_used),
        }
    }

    fn new_challenge(
        &self,
        bank: &QuestionBank,
        session_id: &str,
        category: Category,
        now: Timestamp,
        seed: u64,
    ) -> Result<Challenge, LifecycleError> {
        let template = sample_template(bank, category, seed)?;
        let rendered = instantiate_with_policy(template, instance_seed(seed), &self.config.grading);
        Ok(Challenge {
            id: new_challenge_id(),
            session_id: session_id.to_owned(),
            category,
            rendered,
            issued_at: now,
            deadline: now.plus(self.config.time_limit_secs),
            attempts_used: 0,
            state: ChallengeState::Active,
            decided_at: None,
        })
    }

    /// Issues a fresh challenge in `category` for `session_id`.
    pub fn issue(
        &self,
        bank: &QuestionBank,
        session_id: &str,
        category: Category,
        now: Timestamp,
        seed: u64,
    ) -> Result<ChallengeView, LifecycleError> {
        let mut inner = self.inner.lock();
        let session = inner
            .sessions
            .get(session_id)
            .copied()
            .unwrap_or(SessionState {
                retries_used: 0,
                last_seen: now.0,
            });
        if session.retries_used >= self.config.max_retries_per_session {
            return Err(LifecycleError::RateLimited);
        }
        let challenge = self.new_challenge(bank, session_id, category, now, seed)?;
        let session = SessionState {
            last_seen: now.0,
            ..session
        };
        self.record(&[
            Record::Challenge(Box::new(challenge.clone())),
            Record::Session {
                id: session_id.to_owned(),
                retries_used: session.retries_used,
                last_seen: session.last_seen,
            },
        ])?;
        let view = self.view(&challenge);
        inner.sessions.insert(session_id.to_owned(), session);
        inner.challenges.insert(challenge.id.clone(), challenge);
        Ok(view)
    }

    /// Replaces an active challenge with a new one in the same category and
    /// restarts the timer.
    pub fn retry(
        &self,
        bank: &QuestionBank,
        challenge_id: &str,
        now: Timestamp,
        seed: u64,
    ) -> Result<ChallengeView, LifecycleError> {
        let mut inner = self.inner.lock();
        let old = inner
            .challenges
            .get(challenge_id)
            .ok_or(LifecycleError::Unknown)?;
        if old.state != ChallengeState::Active {
            return Err(LifecycleError::AlreadyDecided);
        }
        let session_id = old.session_id.clone();
        let category = old.category;
        let mut session = inner
            .sessions
            .get(&session_id)
            .copied()
            .unwrap_or(SessionState {
                retries_used: 0,
                last_seen: now.0,
            });
        if session.retries_used >= self.config.max_retries_per_session {
            return Err(LifecycleError::RateLimited);
        }
        let fresh = self.new_challenge(bank, &session_id, category, now, seed)?;
        session.retries_used += 1;
        session.last_seen = now.0;

        let mut old = inner.challenges[challenge_id].clone();
        old.state = ChallengeState::Superseded;
        old.decided_at = Some(now);
        self.record(&[
            Record::Challenge(Box::new(old.clone())),
            Record::Challenge(Box::new(fresh.clone())),
            Record::Session {
                id: session_id.clone(),
                retries_used: session.retries_used,
                last_seen: session.last_seen,
            },
        ])?;
        let view = self.view(&fresh);
        inner.challenges.insert(old.id.clone(), old);
        inner.challenges.insert(fresh.id.clone(), fresh);
        inner.sessions.insert(session_id, session);
        Ok(view)
    }

    /// Grades a submission. The decision and any state change happen under
    /// the store lock, so at most one caller ever sees `Passed`.
    pub fn verify(
        &self,
        challenge_id: &str,
        submission: &str,
        now: Timestamp,
    ) -> Result<VerifyOutcome, LifecycleError> {
        let mut inner = self.inner.lock();
        let Some(c) = inner.challenges.get(challenge_id) else {
            return Ok(VerifyOutcome::Unknown);
        };
        if c.state != ChallengeState::Active {
            return Ok(VerifyOutcome::AlreadyDecided);
        }
        let mut c = c.clone();
        let outcome = if now > c.deadline {
            c.state = ChallengeState::Expired;
            c.decided_at = Some(now);
            VerifyOutcome::Expired
        } else {
            // Oversize input counts as a wrong answer.
            let passed = grade(submission, &c.rendered.canonical_answers, &self.config.grading)
                .map(|v| v.is_pass())
                .unwrap_or(false);
            if passed {
                c.state = ChallengeState::Passed;
                c.decided_at = Some(now);
                let token = self
                    .signer
                    .mint(&c.id, now, now.plus(self.config.pass_token_ttl_secs));
                VerifyOutcome::Passed { pass_token: token }
            } else {
                c.attempts_used += 1;
                let remaining = self
                    .config
                    .max_attempts_per_challenge
                    .saturating_sub(c.attempts_used);
                if remaining == 0 {
                    c.state = ChallengeState::Failed;
                    c.decided_at = Some(now);
                    VerifyOutcome::Exhausted
                } else {
                    VerifyOutcome::WrongAnswer {
                        attempts_remaining: remaining,
                    }
                }
            }
        };
        self.record(&[Record::Challenge(Box::new(c.clone()))])?;
        inner.challenges.insert(c.id.clone(), c);
        Ok(outcome)
    }

    /// Accepts a pass token once: valid signature, not expired, never seen.
    pub fn redeem(&self, pass_token: &str, now: Timestamp) -> Result<RedeemOutcome, LifecycleError> {
        let (payload, sig) = match self.signer.open(pass_token) {
            Ok(opened) => opened,
            Err(reason) => return Ok(RedeemOutcome::Rejected { reason }),
        };
        if now.0 > payload.exp {
            return Ok(RedeemOutcome::Rejected {
                reason: RejectReason::Expired,
            });
        }
        let mut inner = self.inner.lock();
        if inner.spent.contains_key(&sig) {
            return Ok(RedeemOutcome::Rejected {
                reason: RejectReason::Replayed,
            });
        }
        self.record(&[Record::Spent {
            sig: sig.clone(),
            exp: payload.exp,
        }])?;
        inner.spent.insert(sig, payload.exp);
        Ok(RedeemOutcome::Accepted {
            challenge_id: payload.cid,
        })
    }

    /// Expires overdue active challenges and evicts decided ones older than
    /// the retention window. Returns how many challenges changed or left.
    pub fn sweep(&self, now: Timestamp) -> Result<usize, LifecycleError> {
        let mut inner = self.inner.lock();
        let retention = self.config.retention_secs;
        let mut records = Vec::new();
        let mut count = 0;

        let mut evict = Vec::new();
        for c in inner.challenges.values_mut() {
            match (c.state, c.decided_at) {
                (ChallengeState::Active, _) if now > c.deadline => {
                    c.state = ChallengeState::Expired;
                    c.decided_at = Some(now);
                    records.push(Record::Challenge(Box::new(c.clone())));
                    count += 1;
                }
                (ChallengeState::Active, _) => {}
                (_, Some(decided)) if decided.plus(retention) < now => {
                    evict.push(c.id.clone());
                }
                _ => {}
            }
        }
        for id in evict {
            inner.challenges.remove(&id);
            records.push(Record::Evict { id });
            count += 1;
        }

        // Spent tokens past expiry would be rejected as expired anyway.
        inner.spent.retain(|_, exp| *exp >= now.0);

        let live_sessions: std::collections::HashSet<String> =
            inner.challenges.values().map(|c| c.session_id.clone()).collect();
        let stale: Vec<String> = inner
            .sessions
            .iter()
            .filter(|(id, s)| !live_sessions.contains(*id) && s.last_seen + retention < now.0)
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            inner.sessions.remove(&id);
            records.push(Record::SessionEvict { id });
        }

        self.record(&records)?;
        Ok(count)
    }

    /// Server-side copy of a challenge, answers included.
    pub fn challenge(&self, challenge_id: &str) -> Option<Challenge> {
        self.inner.lock().challenges.get(challenge_id).cloned()
    }

    /// The PGM image of a text-category challenge.
    pub fn image(&self, challenge_id: &str) -> Option<Vec<u8>> {
        self.inner
            .lock()
            .challenges
            .get(challenge_id)
            .and_then(|c| c.rendered.image.clone())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().challenges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

mod hex_key {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(key: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&key.iter().map(|b| format!("{b:02x}")).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        super::parse_secret(&s).map_err(serde::de::Error::custom)
    }
}

/// Parses a 64-character hex signing secret.
pub fn parse_secret(hex: &str) -> Result<[u8; 32], String> {
    let hex = hex.trim();
    if hex.len() != 64 || !hex.is_ascii() {
        return Err("signing secret must be 64 hex characters".into());
    }
    let mut key = [0u8; 32];
    for (i, byte) in key.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
            .map_err(|_| "signing secret must be 64 hex characters".to_string())?;
    }
    Ok(key)
}
