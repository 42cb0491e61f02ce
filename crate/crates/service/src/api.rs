//! The JSON API as a plain function of request and time, so it can be
//! driven without a socket. [`crate::http`] adapts it to axum.

use std::net::IpAddr;

use cogcaptcha::lifecycle::{ChallengeStore, LifecycleError, RedeemOutcome, RejectReason, VerifyOutcome};
use cogcaptcha::{Category, QuestionBank, Timestamp};
use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::ServiceConfig;
use crate::rate::{client_key, rate_check, RateCounter, RateDecision};

pub const PGM_CONTENT_TYPE: &str = "image/x-portable-graymap";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
    Other,
}

impl Method {
    pub fn parse(s: &str) -> Self {
        match s {
            "GET" => Method::Get,
            "POST" => Method::Post,
            _ => Method::Other,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Request {
    pub method: Method,
    pub path: String,
    /// Lowercase names.
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
    pub remote: Option<IpAddr>,
}

impl Request {
    pub fn get(path: &str) -> Self {
        Self {
            method: Method::Get,
            path: path.into(),
            headers: Vec::new(),
            body: Vec::new(),
            remote: None,
        }
    }

    pub fn post(path: &str, body: Value) -> Self {
        Self {
            method: Method::Post,
            body: body.to_string().into_bytes(),
            ..Self::get(path)
        }
    }

    pub fn from(mut self, remote: IpAddr) -> Self {
        self.remote = Some(remote);
        self
    }

    pub fn header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_ascii_lowercase(), value.into()));
        self
    }

    fn header_value(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Response {
    fn json(status: u16, body: Value) -> Self {
        Self {
            status,
            headers: vec![
                ("content-type".into(), "application/json".into()),
                ("cache-control".into(), "no-store".into()),
            ],
            body: body.to_string().into_bytes(),
        }
    }

    fn error(status: u16, message: &str) -> Self {
        Self::json(status, json!({ "error": message }))
    }

    fn internal() -> Self {
        Self::error(500, "internal error")
    }

    pub fn json_body(&self) -> Option<Value> {
        serde_json::from_slice(&self.body).ok()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Deserialize)]
struct IssueBody {
    category: String,
    #[serde(default)]
    session: Option<String>,
}

#[derive(Deserialize)]
struct AnswerBody {
    answer: String,
}

#[derive(Deserialize)]
struct RedeemBody {
    pass_token: String,
}

/// Shared state behind every endpoint.
pub struct Service {
    bank: QuestionBank,
    store: ChallengeStore,
    rate: Mutex<RateCounter>,
    api_key_header: String,
    seeds: Mutex<ChaCha8Rng>,
}

impl Service {
    pub fn new(config: &ServiceConfig, bank: QuestionBank, store: ChallengeStore, seed: u64) -> Self {
        Self {
            bank,
            store,
            rate: Mutex::new(RateCounter::new(config.rate_limit.issues_per_minute)),
            api_key_header: config.rate_limit.api_key_header.to_ascii_lowercase(),
            seeds: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// In-memory store over `bank` with the given config.
    pub fn in_memory(config: &ServiceConfig, bank: QuestionBank, seed: u64) -> Self {
        let store = ChallengeStore::new(config.lifecycle.clone());
        Self::new(config, bank, store, seed)
    }

    pub fn store(&self) -> &ChallengeStore {
        &self.store
    }

    pub fn bank(&self) -> &QuestionBank {
        &self.bank
    }

    /// Expires overdue challenges, evicts old ones and prunes rate windows.
    pub fn sweep(&self, now: Timestamp) -> Result<usize, LifecycleError> {
        self.rate.lock().prune(now);
        self.store.sweep(now)
    }

    fn next_seed(&self) -> u64 {
        self.seeds.lock().random()
    }

    pub fn handle(&self, req: &Request, now: Timestamp) -> Response {
        let path = req.path.split('?').next().unwrap_or("");
        let segments: Vec<&str> = path.trim_matches('/').split('/').collect();
        match (req.method, segments.as_slice()) {
            (Method::Get, ["v1", "health"]) => Response::json(
                200,
                json!({ "status": "ok", "bank_version": self.bank.version(), "templates": self.bank.len() }),
            ),
            (Method::Get, ["v1", "categories"]) => self.categories(),
            (Method::Post, ["v1", "challenges"]) => self.issue(req, now),
            (Method::Post, ["v1", "challenges", id, "retry"]) => self.retry(req, id, now),
            (Method::Post, ["v1", "challenges", id, "answer"]) => self.answer(req, id, now),
            (Method::Get, ["v1", "challenges", id, "image"]) => self.image(id),
            (Method::Get, ["v1", "challenges", id, "audio"]) => match self.store.challenge(id) {
                Some(_) => Response::error(501, "audio challenges are not available"),
                None => Response::error(404, "unknown challenge"),
            },
            (Method::Post, ["v1", "tokens", "redeem"]) => self.redeem(req, now),
            (_, ["v1", "health" | "categories" | "challenges" | "tokens", ..]) if self.known_route(&segments) => {
                Response::error(405, "method not allowed")
            }
            _ => Response::error(404, "no such endpoint"),
        }
    }

    fn known_route(&self, segments: &[&str]) -> bool {
        matches!(
            segments,
            ["v1", "health"]
                | ["v1", "categories"]
                | ["v1", "challenges"]
                | ["v1", "challenges", _, "retry" | "answer" | "image" | "audio"]
                | ["v1", "tokens", "redeem"]
        )
    }

    fn categories(&self) -> Response {
        let list: Vec<Value> = Category::ALL
            .iter()
            .map(|c| {
                let templates = self.bank.templates(*c).len();
                json!({ "name": c.as_str(), "supported": c.is_supported() && templates > 0, "templates": templates })
            })
            .collect();
        Response::json(200, json!({ "categories": list }))
    }

    fn limited(&self, req: &Request, now: Timestamp) -> Option<Response> {
        let key = client_key(req.remote, req.header_value(&self.api_key_header));
        match rate_check(&mut self.rate.lock(), &key, now) {
            RateDecision::Allow => None,
            RateDecision::Deny { retry_after } => {
                let mut r = Response::json(429, json!({ "error": "rate limited", "retry_after": retry_after }));
                r.headers.push(("retry-after".into(), retry_after.to_string()));
                Some(r)
            }
        }
    }

    fn issue(&self, req: &Request, now: Timestamp) -> Response {
        let body: IssueBody = match serde_json::from_slice(&req.body) {
            Ok(b) => b,
            Err(_) => return Response::error(400, "expected {\"category\": <name>}"),
        };
        let Ok(category) = body.category.parse::<Category>() else {
            return Response::error(400, "unknown category");
        };
        if !category.is_supported() {
            return Response::error(400, "category is not supported");
        }
        if let Some(denied) = self.limited(req, now) {
            return denied;
        }
        let seed = self.next_seed();
        let session = body.session.unwrap_or_else(|| format!("s-{:016x}", self.next_seed()));
        match self.store.issue(&self.bank, &session, category, now, seed) {
            Ok(view) => Response::json(200, serde_json::to_value(view).expect("view serializes")),
            Err(e) => lifecycle_error(e),
        }
    }

    fn retry(&self, req: &Request, id: &str, now: Timestamp) -> Response {
        if self.store.challenge(id).is_none() {
            return Response::error(404, "unknown challenge");
        }
        if let Some(denied) = self.limited(req, now) {
            return denied;
        }
        let seed = self.next_seed();
        match self.store.retry(&self.bank, id, now, seed) {
            Ok(view) => Response::json(200, serde_json::to_value(view).expect("view serializes")),
            Err(e) => lifecycle_error(e),
        }
    }

    fn answer(&self, req: &Request, id: &str, now: Timestamp) -> Response {
        let body: AnswerBody = match serde_json::from_slice(&req.body) {
            Ok(b) => b,
            Err(_) => return Response::error(400, "expected {\"answer\": <text>}"),
        };
        match self.store.verify(id, &body.answer, now) {
            Ok(VerifyOutcome::Passed { pass_token }) => {
                Response::json(200, json!({ "outcome": "passed", "pass_token": pass_token }))
            }
            Ok(VerifyOutcome::WrongAnswer { attempts_remaining }) => Response::json(
                422,
                json!({ "outcome": "wrong_answer", "attempts_remaining": attempts_remaining }),
            ),
            Ok(VerifyOutcome::Exhausted) => {
                Response::json(422, json!({ "outcome": "exhausted", "attempts_remaining": 0 }))
            }
            Ok(VerifyOutcome::Expired) => Response::json(410, json!({ "outcome": "expired" })),
            Ok(VerifyOutcome::Unknown) => Response::error(404, "unknown challenge"),
            Ok(VerifyOutcome::AlreadyDecided) => Response::json(409, json!({ "outcome": "already_decided" })),
            Err(e) => lifecycle_error(e),
        }
    }

    fn image(&self, id: &str) -> Response {
        match self.store.image(id) {
            Some(pgm) => Response {
                status: 200,
                headers: vec![
                    ("content-type".into(), PGM_CONTENT_TYPE.into()),
                    ("cache-control".into(), "private, max-age=600".into()),
                ],
                body: pgm,
            },
            None => Response::error(404, "no image for this challenge"),
        }
    }

    fn redeem(&self, req: &Request, now: Timestamp) -> Response {
        let body: RedeemBody = match serde_json::from_slice(&req.body) {
            Ok(b) => b,
            Err(_) => return Response::error(400, "expected {\"pass_token\": <token>}"),
        };
        match self.store.redeem(&body.pass_token, now) {
            Ok(RedeemOutcome::Accepted { challenge_id }) => {
                Response::json(200, json!({ "result": "accepted", "challenge_id": challenge_id }))
            }
            Ok(RedeemOutcome::Rejected { reason }) => {
                let (status, text) = match reason {
                    RejectReason::BadSignature => (400, "bad_signature"),
                    RejectReason::Expired => (410, "expired"),
                    RejectReason::Replayed => (409, "replayed"),
                };
                Response::json(status, json!({ "result": "rejected", "reason": text }))
            }
            Err(e) => lifecycle_error(e),
        }
    }
}

fn lifecycle_error(e: LifecycleError) -> Response {
    match e {
        LifecycleError::UnsupportedCategory(_) => Response::error(400, "category is not supported"),
        LifecycleError::EmptyCategory(_) => Response::error(400, "category has no questions"),
        LifecycleError::RateLimited => Response::error(429, "retry budget exhausted"),
        LifecycleError::Unknown => Response::error(404, "unknown challenge"),
        LifecycleError::AlreadyDecided => Response::json(409, json!({ "outcome": "already_decided" })),
        LifecycleError::Journal(err) => {
            tracing::error!(%err, "journal write failed");
            Response::internal()
        }
    }
}
