//! Bot-harness target backed by a running service.

use std::time::Duration;

use cogcaptcha::harness::{HarnessError, Issued, Target};
use cogcaptcha::lifecycle::{ChallengeView, VerifyOutcome};
use cogcaptcha::Category;
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde_json::{json, Value};

pub struct HttpTarget {
    base: String,
    client: Client,
    api_key: Option<String>,
    /// Longest total time spent waiting out 429s for one request.
    pub max_rate_wait: Duration,
}

impl HttpTarget {
    /// `addr` is `host:port` or a full `http://` URL.
    pub fn new(addr: &str, api_key: Option<String>) -> Result<Self, HarnessError> {
        let base = if addr.contains("://") {
            addr.trim_end_matches('/').to_owned()
        } else {
            format!("http://{addr}")
        };
        let client = Client::builder()
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| HarnessError::TargetUnreachable(e.to_string()))?;
        Ok(Self {
            base,
            client,
            api_key,
            max_rate_wait: Duration::from_secs(300),
        })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Response, HarnessError> {
        let mut waited = Duration::ZERO;
        loop {
            let mut req = self.client.post(format!("{}{path}", self.base)).json(body);
            if let Some(k) = &self.api_key {
                req = req.header("x-api-key", k);
            }
            let resp = req.send().map_err(unreachable)?;
            if resp.status() != StatusCode::TOO_MANY_REQUESTS {
                return Ok(resp);
            }
            let wait = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok()?.parse::<u64>().ok())
                .map_or(Duration::from_secs(1), Duration::from_secs);
            if waited + wait > self.max_rate_wait {
                return Err(HarnessError::Target("rate limited".into()));
            }
            std::thread::sleep(wait);
            waited += wait;
        }
    }

    fn get(&self, path: &str) -> Result<Response, HarnessError> {
        self.client
            .get(format!("{}{path}", self.base))
            .send()
            .map_err(unreachable)
    }
}

fn unreachable(e: reqwest::Error) -> HarnessError {
    HarnessError::TargetUnreachable(e.to_string())
}

fn json_of(resp: Response) -> Result<Value, HarnessError> {
    resp.json().map_err(|e| HarnessError::Target(e.to_string()))
}

impl Target for HttpTarget {
    fn categories(&mut self) -> Result<Vec<Category>, HarnessError> {
        let body = json_of(self.get("/v1/categories")?)?;
        let list = body["categories"].as_array().cloned().unwrap_or_default();
        Ok(list
            .iter()
            .filter(|c| c["supported"] == true)
            .filter_map(|c| c["name"].as_str()?.parse().ok())
            .collect())
    }

    // the service draws its own seeds
    fn issue(&mut self, category: Category, _seed: u64) -> Result<Issued, HarnessError> {
        let resp = self.post("/v1/challenges", &json!({ "category": category.as_str() }))?;
        if !resp.status().is_success() {
            return Err(HarnessError::Target(format!("issue returned {}", resp.status())));
        }
        let view: ChallengeView = resp.json().map_err(|e| HarnessError::Target(e.to_string()))?;
        let image = match &view.image {
            Some(path) => Some(self.get(path)?.bytes().map_err(unreachable)?.to_vec()),
            None => None,
        };
        Ok(Issued { view, image })
    }

    fn answer(&mut self, challenge_id: &str, submission: &str) -> Result<VerifyOutcome, HarnessError> {
        let resp = self.post(&format!("/v1/challenges/{challenge_id}/answer"), &json!({ "answer": submission }))?;
        let status = resp.status();
        let body = json_of(resp)?;
        Ok(match status.as_u16() {
            200 => VerifyOutcome::Passed {
                pass_token: body["pass_token"].as_str().unwrap_or_default().to_owned(),
            },
            422 if body["outcome"] == "exhausted" => VerifyOutcome::Exhausted,
            422 => VerifyOutcome::WrongAnswer {
                attempts_remaining: body["attempts_remaining"].as_u64().unwrap_or(0) as u32,
            },
            410 => VerifyOutcome::Expired,
            404 => VerifyOutcome::Unknown,
            409 => VerifyOutcome::AlreadyDecided,
            other => return Err(HarnessError::Target(format!("answer returned {other}"))),
        })
    }

    fn reveal(&mut self, _challenge_id: &str) -> Option<String> {
        None
    }
}
