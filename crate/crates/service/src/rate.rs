//! Per-client sliding-window limit on challenge issues.

use std::collections::{HashMap, VecDeque};
use std::net::IpAddr;

use cogcaptcha::Timestamp;

pub const WINDOW_SECS: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateDecision {
    Allow,
    /// Seconds until the oldest event leaves the window.
    Deny { retry_after: u64 },
}

/// Issue timestamps per client key, oldest first.
#[derive(Debug)]
pub struct RateCounter {
    budget: u32,
    windows: HashMap<String, VecDeque<u64>>,
}

impl RateCounter {
    pub fn new(budget: u32) -> Self {
        Self {
            budget,
            windows: HashMap::new(),
        }
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    /// Events currently held for `key`.
    pub fn in_window(&self, key: &str) -> usize {
        self.windows.get(key).map_or(0, VecDeque::len)
    }

    /// Drops events that have aged out and forgets idle clients.
    pub fn prune(&mut self, now: Timestamp) {
        for w in self.windows.values_mut() {
            expire(w, now.0);
        }
        self.windows.retain(|_, w| !w.is_empty());
    }

    pub fn clients(&self) -> usize {
        self.windows.len()
    }
}

fn expire(window: &mut VecDeque<u64>, now: u64) {
    while window.front().is_some_and(|t| now.saturating_sub(*t) >= WINDOW_SECS) {
        window.pop_front();
    }
}

/// Allows and records the event when fewer than `budget` events from
/// `client_key` fall in the last minute.
pub fn rate_check(counter: &mut RateCounter, client_key: &str, now: Timestamp) -> RateDecision {
    let budget = counter.budget as usize;
    let window = counter.windows.entry(client_key.to_owned()).or_default();
    expire(window, now.0);
    if window.len() < budget {
        window.push_back(now.0);
        return RateDecision::Allow;
    }
    let oldest = *window.front().expect("budget is positive");
    RateDecision::Deny {
        retry_after: (oldest + WINDOW_SECS).saturating_sub(now.0).max(1),
    }
}

/// Source address, plus the API key when the client sent one.
pub fn client_key(remote: Option<IpAddr>, api_key: Option<&str>) -> String {
    let addr = remote.map_or_else(|| "unknown".to_owned(), |a| a.to_string());
    match api_key {
        Some(k) if !k.is_empty() => format!("{addr}|{k}"),
        _ => addr,
    }
}
