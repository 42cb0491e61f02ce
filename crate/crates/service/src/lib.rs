//! HTTP front end for the cognitive-question CAPTCHA, plus the pieces the
//! `cogcaptcha` binary needs.

pub mod api;
pub mod client;
pub mod config;
pub mod http;
pub mod rate;

pub use api::{Method, Request, Response, Service};
pub use client::HttpTarget;
pub use config::{ConfigError, RateLimitConfig, ServiceConfig};
pub use rate::{client_key, rate_check, RateCounter, RateDecision};
