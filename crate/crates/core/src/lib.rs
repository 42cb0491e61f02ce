//! Cognitive-question CAPTCHA core.
//!
//! - [`bank`]: templates, seeded instantiation, text-image rendering
//! - [`grading`]: answer normalization and comparison
//! - [`lifecycle`]: timed challenges, retries, verification, pass tokens
//! - [`harness`]: simulated attackers and pass-rate statistics
//! - [`survey`]: Likert and timing analytics over respondent CSVs
//! - [`stats`]: scalar-generic mean, rounding and Wilson intervals

pub mod bank;
pub mod grading;
pub mod harness;
pub mod lifecycle;
pub mod stats;
pub mod survey;

pub use bank::{Category, QuestionBank, QuestionTemplate, RenderedQuestion};
pub use grading::{GradingPolicy, Verdict};
pub use harness::{BotStrategy, TrialReport};
pub use lifecycle::{ChallengeStore, ChallengeView, LifecycleConfig, Timestamp, VerifyOutcome};
pub use survey::{SurveyDataset, SurveyError};

/// Survey mean/mode in double precision.
pub type MeanModeF64 = survey::MeanMode<f64>;
/// Survey mean/mode in single precision.
pub type MeanModeF32 = survey::MeanMode<f32>;
/// Survey mean/mode as an exact fraction.
pub type ExactMeanMode = survey::MeanMode<num_rational::Rational64>;
/// Per-category timing row in double precision.
pub type TimingRowF64 = survey::TimingRow<f64>;
/// Deadline margin row in double precision.
pub type MarginRowF64 = harness::MarginRow<f64>;
