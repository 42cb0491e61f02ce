//! Survey analytics: Likert mean/mode by cohort, per-category solve times
//! and category preferences, read from a respondent CSV.
//!
//! CSV header (exact order):
//!
//! ```text
//! respondent_id,cohort,gender,department,q1,q2,q3,q4,q5,q6,preferred_category,timing_category,timing_q,timing_seconds
//! ```
//!
//! A respondent may span several rows, one per timing sample; the
//! non-timing columns must then agree. The three timing columns are either
//! all empty or all set.

mod analysis;
mod report;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::Category;

pub use analysis::{likeliness_distribution, mean_mode, timing_averages, Filter, MeanMode, TimingRow};
pub use report::{build_report, export_report, ReportOptions, SurveyReport};

pub const HEADER: [&str; 14] = [
    "respondent_id",
    "cohort",
    "gender",
    "department",
    "q1",
    "q2",
    "q3",
    "q4",
    "q5",
    "q6",
    "preferred_category",
    "timing_category",
    "timing_q",
    "timing_seconds",
];

/// Number of Likert questions per respondent.
pub const QUESTIONS: usize = 6;
/// Timed questions per category.
pub const TIMED_QUESTIONS: u8 = 5;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("row {row}, column `{column}`: {reason}")]
    Schema {
        row: u64,
        column: String,
        reason: String,
    },
    #[error("no records match the selection")]
    EmptySelection,
    #[error("question must be 1 to {QUESTIONS}, got {0}")]
    InvalidQuestion(usize),
    #[error("likert coding must map the four answers onto 0..=3 one-to-one")]
    InvalidCoding,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn schema(row: u64, column: &str, reason: impl Into<String>) -> SurveyError {
    SurveyError::Schema {
        row,
        column: column.to_owned(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likert {
    Disagree,
    PartiallyAgree,
    Agree,
    StronglyAgree,
}

impl Likert {
    pub const ALL: [Likert; 4] = [Likert::Disagree, Likert::PartiallyAgree, Likert::Agree, Likert::StronglyAgree];

    pub fn as_str(self) -> &'static str {
        match self {
            Likert::Disagree => "disagree",
            Likert::PartiallyAgree => "partially_agree",
            Likert::Agree => "agree",
            Likert::StronglyAgree => "strongly_agree",
        }
    }
}

impl FromStr for Likert {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Likert::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("{s:?} is not one of disagree, partially_agree, agree, strongly_agree"))
    }
}

/// Numeric codes for the four answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertCoding {
    pub disagree: u8,
    pub partially_agree: u8,
    pub agree: u8,
    pub strongly_agree: u8,
}

impl Default for LikertCoding {
    fn default() -> Self {
        Self {
            disagree: 0,
            partially_agree: 1,
            agree: 2,
            strongly_agree: 3,
        }
    }
}

impl LikertCoding {
    pub fn code(&self, value: Likert) -> u8 {
        match value {
            Likert::Disagree => self.disagree,
            Likert::PartiallyAgree => self.partially_agree,
            Likert::Agree => self.agree,
            Likert::StronglyAgree => self.strongly_agree,
        }
    }

    pub fn validate(&self) -> Result<(), SurveyError> {
        let mut seen = [false; 4];
        for l in Likert::ALL {
            let c = self.code(l) as usize;
            if c > 3 || seen[c] {
                return Err(SurveyError::InvalidCoding);
            }
            seen[c] = true;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    Technical,
    NonTechnical,
}

impl Cohort {
    pub const ALL: [Cohort; 2] = [Cohort::Technical, Cohort::NonTechnical];

    pub fn as_str(self) -> &'static str {
        match self {
            Cohort::Technical => "technical",
            Cohort::NonTechnical => "non_technical",
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unspecified,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unspecified => "unspecified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSample {
    pub category: Category,
    /// 1 to 5.
    pub question: u8,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub respondent_id: String,
    /// First CSV line of this respondent.
    pub row: u64,
    pub cohort: Cohort,
    pub gender: Gender,
    pub department: String,
    pub answers: [Likert; QUESTIONS],
    pub preferred_category: Option<Category>,
    pub timings: Vec<TimingSample>,
}

/// Parsed respondents in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurveyDataset {
    pub records: Vec<SurveyRecord>,
}

impl SurveyDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the dataset back out in the input schema.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory write");
        for r in &self.records {
            let mut base: Vec<String> = vec![
                r.respondent_id.clone(),
                r.cohort.as_str().into(),
                r.gender.as_str().into(),
                r.department.clone(),
            ];
            base.extend(r.answers.iter().map(|a| a.as_str().to_owned()));
            base.push(r.preferred_category.map(|c| c.as_str().to_owned()).unwrap_or_default());
            if r.timings.is_empty() {
                let row = base.iter().cloned().chain(["".into(), "".into(), "".into()]);
                w.write_record(row.collect::<Vec<_>>()).expect("in-memory write");
            }
            for t in &r.timings {
                let row = base.iter().cloned().chain([
                    t.category.as_str().to_owned(),
                    t.question.to_string(),
                    t.seconds.to_string(),
                ]);
                w.write_record(row.collect::<Vec<_>>()).expect("in-memory write");
            }
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Parses a respondent CSV.
pub fn parse_csv(bytes: &[u8]) -> Result<SurveyDataset, SurveyError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes);
    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(schema(1, "respondent_id", "missing header row")),
        Some(h) => h.map_err(|e| schema(1, "respondent_id", e.to_string()))?,
    };
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != HEADER {
        let column = HEADER
            .iter()
            .zip(got.iter().chain(std::iter::repeat(&"")))
            .find(|(want, have)| want != have)
            .map(|(want, _)| *want)
            .unwrap_or("timing_seconds");
        return Err(schema(1, column, format!("header must be `{}`", HEADER.join(","))));
    }

    let mut dataset = SurveyDataset::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    for result in rows {
        let record = result.map_err(|e| {
            let row = e.position().map(|p| p.line()).unwrap_or(0);
            schema(row, "respondent_id", e.to_string())
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != HEADER.len() {
            return Err(schema(
                row,
                HEADER[record.len().min(HEADER.len() - 1)],
                format!("expected {} fields, found {}", HEADER.len(), record.len()),
            ));
        }
        let field = |i: usize| record[i].trim();
        let parsed = parse_row(row, &field)?;

        match index.get(&parsed.respondent_id) {
            None => {
                index.insert(parsed.respondent_id.clone(), dataset.records.len());
                dataset.records.push(parsed);
            }
            Some(&i) => {
                let existing = &mut dataset.records[i];
                if let Some(column) = first_conflict(existing, &parsed) {
                    return Err(schema(
                        row,
                        column,
                        format!("conflicts with row {} for respondent {:?}", existing.row, existing.respondent_id),
                    ));
                }
                existing.timings.extend(parsed.timings);
            }
        }
    }
    Ok(dataset)
}

fn parse_row<'a>(row: u64, field: &impl Fn(usize) -> &'a str) -> Result<SurveyRecord, SurveyError> {
    let respondent_id = field(0).to_owned();
    if respondent_id.is_empty() {
        return Err(schema(row, "respondent_id", "must not be empty"));
    }
    let cohort = match field(1) {
        "technical" => Cohort::Technical,
        "non_technical" | "non-technical" => Cohort::NonTechnical,
        other => return Err(schema(row, "cohort", format!("{other:?} is not technical or non_technical"))),
    };
    let gender = match field(2) {
        "male" => Gender::Male,
        "female" => Gender::Female,
        "" | "unspecified" => Gender::Unspecified,
        other => return Err(schema(row, "gender", format!("{other:?} is not male, female or unspecified"))),
    };
    let mut answers = [Likert::Disagree; QUESTIONS];
    for (q, slot) in answers.iter_mut().enumerate() {
        *slot = field(4 + q).parse().map_err(|e: String| schema(row, HEADER[4 + q], e))?;
    }
    let preferred_category = match field(10) {
        "" => None,
        s => Some(s.parse().map_err(|_| schema(row, "preferred_category", format!("unknown category {s:?}")))?),
    };

    let timing = [field(11), field(12), field(13)];
    let timings = match timing {
        ["", "", ""] => Vec::new(),
        [cat, q, secs] => {
            for (i, v) in timing.iter().enumerate() {
                if v.is_empty() {
                    return Err(schema(row, HEADER[11 + i], "timing columns must be all set or all empty"));
                }
            }
            let category = cat
                .parse()
                .map_err(|_| schema(row, "timing_category", format!("unknown category {cat:?}")))?;
            let question: u8 = q
                .parse()
                .ok()
                .filter(|q| (1..=TIMED_QUESTIONS).contains(q))
                .ok_or_else(|| schema(row, "timing_q", format!("{q:?} is not 1 to {TIMED_QUESTIONS}")))?;
            let seconds: f64 = secs
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite() && *s > 0.0)
                .ok_or_else(|| schema(row, "timing_seconds", format!("{secs:?} is not a positive number")))?;
            vec![TimingSample {
                category,
                question,
                seconds,
            }]
        }
    };

    Ok(SurveyRecord {
        respondent_id,
        row,
        cohort,
        gender,
        department: field(3).to_owned(),
        answers,
        preferred_category,
        timings,
    })
}

fn first_conflict(a: &SurveyRecord, b: &SurveyRecord) -> Option<&'static str> {
    if a.cohort != b.cohort {
        return Some("cohort");
    }
    if a.gender != b.gender {
        return Some("gender");
    }
    if a.department != b.department {
        return Some("department");
    }
    if let Some(q) = (0..QUESTIONS).find(|q| a.answers[*q] != b.answers[*q]) {
        return Some(HEADER[4 + q]);
    }
    if a.preferred_category != b.preferred_category {
        return Some("preferred_category");
    }
    None
}
