use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cohort, Gender, LikertCoding, SurveyDataset, SurveyError, SurveyRecord, QUESTIONS, TIMED_QUESTIONS};
use crate::bank::Category;
use crate::stats::{mean, round_to, scalar_from_u64, Real, Rounding, Scalar};

/// Record selection; `None` fields match everything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub cohort: Option<Cohort>,
    pub gender: Option<Gender>,
}

impl Filter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn cohort(cohort: Cohort) -> Self {
        Self {
            cohort: Some(cohort),
            gender: None,
        }
    }

    pub fn matches(&self, r: &SurveyRecord) -> bool {
        self.cohort.is_none_or(|c| c == r.cohort) && self.gender.is_none_or(|g| g == r.gender)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMode<S> {
    pub mean: S,
    /// Every code with the highest count, ascending. Ties are not broken.
    pub modes: Vec<u8>,
    pub n: u64,
    /// Count of each code 0..=3.
    pub counts: [u64; 4],
}

/// Mean and mode of the coded answers to `question` (1 to 6) over the
/// records `filter` selects.
pub fn mean_mode<S: Scalar>(
    dataset: &SurveyDataset,
    question: usize,
    filter: &Filter,
    coding: &LikertCoding,
) -> Result<MeanMode<S>, SurveyError> {
    if !(1..=QUESTIONS).contains(&question) {
        return Err(SurveyError::InvalidQuestion(question));
    }
    coding.validate()?;
    let mut counts = [0u64; 4];
    for r in dataset.records.iter().filter(|r| filter.matches(r)) {
        counts[coding.code(r.answers[question - 1]) as usize] += 1;
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(SurveyError::EmptySelection);
    }
    let total: u64 = counts.iter().enumerate().map(|(code, c)| code as u64 * c).sum();
    let top = *counts.iter().max().expect("four counts");
    let modes = (0..4u8).filter(|c| counts[*c as usize] == top).collect();
    Ok(MeanMode {
        mean: scalar_from_u64::<S>(total) / scalar_from_u64(n),
        modes,
        n,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow<F> {
    /// Mean seconds for each of the five questions, where sampled.
    pub per_question: [Option<F>; TIMED_QUESTIONS as usize],
    /// Mean of the per-question means, unrounded.
    pub average: F,
    /// `average` cut to two decimals.
    pub display: F,
}

/// Per-category solve times: each question's mean over its samples, and
/// the mean of those question means.
pub fn timing_averages<F: Real>(
    dataset: &SurveyDataset,
    rounding: Rounding,
) -> Result<BTreeMap<Category, TimingRow<F>>, SurveyError> {
    let mut samples: BTreeMap<Category, [Vec<F>; TIMED_QUESTIONS as usize]> = BTreeMap::new();
    for t in dataset.records.iter().flat_map(|r| &r.timings) {
        let seconds = F::from_f64(t.seconds).expect("seconds representable");
        samples.entry(t.category).or_default()[t.question as usize - 1].push(seconds);
    }
    if samples.is_empty() {
        return Err(SurveyError::EmptySelection);
    }
    Ok(samples
        .into_iter()
        .map(|(category, by_q)| {
            let per_question = by_q.map(|s| mean(&s));
            let present: Vec<F> = per_question.iter().flatten().copied().collect();
            let average = mean(&present).expect("category has a sample");
            let row = TimingRow {
                per_question,
                average,
                display: round_to(average, 2, rounding),
            };
            (category, row)
        })
        .collect())
}

/// Percentage of respondents with a stated preference who picked each
/// category. All five categories are listed.
pub fn likeliness_distribution(dataset: &SurveyDataset) -> Result<BTreeMap<Category, f64>, SurveyError> {
    let mut counts: BTreeMap<Category, u64> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for c in dataset.records.iter().filter_map(|r| r.preferred_category) {
        *counts.get_mut(&c).expect("all categories listed") += 1;
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(SurveyError::EmptySelection);
    }
    Ok(counts
        .into_iter()
        .map(|(c, k)| (c, 100.0 * k as f64 / total as f64))
        .collect())
}
