//! Answer normalization and comparison.
//!
//! Submissions and canonical answers go through the same [`normalize`]
//! pipeline, and a submission passes only on exact equality afterwards.
//! The pipeline steps run in a fixed order:
//!
//! 1. trim and collapse whitespace
//! 2. case fold
//! 3. strip terminal punctuation (`.`, `,`, `!`, `?`)
//! 4. strip one leading article (`a`, `an`, `the`)
//! 5. map a whole-string number word in `0..=100` to digits
//!
//! Every step can be switched off through [`GradingPolicy`];
//! [`GradingPolicy::lowercase_only`] keeps just the case fold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted submission, in characters.
pub const MAX_INPUT_CHARS: usize = 256;

const TERMINAL_PUNCTUATION: &[char] = &['.', ',', '!', '?'];
const ARTICLES: &[&str] = &["a", "an", "the"];

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradingError {
    #[error("input of {0} characters exceeds the {MAX_INPUT_CHARS}-character limit")]
    OversizeInput(usize),
    #[error("{0} is outside the spellable range 0..=100")]
    OutOfRange(i64),
}

/// Which normalization steps apply before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradingPolicy {
    pub case_fold: bool,
    pub trim_and_collapse_whitespace: bool,
    pub strip_terminal_punctuation: bool,
    pub numeral_word_equivalence: bool,
    pub strip_leading_articles: bool,
}

impl Default for GradingPolicy {
    fn default() -> Self {
        Self {
            case_fold: true,
            trim_and_collapse_whitespace: true,
            strip_terminal_punctuation: true,
            numeral_word_equivalence: true,
            strip_leading_articles: true,
        }
    }
}

impl GradingPolicy {
    /// Only lowercases; every other step is off.
    pub fn lowercase_only() -> Self {
        Self {
            case_fold: true,
            trim_and_collapse_whitespace: false,
            strip_terminal_punctuation: false,
            numeral_word_equivalence: false,
            strip_leading_articles: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass { matched_canonical: String },
    Fail,
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

/// Normalizes `raw` under `policy`.
pub fn normalize(raw: &str, policy: &GradingPolicy) -> Result<String, GradingError> {
    let len = raw.chars().count();
    if len > MAX_INPUT_CHARS {
        return Err(GradingError::OversizeInput(len));
    }

    let mut s = if policy.trim_and_collapse_whitespace {
        raw.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        raw.to_owned()
    };

    if policy.case_fold {
        s = s.to_lowercase();
    }

    // Stripping punctuation can expose trailing whitespace ("mango ."), and
    // stripping an article can expose punctuation ("the ."), so the two
    // stripping steps loop until neither changes anything. That keeps the
    // whole pipeline idempotent.
    loop {
        let before = s.len();
        if policy.strip_terminal_punctuation {
            s = strip_terminal_punctuation(&s, policy.trim_and_collapse_whitespace);
        }
        if policy.strip_leading_articles {
            s = strip_leading_article(&s, policy.case_fold);
        }
        if s.len() == before {
            break;
        }
    }

    if policy.numeral_word_equivalence {
        if let Some(n) = parse_number_word(&s) {
            s = n.to_string();
        }
    }
    Ok(s)
}

fn strip_terminal_punctuation(s: &str, retrim: bool) -> String {
    let mut out = s.trim_end_matches(TERMINAL_PUNCTUATION);
    if retrim {
        out = out.trim_end();
    }
    out.to_owned()
}

fn strip_leading_article(s: &str, case_folded: bool) -> String {
    for article in ARTICLES {
        let Some(head) = s.get(..article.len()) else {
            continue;
        };
        let matches = if case_folded {
            head == *article
        } else {
            head.eq_ignore_ascii_case(article)
        };
        if !matches {
            continue;
        }
        let rest = &s[article.len()..];
        // Only a standalone word followed by more text counts ("the east",
        // not "theatre" and not a bare "a").
        if let Some(tail) = rest.strip_prefix(' ') {
            let tail = tail.trim_start_matches(' ');
            if !tail.is_empty() {
                return tail.to_owned();
            }
        }
    }
    s.to_owned()
}

/// Spells `n` in lowercase English, hyphenating compounds ("forty-five").
pub fn spell_number(n: i64) -> Result<String, GradingError> {
    match n {
        0..=19 => Ok(ONES[n as usize].to_owned()),
        20..=99 => {
            let (t, o) = ((n / 10) as usize, (n % 10) as usize);
            if o == 0 {
                Ok(TENS[t].to_owned())
            } else {
                Ok(format!("{}-{}", TENS[t], ONES[o]))
            }
        }
        100 => Ok("one hundred".to_owned()),
        _ => Err(GradingError::OutOfRange(n)),
    }
}

/// Inverse of [`spell_number`]. Also accepts "hundred", "a hundred" and
/// compounds written with a space ("forty five"). Expects lowercase input.
pub fn parse_number_word(s: &str) -> Option<i64> {
    match s {
        "hundred" | "a hundred" | "one hundred" => return Some(100),
        _ => {}
    }
    if let Some(i) = ONES.iter().position(|w| *w == s) {
        return Some(i as i64);
    }
    if let Some(i) = TENS.iter().position(|w| !w.is_empty() && *w == s) {
        return Some(10 * i as i64);
    }
    let (tens, ones) = s.split_once(['-', ' '])?;
    let t = TENS.iter().position(|w| !w.is_empty() && *w == tens)?;
    let o = ONES[1..10].iter().position(|w| *w == ones)? + 1;
    Some((10 * t + o) as i64)
}

/// Grades a submission against pre-normalized canonical answers.
pub fn grade(
    submission: &str,
    canonical_answers: &[String],
    policy: &GradingPolicy,
) -> Result<Verdict, GradingError> {
    let normalized = normalize(submission, policy)?;
    Ok(canonical_answers
        .iter()
        .find(|c| **c == normalized)
        .map(|c| Verdict::Pass {
            matched_canonical: c.clone(),
        })
        .unwrap_or(Verdict::Fail))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> String {
        normalize(s, &GradingPolicy::default()).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(norm("  MANGO. "), "mango");
        assert_eq!(norm("fifteen"), "15");
        assert_eq!(norm("mango"), "mango");
        assert_eq!(norm("The East"), "east");
        assert_eq!(norm("The 15."), "15");
        assert_eq!(norm("Forty Five!"), "45");
    }

    #[test]
    fn number_words_only_match_whole_string() {
        assert_eq!(norm("fifteen apples"), "fifteen apples");
        assert_eq!(norm("a fifteen"), "15");
    }

    #[test]
    fn articles_need_a_word_boundary() {
        assert_eq!(norm("theatre"), "theatre");
        assert_eq!(norm("a"), "a");
        assert_eq!(norm("an apple"), "apple");
        assert_eq!(norm("the"), "the");
    }

    #[test]
    fn oversize_input_is_rejected() {
        let long = "x".repeat(257);
        assert_eq!(
            normalize(&long, &GradingPolicy::default()),
            Err(GradingError::OversizeInput(257))
        );
        assert!(normalize(&"x".repeat(256), &GradingPolicy::default()).is_ok());
    }

    #[test]
    fn lowercase_only_policy_keeps_everything_else() {
        let p = GradingPolicy::lowercase_only();
        assert_eq!(normalize("  The EAST. ", &p).unwrap(), "  the east. ");
        assert_eq!(normalize("Fifteen", &p).unwrap(), "fifteen");
    }

    #[test]
    fn spell_number_examples() {
        assert_eq!(spell_number(0).unwrap(), "zero");
        assert_eq!(spell_number(15).unwrap(), "fifteen");
        assert_eq!(spell_number(45).unwrap(), "forty-five");
        assert_eq!(spell_number(100).unwrap(), "one hundred");
        assert_eq!(spell_number(101), Err(GradingError::OutOfRange(101)));
        assert_eq!(spell_number(-1), Err(GradingError::OutOfRange(-1)));
    }

    #[test]
    fn number_words_round_trip_over_the_whole_range() {
        for n in 0..=100 {
            let w = spell_number(n).unwrap();
            assert_eq!(parse_number_word(&w), Some(n), "{w}");
            assert_eq!(norm(&w.to_uppercase()), n.to_string());
        }
    }

    #[test]
    fn grade_examples() {
        let east = vec!["east".to_owned()];
        let fifteen = vec!["15".to_owned()];
        let p = GradingPolicy::default();
        assert!(grade("The East", &east, &p).unwrap().is_pass());
        assert!(grade("Fifteen", &fifteen, &p).unwrap().is_pass());
        assert_eq!(grade("16", &fifteen, &p).unwrap(), Verdict::Fail);
        assert_eq!(
            grade("15", &fifteen, &p).unwrap(),
            Verdict::Pass {
                matched_canonical: "15".into()
            }
        );
    }
}
