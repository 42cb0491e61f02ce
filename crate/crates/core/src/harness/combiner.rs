//! Arithmetic guessing over the integers that appear in a question.
//!
//! Enumeration order, which is part of the contract:
//!
//! 1. depth 1: for every ordered pair of distinct positions `(i, j)` in
//!    text order, `x_i op x_j` for `op` in `+ - × ÷`;
//! 2. depth 2: for every depth-1 expression over `(i, j)` (same order) and
//!    every position `k` outside `{i, j}`, `e op x_k` then `x_k op e`,
//!    again for `op` in `+ - × ÷`.
//!
//! Division only counts when exact, overflow is skipped, and a value is
//! emitted only the first time it appears.

use std::collections::HashSet;

use crate::bank::expr::BinOp;
use crate::grading::parse_number_word;

const OPS: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];

/// Integers in `text`, in order: digit runs and spelled-out numbers
/// ("seven", "forty-five", "forty five", "one hundred").
pub fn extract_integers(text: &str) -> Vec<i64> {
    let words: Vec<String> = text
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
        .map(|w| w.trim_matches('-').to_ascii_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let w = &words[i];
        if let Some(next) = words.get(i + 1) {
            if let Some(v) = parse_number_word(&format!("{w} {next}")) {
                out.push(v);
                i += 2;
                continue;
            }
        }
        if w.bytes().all(|b| b.is_ascii_digit()) {
            if let Ok(v) = w.parse() {
                out.push(v);
            }
        } else if let Some(v) = parse_number_word(w) {
            out.push(v);
        }
        i += 1;
    }
    out
}

/// The first `limit` distinct candidate values for `numbers`, searching at
/// most `max_depth` operator levels (1 or 2).
pub fn candidates(numbers: &[i64], max_depth: u8, limit: usize) -> Vec<i64> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut push = |v: i64, out: &mut Vec<i64>| {
        if out.len() < limit && seen.insert(v) {
            out.push(v);
        }
    };
    let n = numbers.len();
    let pairs = || (0..n).flat_map(move |i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)));

    for (i, j) in pairs() {
        for op in OPS {
            if let Some(v) = op.apply(numbers[i], numbers[j]) {
                push(v, &mut out);
            }
        }
    }
    if max_depth < 2 {
        return out;
    }
    for (i, j) in pairs() {
        for inner in OPS {
            let Some(e) = inner.apply(numbers[i], numbers[j]) else {
                continue;
            };
            for k in (0..n).filter(|k| *k != i && *k != j) {
                for op in OPS {
                    if out.len() >= limit {
                        return out;
                    }
                    if let Some(v) = op.apply(e, numbers[k]) {
                        push(v, &mut out);
                    }
                    if let Some(v) = op.apply(numbers[k], e) {
                        push(v, &mut out);
                    }
                }
            }
        }
    }
    out
}
