//! Question bank: categories, templates, instantiation and text images.
//!
//! A bank is loaded from a versioned JSON document and validated as a
//! whole; a single bad template rejects the file. Once loaded it is
//! immutable and can be shared freely between threads.
//!
//! ```json
//! {
//!   "version": "1",
//!   "templates": [{
//!     "id": "age-third",
//!     "category": "mathematical",
//!     "body": ["{name}'s age is one third of his father's age.",
//!              "His father's age is {father_age}.", "How old is {name}?"],
//!     "distractors": [{"text": "{sibling} is {sibling_age} years old.", "at": 2}],
//!     "slots": [
//!       {"name": "name", "kind": "person_name"},
//!       {"name": "father_age", "kind": "integer", "lo": 30, "hi": 90, "step": 3},
//!       {"name": "sibling", "kind": "person_name", "distractor": true},
//!       {"name": "sibling_age", "kind": "integer", "lo": 2, "hi": 25, "distractor": true}
//!     ],
//!     "answer": "father_age / 3"
//!   }]
//! }
//! ```
//!
//! See `docs/bank-format.md` in the repository for the full schema.

pub mod expr;
pub mod instantiate;
pub mod lexicon;
pub mod render;
pub mod template;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::{eval_answer, AnswerExpr, Bindings, EvalError, Value};
pub use instantiate::{
    instantiate, instantiate_with_bindings, instantiate_with_policy, Instance, RenderedQuestion,
};
pub use render::{render_text_image, RenderError};
pub use template::{QuestionTemplate, SlotKind, SlotSpec, TemplateSpec};

/// Four fixed questions, one zero-slot template per supported category.
pub const STARTER_BANK_JSON: &str = include_str!("../../data/starter_bank.json");
/// Parameterized templates with distractors, the service default.
pub const DEFAULT_BANK_JSON: &str = include_str!("../../data/default_bank.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Analytical,
    Mathematical,
    General,
    Text,
    Image,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Analytical,
        Category::Mathematical,
        Category::General,
        Category::Text,
        Category::Image,
    ];

    /// Image is listed but never issued.
    pub fn is_supported(self) -> bool {
        self != Category::Image
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Analytical => "analytical",
            Category::Mathematical => "mathematical",
            Category::General => "general",
            Category::Text => "text",
            Category::Image => "image",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = BankError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| BankError::UnknownCategory(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BankError {
    #[error("malformed bank: {0}")]
    MalformedInput(String),
    #[error("invalid template {}: {reason}", template_id.as_deref().unwrap_or("<bank>"))]
    ValidationError {
        template_id: Option<String>,
        reason: String,
    },
    #[error("category `{0}` does not exist")]
    UnknownCategory(String),
    #[error("category `{0}` is not supported")]
    UnsupportedCategory(Category),
    #[error("category `{0}` has no templates")]
    EmptyCategory(Category),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankFile {
    pub version: String,
    pub templates: Vec<TemplateSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionBank {
    version: String,
    by_category: BTreeMap<Category, Vec<QuestionTemplate>>,
}

impl QuestionBank {
    /// Builds a bank from already-validated templates, enforcing bank-level
    /// invariants (unique ids, every supported category present).
    pub fn new(version: impl Into<String>, templates: Vec<QuestionTemplate>) -> Result<Self, BankError> {
        let version = version.into();
        if version.trim().is_empty() {
            return Err(BankError::ValidationError {
                template_id: None,
                reason: "version is empty".into(),
            });
        }
        let mut seen = HashSet::new();
        let mut by_category: BTreeMap<Category, Vec<QuestionTemplate>> = BTreeMap::new();
        for t in templates {
            if !seen.insert(t.id.clone()) {
                return Err(BankError::ValidationError {
                    template_id: Some(t.id.clone()),
                    reason: "duplicate template id".into(),
                });
            }
            by_category.entry(t.category).or_default().push(t);
        }
        for c in Category::ALL.into_iter().filter(|c| c.is_supported()) {
            if by_category.get(&c).is_none_or(Vec::is_empty) {
                return Err(BankError::ValidationError {
                    template_id: None,
                    reason: format!("category `{c}` has no templates"),
                });
            }
        }
        Ok(QuestionBank {
            version,
            by_category,
        })
    }

    /// A bank holding only the given templates, without requiring every
    /// category to be present. Meant for focused experiments.
    pub fn partial(version: impl Into<String>, templates: Vec<QuestionTemplate>) -> Result<Self, BankError> {
        let mut seen = HashSet::new();
        let mut by_category: BTreeMap<Category, Vec<QuestionTemplate>> = BTreeMap::new();
        for t in templates {
            if !seen.insert(t.id.clone()) {
                return Err(BankError::ValidationError {
                    template_id: Some(t.id.clone()),
                    reason: "duplicate template id".into(),
                });
            }
            by_category.entry(t.category).or_default().push(t);
        }
        Ok(QuestionBank {
            version: version.into(),
            by_category,
        })
    }

    pub fn starter() -> Self {
        load_bank(STARTER_BANK_JSON.as_bytes()).expect("shipped starter bank is valid")
    }

    pub fn default_bank() -> Self {
        load_bank(DEFAULT_BANK_JSON.as_bytes()).expect("shipped default bank is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn templates(&self, category: Category) -> &[QuestionTemplate] {
        self.by_category.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_templates(&self) -> impl Iterator<Item = &QuestionTemplate> {
        self.by_category.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_category.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_file(&self) -> BankFile {
        BankFile {
            version: self.version.clone(),
            templates: self.all_templates().map(QuestionTemplate::to_spec).collect(),
        }
    }
}

/// Parses and validates a bank document.
pub fn load_bank(serialized: &[u8]) -> Result<QuestionBank, BankError> {
    let file: BankFile =
        serde_json::from_slice(serialized).map_err(|e| BankError::MalformedInput(e.to_string()))?;
    let templates = file
        .templates
        .iter()
        .map(|spec| {
            QuestionTemplate::from_spec(spec).map_err(|reason| BankError::ValidationError {
                template_id: Some(spec.id.clone()),
                reason,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    QuestionBank::new(file.version, templates)
}

/// Picks a template of `category` uniformly, deterministically per seed.
pub fn sample_template(
    bank: &QuestionBank,
    category: Category,
    seed: u64,
) -> Result<&QuestionTemplate, BankError> {
    if !category.is_supported() {
        return Err(BankError::UnsupportedCategory(category));
    }
    let templates = bank.templates(category);
    if templates.is_empty() {
        return Err(BankError::EmptyCategory(category));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(&templates[rng.random_range(0..templates.len())])
}

/// Number of distinct question meanings (and answers) a template can
/// produce: the product of answer-relevant slot domain sizes, with
/// `distinct_from` groups counted by enumeration. Saturates at `u128::MAX`.
pub fn parameterization_count(template: &QuestionTemplate) -> u128 {
    let groups: Vec<Vec<usize>> = template
        .constraint_groups()
        .into_iter()
        .filter(|g| !template.slots[g[0]].distractor)
        .collect();
    let grouped: HashSet<usize> = groups.iter().flatten().copied().collect();
    let free = template
        .slots
        .iter()
        .enumerate()
        .filter(|(i, s)| !s.distractor && !grouped.contains(i))
        .map(|(_, s)| s.kind.domain_size())
        .fold(1u128, u128::saturating_mul);
    groups
        .iter()
        .map(|g| template::count_group(template, g))
        .fold(free, u128::saturating_mul)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn template(v: serde_json::Value) -> Result<QuestionTemplate, String> {
        QuestionTemplate::from_spec(&serde_json::from_value(v).unwrap())
    }

    fn age_template(lo: i64, hi: i64) -> Result<QuestionTemplate, String> {
        template(json!({
            "id": "age",
            "category": "mathematical",
            "body": ["Karim's age is one third to his father.", "His father age is {father_age}.",
                     "How old karim is?"],
            "slots": [{"name": "father_age", "kind": "integer", "lo": lo, "hi": hi}],
            "answer": "father_age ÷ 3"
        }))
    }

    #[test]
    fn starter_bank_has_one_question_per_category() {
        let bank = QuestionBank::starter();
        assert_eq!(bank.len(), 4);
        for c in [Category::Analytical, Category::Mathematical, Category::General, Category::Text] {
            assert_eq!(bank.templates(c).len(), 1, "{c}");
            assert_eq!(parameterization_count(&bank.templates(c)[0]), 1);
        }
        let q = instantiate(&bank.templates(Category::Mathematical)[0], 3);
        assert!(q.text.ends_with("His father age is 45. How old karim is?"), "{}", q.text);
        assert_eq!(q.canonical_answers, vec!["15"]);
        let q = instantiate(&bank.templates(Category::Analytical)[0], 3);
        assert_eq!(q.text, "Mina had orange and mango. Mina ate orange. Which fruit is left?");
        assert_eq!(q.canonical_answers, vec!["mango"]);
        let q = instantiate(&bank.templates(Category::General)[0], 3);
        assert_eq!(q.text, "In which direction does the Sun rise?");
        assert_eq!(q.canonical_answers, vec!["east"]);
    }

    #[test]
    fn default_bank_loads() {
        let bank = QuestionBank::default_bank();
        assert!(bank.len() >= 8);
        assert!(bank.templates(Category::Image).is_empty());
    }

    #[test]
    fn empty_category_is_a_validation_error() {
        let mut file: BankFile = serde_json::from_str(STARTER_BANK_JSON).unwrap();
        file.templates.retain(|t| t.category != Category::General);
        let err = load_bank(&serde_json::to_vec(&file).unwrap()).unwrap_err();
        assert!(matches!(err, BankError::ValidationError { template_id: None, .. }), "{err}");
    }

    #[test]
    fn divisibility_is_checked_by_enumeration() {
        assert!(age_template(45, 45).is_ok());
        let err = age_template(44, 46).unwrap_err();
        assert!(err.contains("not exact"), "{err}");
        // Oracle: the range passes only if every member is divisible by 3.
        for (lo, hi) in [(30, 30), (30, 33), (33, 36), (42, 48)] {
            let all_divisible = (lo..=hi).all(|v: i64| v % 3 == 0);
            assert_eq!(age_template(lo, hi).is_ok(), all_divisible, "{lo}..{hi}");
        }
    }

    #[test]
    fn step_ranges_keep_division_exact() {
        let t = template(json!({
            "id": "age", "category": "mathematical",
            "body": ["Father is {f}. How old is the son?"],
            "slots": [{"name": "f", "kind": "integer", "lo": 30, "hi": 91, "step": 3}],
            "answer": "f / 3"
        }))
        .unwrap();
        assert_eq!(parameterization_count(&t), 21);
    }

    #[test]
    fn malformed_and_invalid_templates() {
        assert!(matches!(load_bank(b"{not json"), Err(BankError::MalformedInput(_))));
        let cases = [
            (json!({"id": "x", "category": "general", "body": [], "answer": "1"}), "no clauses"),
            (json!({"id": "x", "category": "general", "body": ["{nope}?"], "answer": "1"}), "not declared"),
            (json!({"id": "x", "category": "general", "body": ["a?"], "answer": "nope"}), "not declared"),
            (json!({"id": "x", "category": "general", "body": ["{a}"], "answer": "a + 1",
                    "slots": [{"name": "a", "kind": "person_name"}]}), "arithmetic on text"),
            (json!({"id": "x", "category": "general", "body": ["{a}"], "answer": "1",
                    "slots": [{"name": "a", "kind": "integer", "lo": 3, "hi": 1}]}), "empty range"),
            (json!({"id": "x", "category": "general", "body": ["{a}"], "answer": "1",
                    "slots": [{"name": "a", "kind": "fixed_choice", "choices": []}]}), "no choices"),
            (json!({"id": "x", "category": "general", "body": ["{a}", "{a}"], "answer": "1",
                    "slots": [{"name": "a", "kind": "direction"}, {"name": "a", "kind": "direction"}]}), "duplicate slot"),
            (json!({"id": "x", "category": "general", "body": ["q?"], "answer": "d",
                    "distractors": ["{d}"],
                    "slots": [{"name": "d", "kind": "direction", "distractor": true}]}), "distractor slot"),
            (json!({"id": "x", "category": "general", "body": ["{d} q?"], "answer": "1",
                    "slots": [{"name": "d", "kind": "direction", "distractor": true}]}), "body clause references distractor"),
            (json!({"id": "x", "category": "image", "body": ["q?"], "answer": "1"}), "not supported"),
            (json!({"id": "x", "category": "text", "body": ["q?"], "answer": "'ab'"}), "text-category"),
            (json!({"id": "x", "category": "general", "body": ["{a:words}"], "answer": "1",
                    "slots": [{"name": "a", "kind": "integer", "lo": 0, "hi": 101}]}), ":words"),
            (json!({"id": "x", "category": "general", "body": ["{a} {b}"], "answer": "1",
                    "slots": [{"name": "a", "kind": "fixed_choice", "choices": ["p"], "distinct_from": ["b"]},
                              {"name": "b", "kind": "fixed_choice", "choices": ["p"]}]}), "cannot be satisfied"),
        ];
        for (spec, needle) in cases {
            let err = template(spec.clone()).unwrap_err();
            assert!(err.contains(needle), "{spec}: {err}");
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut file: BankFile = serde_json::from_str(STARTER_BANK_JSON).unwrap();
        file.templates.push(file.templates[0].clone());
        let err = load_bank(&serde_json::to_vec(&file).unwrap()).unwrap_err();
        assert!(err.to_string().contains("duplicate template id"), "{err}");
    }

    #[test]
    fn sampling_rules() {
        let bank = QuestionBank::starter();
        let only = &bank.templates(Category::General)[0];
        for seed in 0..20 {
            assert_eq!(sample_template(&bank, Category::General, seed).unwrap(), only);
        }
        assert_eq!(
            sample_template(&bank, Category::Image, 1),
            Err(BankError::UnsupportedCategory(Category::Image))
        );
        let partial = QuestionBank::partial("p", vec![only.clone()]).unwrap();
        assert_eq!(
            sample_template(&partial, Category::Text, 1),
            Err(BankError::EmptyCategory(Category::Text))
        );
    }

    #[test]
    fn parameterization_counts() {
        let t = template(json!({
            "id": "x", "category": "mathematical",
            "body": ["{n} apples. How many?"],
            "distractors": ["{who} is here."],
            "slots": [{"name": "n", "kind": "integer", "lo": 10, "hi": 19},
                      {"name": "who", "kind": "fixed_choice", "distractor": true,
                       "choices": (0..20).map(|i| format!("P{i}")).collect::<Vec<_>>()}],
            "answer": "n"
        }))
        .unwrap();
        assert_eq!(parameterization_count(&t), 10);

        let t = template(json!({
            "id": "x", "category": "mathematical", "body": ["{a} and {b}?"],
            "slots": [{"name": "a", "kind": "integer", "lo": 1, "hi": 5},
                      {"name": "b", "kind": "integer", "lo": 1, "hi": 4}],
            "answer": "a + b"
        }))
        .unwrap();
        // enumerate all bindings and count distinct (text, answer) pairs
        let mut seen = HashSet::new();
        for a in 1..=5 {
            for b in 1..=4 {
                seen.insert((format!("{a} and {b}?"), a + b));
            }
        }
        assert_eq!(parameterization_count(&t), seen.len() as u128);
        assert_eq!(seen.len(), 20);

        let t = template(json!({
            "id": "x", "category": "analytical", "body": ["{a} {b} {c}"],
            "slots": [{"name": "a", "kind": "direction"},
                      {"name": "b", "kind": "direction", "distinct_from": ["a"]},
                      {"name": "c", "kind": "direction", "distinct_from": ["a", "b"]}],
            "answer": "c"
        }))
        .unwrap();
        assert_eq!(parameterization_count(&t), 4 * 3 * 2);
    }

    #[test]
    fn category_wire_names() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        assert!("audio".parse::<Category>().is_err());
    }

    #[test]
    fn to_file_round_trips() {
        let bank = QuestionBank::default_bank();
        let bytes = serde_json::to_vec(&bank.to_file()).unwrap();
        assert_eq!(load_bank(&bytes).unwrap(), bank);
    }
}
