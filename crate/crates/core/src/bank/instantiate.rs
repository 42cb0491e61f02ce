//! Seeded instantiation of templates into displayable questions.
//!
//! Every slot draws from its own ChaCha8 stream keyed by (seed, template id,
//! slot name). Adding or removing distractor slots therefore never moves the
//! answer-relevant bindings of a given seed.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::expr::{eval_answer, Bindings, Value};
use super::lexicon;
use super::render::render_text_image;
use super::template::{Clause, QuestionTemplate, Segment, SlotSpec, SlotStyle};
use super::Category;
use crate::grading::{normalize, spell_number, GradingPolicy};

/// Distractor draws retried this many times to avoid colliding values.
const DISTINCT_RETRIES: usize = 64;

/// A live question as shown to the solver, plus its server-side answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedQuestion {
    pub template_id: String,
    pub category: Category,
    pub text: String,
    /// Binary PGM, text category only.
    #[serde(default, with = "base64_bytes", skip_serializing_if = "Option::is_none")]
    pub image: Option<Vec<u8>>,
    pub canonical_answers: Vec<String>,
    pub binding_fingerprint: String,
}

/// A rendered question together with the bindings that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub question: RenderedQuestion,
    pub bindings: Bindings,
}

/// Instantiates `template` with the default grading policy.
pub fn instantiate(template: &QuestionTemplate, seed: u64) -> RenderedQuestion {
    instantiate_with_bindings(template, seed, &GradingPolicy::default()).question
}

pub fn instantiate_with_policy(
    template: &QuestionTemplate,
    seed: u64,
    policy: &GradingPolicy,
) -> RenderedQuestion {
    instantiate_with_bindings(template, seed, policy).question
}

pub fn instantiate_with_bindings(
    template: &QuestionTemplate,
    seed: u64,
    policy: &GradingPolicy,
) -> Instance {
    let bindings = bind_slots(template, seed);
    let text = render_text(template, &bindings);

    let mut canonical_answers: Vec<String> = Vec::new();
    let mut raw_answer = None;
    for expr in std::iter::once(&template.answer).chain(&template.aliases) {
        let value = eval_answer(expr, &bindings).expect("validated template evaluates");
        let raw = value.to_string();
        raw_answer.get_or_insert_with(|| raw.clone());
        let normalized = normalize(&raw, policy).expect("answers are short");
        if !canonical_answers.contains(&normalized) {
            canonical_answers.push(normalized);
        }
    }

    let image = (template.category == Category::Text).then(|| {
        let code = raw_answer.as_deref().unwrap_or_default().to_ascii_uppercase();
        render_text_image(&code, seed).expect("validated text answers render")
    });

    Instance {
        question: RenderedQuestion {
            template_id: template.id.clone(),
            category: template.category,
            text,
            image,
            canonical_answers,
            binding_fingerprint: fingerprint(&template.id, &bindings),
        },
        bindings,
    }
}

fn slot_rng(seed: u64, template_id: &str, slot: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(template_id.as_bytes());
    h.update([0]);
    h.update(slot.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn draw(slot: &SlotSpec, rng: &mut ChaCha8Rng) -> Value {
    let n = slot.kind.domain_size();
    slot.kind
        .value_at(rng.random_range(0..n))
        .expect("index within domain")
}

fn bind_slots(t: &QuestionTemplate, seed: u64) -> Bindings {
    let mut bindings = Bindings::new();
    let pairs = t.constraint_pairs();
    let partners = |i: usize| -> Vec<usize> {
        pairs
            .iter()
            .filter_map(|&(a, b)| match (a == i, b == i) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    };

    for (i, slot) in t.slots.iter().enumerate().filter(|(_, s)| !s.distractor) {
        let mut rng = slot_rng(seed, &t.id, &slot.name);
        let taken: Vec<&Value> = partners(i)
            .into_iter()
            .filter_map(|j| bindings.get(&t.slots[j].name))
            .collect();
        let value = if taken.is_empty() {
            draw(slot, &mut rng)
        } else {
            // Uniform over the values the already-bound partners leave free.
            // Validation bounds constrained domains, so listing them is cheap.
            let free: Vec<Value> = (0..slot.kind.domain_size())
                .filter_map(|k| slot.kind.value_at(k))
                .filter(|v| !taken.contains(&v))
                .collect();
            free[rng.random_range(0..free.len())].clone()
        };
        bindings.insert(slot.name.clone(), value);
    }

    let mut used: BTreeSet<(u8, Value)> = t
        .answer_relevant_slots()
        .map(|s| (s.kind.family(), bindings[&s.name].clone()))
        .collect();
    for slot in t.slots.iter().filter(|s| s.distractor) {
        let mut rng = slot_rng(seed, &t.id, &slot.name);
        let family = slot.kind.family();
        let mut value = draw(slot, &mut rng);
        for _ in 0..DISTINCT_RETRIES {
            if !used.contains(&(family, value.clone())) {
                break;
            }
            value = draw(slot, &mut rng);
        }
        used.insert((family, value.clone()));
        bindings.insert(slot.name.clone(), value);
    }
    bindings
}

/// Clause order: distractors placed `at` body index `i` come right before
/// body clause `i`; those at `body.len()` come last.
pub(crate) fn clause_order(t: &QuestionTemplate) -> Vec<&Clause> {
    let mut out = Vec::with_capacity(t.body.len() + t.distractors.len());
    for i in 0..=t.body.len() {
        out.extend(t.distractors.iter().filter(|d| d.at == i).map(|d| &d.clause));
        if let Some(c) = t.body.get(i) {
            out.push(c);
        }
    }
    out
}

fn render_text(t: &QuestionTemplate, bindings: &Bindings) -> String {
    clause_order(t)
        .into_iter()
        .map(|c| render_clause(c, bindings))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn render_clause(clause: &Clause, bindings: &Bindings) -> String {
    let mut out = String::new();
    for seg in &clause.segments {
        match seg {
            Segment::Text(s) => out.push_str(s),
            Segment::Slot { name, style } => {
                let value = &bindings[name];
                out.push_str(&render_value(value, *style));
            }
        }
    }
    out
}

pub(crate) fn render_value(value: &Value, style: SlotStyle) -> String {
    match (style, value) {
        (SlotStyle::Words, Value::Int(n)) => spell_number(*n).unwrap_or_else(|_| n.to_string()),
        (SlotStyle::Plural, Value::Str(s)) => lexicon::plural_of(s)
            .map(str::to_owned)
            .unwrap_or_else(|| format!("{s}s")),
        (SlotStyle::Capitalized, v) => {
            let s = v.to_string();
            let mut chars = s.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => s,
            }
        }
        (_, v) => v.to_string(),
    }
}

fn fingerprint(template_id: &str, bindings: &Bindings) -> String {
    let mut h = Sha256::new();
    h.update(template_id.as_bytes());
    h.update([0]);
    for (name, value) in bindings {
        h.update(name.as_bytes());
        h.update(b"=");
        h.update(value.to_string().as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

mod base64_bytes {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bytes) => s.serialize_some(&STANDARD.encode(bytes)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| STANDARD.decode(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}
