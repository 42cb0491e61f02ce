//! Question templates: slots, clauses and load-time validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::expr::{eval_answer, AnswerExpr, Bindings, EvalError, Value};
use super::lexicon::{self, CODE_ALPHABET};
use super::render::MAX_GLYPHS;
use super::Category;

/// Upper bound on bindings enumerated while checking an expression or a
/// distinctness constraint at load time.
pub const MAX_ENUMERATION: u128 = 1_000_000;

/// Text-category codes are 4 to 8 characters long.
pub const MIN_CODE_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotKind {
    PersonName,
    ObjectNoun,
    /// `lo, lo + step, ...` up to and including `hi` when reachable.
    Integer {
        lo: i64,
        hi: i64,
        #[serde(default = "unit_step", skip_serializing_if = "is_unit_step")]
        step: i64,
    },
    Direction,
    FixedChoice { choices: Vec<String> },
    /// Random `[A-Z0-9]` string for the text category.
    Code { min_len: usize, max_len: usize },
}

impl SlotKind {
    /// Number of values in the domain, saturating.
    pub fn domain_size(&self) -> u128 {
        match self {
            SlotKind::PersonName => lexicon::PERSON_NAMES.len() as u128,
            SlotKind::ObjectNoun => lexicon::OBJECT_NOUNS.len() as u128,
            SlotKind::Direction => lexicon::DIRECTIONS.len() as u128,
            SlotKind::Integer { lo, hi, step } => {
                if *step < 1 || lo > hi {
                    0
                } else {
                    ((*hi as i128 - *lo as i128) / *step as i128 + 1) as u128
                }
            }
            SlotKind::FixedChoice { choices } => choices.len() as u128,
            SlotKind::Code { min_len, max_len } => (*min_len..=*max_len)
                .map(|len| (CODE_ALPHABET.len() as u128).saturating_pow(len as u32))
                .fold(0u128, u128::saturating_add),
        }
    }

    /// The i-th domain value, for enumerable domains.
    pub fn value_at(&self, i: u128) -> Option<Value> {
        let i_usize = usize::try_from(i).ok();
        match self {
            SlotKind::PersonName => i_usize
                .and_then(|i| lexicon::PERSON_NAMES.get(i))
                .map(|s| Value::Str(s.to_string())),
            SlotKind::ObjectNoun => i_usize
                .and_then(|i| lexicon::OBJECT_NOUNS.get(i))
                .map(|(s, _)| Value::Str(s.to_string())),
            SlotKind::Direction => i_usize
                .and_then(|i| lexicon::DIRECTIONS.get(i))
                .map(|s| Value::Str(s.to_string())),
            SlotKind::FixedChoice { choices } => {
                i_usize.and_then(|i| choices.get(i)).map(|s| Value::Str(s.clone()))
            }
            SlotKind::Integer { lo, hi, step } => {
                let v = (*lo as i128).checked_add((i as i128).checked_mul(*step as i128)?)?;
                (*step >= 1 && v <= *hi as i128).then_some(Value::Int(v as i64))
            }
            SlotKind::Code { min_len, max_len } => {
                let base = CODE_ALPHABET.len() as u128;
                let mut i = i;
                for len in *min_len..=*max_len {
                    let count = base.pow(len as u32);
                    if i < count {
                        let mut s = vec![b'A'; len];
                        for slot in s.iter_mut().rev() {
                            *slot = CODE_ALPHABET[(i % base) as usize];
                            i /= base;
                        }
                        return Some(Value::Str(String::from_utf8(s).unwrap()));
                    }
                    i -= count;
                }
                None
            }
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, SlotKind::Integer { .. })
    }

    /// Discriminant used when keeping distractor values apart from others.
    pub(crate) fn family(&self) -> u8 {
        match self {
            SlotKind::PersonName => 0,
            SlotKind::ObjectNoun => 1,
            SlotKind::Integer { .. } => 2,
            SlotKind::Direction => 3,
            SlotKind::FixedChoice { .. } => 4,
            SlotKind::Code { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: SlotKind,
    /// Distractor-only slots feed distractor clauses and nothing else.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub distractor: bool,
    /// Slots that must never take the same value as this one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distinct_from: Vec<String>,
}

/// How a slot value is written into clause text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotStyle {
    Plain,
    /// Integer spelled in words ("three").
    Words,
    /// Plural object noun ("mangos").
    Plural,
    /// First letter capitalized.
    Capitalized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Text(String),
    Slot { name: String, style: SlotStyle },
}

/// One sentence fragment with `{slot}` / `{slot:style}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub source: String,
    pub segments: Vec<Segment>,
}

impl Clause {
    pub fn parse(source: &str) -> Result<Self, String> {
        let mut segments = Vec::new();
        let mut rest = source;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                segments.push(Segment::Text(rest[..open].to_owned()));
            }
            let after = &rest[open + 1..];
            let close = after
                .find('}')
                .ok_or_else(|| format!("unclosed placeholder in {source:?}"))?;
            let inner = &after[..close];
            let (name, style) = match inner.split_once(':') {
                Some((n, s)) => (n, s),
                None => (inner, ""),
            };
            let style = match style {
                "" => SlotStyle::Plain,
                "words" => SlotStyle::Words,
                "plural" => SlotStyle::Plural,
                "cap" => SlotStyle::Capitalized,
                other => return Err(format!("unknown placeholder style `{other}`")),
            };
            if !is_identifier(name) {
                return Err(format!("bad slot name `{name}` in placeholder"));
            }
            segments.push(Segment::Slot {
                name: name.to_owned(),
                style,
            });
            rest = &after[close + 1..];
        }
        if rest.contains('}') {
            return Err(format!("stray `}}` in {source:?}"));
        }
        if !rest.is_empty() {
            segments.push(Segment::Text(rest.to_owned()));
        }
        Ok(Clause {
            source: source.to_owned(),
            segments,
        })
    }

    pub fn slot_refs(&self) -> impl Iterator<Item = (&str, SlotStyle)> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot { name, style } => Some((name.as_str(), *style)),
            Segment::Text(_) => None,
        })
    }
}

fn unit_step() -> i64 {
    1
}

fn is_unit_step(step: &i64) -> bool {
    *step == 1
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A distractor clause and where it goes: before body clause `at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistractorClause {
    pub clause: Clause,
    pub at: usize,
}

/// A validated, parameterized question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionTemplate {
    pub id: String,
    pub category: Category,
    pub body: Vec<Clause>,
    pub distractors: Vec<DistractorClause>,
    pub slots: Vec<SlotSpec>,
    pub answer: AnswerExpr,
    pub aliases: Vec<AnswerExpr>,
}

/// On-disk shape of a template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSpec {
    pub id: String,
    pub category: Category,
    pub body: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distractors: Vec<DistractorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<SlotSpec>,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistractorSpec {
    Text(String),
    Placed { text: String, at: usize },
}

impl QuestionTemplate {
    /// Parses and validates a template. Errors are human-readable reasons.
    pub fn from_spec(spec: &TemplateSpec) -> Result<Self, String> {
        if spec.id.trim().is_empty() {
            return Err("template id is empty".into());
        }
        if spec.category == Category::Image {
            return Err("image-category templates are not supported".into());
        }
        if spec.body.is_empty() {
            return Err("body has no clauses".into());
        }
        let body = spec
            .body
            .iter()
            .map(|c| Clause::parse(c))
            .collect::<Result<Vec<_>, _>>()?;
        let distractors = spec
            .distractors
            .iter()
            .map(|d| {
                let (text, at) = match d {
                    DistractorSpec::Text(t) => (t, 0),
                    DistractorSpec::Placed { text, at } => (text, *at),
                };
                if at > body.len() {
                    return Err(format!(
                        "distractor position {at} is past the {} body clauses",
                        body.len()
                    ));
                }
                Ok(DistractorClause {
                    clause: Clause::parse(text)?,
                    at,
                })
            })
            .collect::<Result<Vec<_>, String>>()?;
        let answer = AnswerExpr::parse(&spec.answer).map_err(|e| format!("answer: {e}"))?;
        let aliases = spec
            .aliases
            .iter()
            .map(|a| AnswerExpr::parse(a).map_err(|e| format!("alias {a:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;

        let template = QuestionTemplate {
            id: spec.id.clone(),
            category: spec.category,
            body,
            distractors,
            slots: spec.slots.clone(),
            answer,
            aliases,
        };
        template.validate()?;
        Ok(template)
    }

    /// Back to the on-disk shape.
    pub fn to_spec(&self) -> TemplateSpec {
        TemplateSpec {
            id: self.id.clone(),
            category: self.category,
            body: self.body.iter().map(|c| c.source.clone()).collect(),
            distractors: self
                .distractors
                .iter()
                .map(|d| {
                    if d.at == 0 {
                        DistractorSpec::Text(d.clause.source.clone())
                    } else {
                        DistractorSpec::Placed {
                            text: d.clause.source.clone(),
                            at: d.at,
                        }
                    }
                })
                .collect(),
            slots: self.slots.clone(),
            answer: self.answer.to_string(),
            aliases: self.aliases.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }

    /// Slots that can influence the question's meaning or answer.
    pub fn answer_relevant_slots(&self) -> impl Iterator<Item = &SlotSpec> {
        self.slots.iter().filter(|s| !s.distractor)
    }

    /// The same template with every distractor clause and distractor slot
    /// removed.
    pub fn without_distractors(&self) -> Self {
        QuestionTemplate {
            distractors: Vec::new(),
            slots: self.answer_relevant_slots().cloned().collect(),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        for slot in &self.slots {
            if !is_identifier(&slot.name) {
                return Err(format!("bad slot name `{}`", slot.name));
            }
            if !names.insert(slot.name.as_str()) {
                return Err(format!("duplicate slot `{}`", slot.name));
            }
            match &slot.kind {
                SlotKind::Integer { lo, hi, .. } if lo > hi => {
                    return Err(format!("slot `{}` has empty range {lo}..{hi}", slot.name))
                }
                SlotKind::Integer { step, .. } if *step < 1 => {
                    return Err(format!("slot `{}` has non-positive step {step}", slot.name))
                }
                SlotKind::FixedChoice { choices } if choices.is_empty() => {
                    return Err(format!("slot `{}` has no choices", slot.name))
                }
                SlotKind::FixedChoice { choices } if choices.iter().any(|c| c.trim().is_empty()) => {
                    return Err(format!("slot `{}` has a blank choice", slot.name))
                }
                SlotKind::Code { min_len, max_len }
                    if *min_len < MIN_CODE_LEN || max_len > &MAX_GLYPHS || min_len > max_len =>
                {
                    return Err(format!(
                        "slot `{}` code length must lie within {MIN_CODE_LEN}..={MAX_GLYPHS}",
                        slot.name
                    ))
                }
                _ => {}
            }
        }

        for clause in &self.body {
            for (name, style) in clause.slot_refs() {
                let slot = self.declared(name)?;
                if slot.distractor {
                    return Err(format!("body clause references distractor slot `{name}`"));
                }
                check_style(slot, style)?;
            }
        }
        for d in &self.distractors {
            for (name, style) in d.clause.slot_refs() {
                check_style(self.declared(name)?, style)?;
            }
        }

        self.validate_constraints()?;

        for (label, expr) in std::iter::once(("answer", &self.answer))
            .chain(self.aliases.iter().map(|a| ("alias", a)))
        {
            for name in expr.slots() {
                let slot = self.declared(name)?;
                if slot.distractor {
                    return Err(format!("{label} references distractor slot `{name}`"));
                }
            }
            self.check_expression(label, expr)?;
        }
        Ok(())
    }

    fn declared(&self, name: &str) -> Result<&SlotSpec, String> {
        self.slot(name)
            .ok_or_else(|| format!("slot `{name}` is referenced but not declared"))
    }

    fn validate_constraints(&self) -> Result<(), String> {
        for slot in &self.slots {
            for other in &slot.distinct_from {
                let peer = self.declared(other)?;
                if peer.name == slot.name {
                    return Err(format!("slot `{}` cannot be distinct from itself", slot.name));
                }
                if peer.kind.family() != slot.kind.family() {
                    return Err(format!(
                        "slots `{}` and `{other}` have different kinds",
                        slot.name
                    ));
                }
                if peer.distractor != slot.distractor {
                    return Err(format!(
                        "distinctness between `{}` and `{other}` crosses the distractor boundary",
                        slot.name
                    ));
                }
            }
        }
        for group in self.constraint_groups() {
            let size = group
                .iter()
                .map(|i| self.slots[*i].kind.domain_size())
                .fold(1u128, u128::saturating_mul);
            if size > MAX_ENUMERATION {
                return Err(format!(
                    "distinct_from group {group:?} spans {size} bindings, more than {MAX_ENUMERATION}"
                ));
            }
            if count_group(self, &group) == 0 {
                return Err(format!(
                    "distinct_from constraints on {group:?} cannot be satisfied"
                ));
            }
        }
        Ok(())
    }

    /// Connected components of the distinctness graph, in declaration order.
    pub(crate) fn constraint_groups(&self) -> Vec<Vec<usize>> {
        let pairs = self.constraint_pairs();
        let mut parent: Vec<usize> = (0..self.slots.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (a, b) in &pairs {
            let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
            parent[ra] = rb;
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let constrained: BTreeSet<usize> = pairs.iter().flat_map(|(a, b)| [*a, *b]).collect();
        for i in constrained {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }

    /// Symmetric closure of `distinct_from`, as slot index pairs `(a, b)`, `a < b`.
    pub(crate) fn constraint_pairs(&self) -> BTreeSet<(usize, usize)> {
        let index: HashMap<&str, usize> = self
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.as_str(), i))
            .collect();
        let mut pairs = BTreeSet::new();
        for (i, slot) in self.slots.iter().enumerate() {
            for other in &slot.distinct_from {
                if let Some(&j) = index.get(other.as_str()) {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
        pairs
    }

    /// Checks that `expr` is well-typed and evaluates for every binding of
    /// the slots it references (exact division, no overflow), and that text
    /// codes are renderable.
    fn check_expression(&self, label: &str, expr: &AnswerExpr) -> Result<(), String> {
        let slots: Vec<&SlotSpec> = expr
            .slots()
            .into_iter()
            .map(|n| self.declared(n))
            .collect::<Result<_, _>>()?;

        // Type check first: arithmetic only touches integer slots.
        type_of(expr, self).map_err(|e| format!("{label}: {e}"))?;

        let arithmetic_slots: Vec<&SlotSpec> =
            slots.iter().copied().filter(|s| s.kind.is_integer()).collect();
        let combos = arithmetic_slots
            .iter()
            .map(|s| s.kind.domain_size())
            .fold(1u128, u128::saturating_mul);
        if combos > MAX_ENUMERATION {
            return Err(format!(
                "{label}: {combos} integer bindings are too many to verify exhaustively"
            ));
        }
        let mut bindings = Bindings::new();
        // String slots get any representative; they never reach arithmetic.
        for s in slots.iter().filter(|s| !s.kind.is_integer()) {
            bindings.insert(s.name.clone(), s.kind.value_at(0).expect("nonempty domain"));
        }
        let mut result = Ok(());
        for_each_binding(&arithmetic_slots, &mut bindings, &mut |b| {
            match eval_answer(expr, b) {
                Ok(_) => true,
                Err(EvalError::InexactDivision(a, d)) => {
                    result = Err(format!(
                        "{label}: division {a} / {d} is not exact for {}",
                        describe(b)
                    ));
                    false
                }
                Err(e) => {
                    result = Err(format!("{label}: {e} for {}", describe(b)));
                    false
                }
            }
        });
        result?;

        if self.category == Category::Text {
            self.check_text_answer(label, expr)?;
        }
        Ok(())
    }

    fn check_text_answer(&self, label: &str, expr: &AnswerExpr) -> Result<(), String> {
        let valid = |s: &str| {
            (MIN_CODE_LEN..=MAX_GLYPHS).contains(&s.chars().count())
                && s.chars().all(|c| c.is_ascii_alphanumeric())
        };
        let ok = match expr {
            AnswerExpr::Str(s) => valid(s),
            AnswerExpr::Slot(name) => match &self.declared(name)?.kind {
                SlotKind::Code { .. } => true,
                SlotKind::FixedChoice { choices } => choices.iter().all(|c| valid(c)),
                _ => false,
            },
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "{label}: text-category answers must be {MIN_CODE_LEN}-{MAX_GLYPHS} characters of [A-Z0-9]"
            ))
        }
    }
}

fn check_style(slot: &SlotSpec, style: SlotStyle) -> Result<(), String> {
    match (style, &slot.kind) {
        (SlotStyle::Words, SlotKind::Integer { lo, hi, .. }) if *lo >= 0 && *hi <= 100 => Ok(()),
        (SlotStyle::Words, _) => Err(format!(
            "slot `{}` uses :words but is not an integer within 0..=100",
            slot.name
        )),
        (SlotStyle::Plural, SlotKind::ObjectNoun) => Ok(()),
        (SlotStyle::Plural, _) => Err(format!("slot `{}` uses :plural but is not a noun", slot.name)),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Str,
}

fn type_of(expr: &AnswerExpr, t: &QuestionTemplate) -> Result<Kind, String> {
    match expr {
        AnswerExpr::Int(_) => Ok(Kind::Int),
        AnswerExpr::Str(_) => Ok(Kind::Str),
        AnswerExpr::Slot(name) => match t.slot(name) {
            Some(s) if s.kind.is_integer() => Ok(Kind::Int),
            Some(_) => Ok(Kind::Str),
            None => Err(format!("slot `{name}` is not declared")),
        },
        AnswerExpr::Binary { lhs, rhs, .. } => {
            if type_of(lhs, t)? == Kind::Int && type_of(rhs, t)? == Kind::Int {
                Ok(Kind::Int)
            } else {
                Err(format!("arithmetic on text in `{expr}`"))
            }
        }
    }
}

fn describe(b: &Bindings) -> String {
    b.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Calls `f` for every binding of `slots` (odometer order). Stops early when
/// `f` returns false.
pub(crate) fn for_each_binding(
    slots: &[&SlotSpec],
    bindings: &mut Bindings,
    f: &mut dyn FnMut(&Bindings) -> bool,
) -> bool {
    let Some((first, rest)) = slots.split_first() else {
        return f(bindings);
    };
    let mut i = 0u128;
    while let Some(v) = first.kind.value_at(i) {
        bindings.insert(first.name.clone(), v);
        if !for_each_binding(rest, bindings, f) {
            return false;
        }
        i += 1;
    }
    true
}

/// Number of bindings of the slots in `group` satisfying the distinctness
/// pairs among them, by enumeration. Validation caps groups at
/// [`MAX_ENUMERATION`] bindings.
pub(crate) fn count_group(t: &QuestionTemplate, group: &[usize]) -> u128 {
    let slots: Vec<&SlotSpec> = group.iter().map(|i| &t.slots[*i]).collect();
    let pairs: Vec<(String, String)> = t
        .constraint_pairs()
        .into_iter()
        .filter(|(a, b)| group.contains(a) && group.contains(b))
        .map(|(a, b)| (t.slots[a].name.clone(), t.slots[b].name.clone()))
        .collect();
    let mut count = 0u128;
    for_each_binding(&slots, &mut Bindings::new(), &mut |b| {
        if pairs.iter().all(|(x, y)| b[x] != b[y]) {
            count += 1;
        }
        true
    });
    count
}
