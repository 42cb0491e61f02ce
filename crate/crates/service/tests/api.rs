use std::collections::{HashMap, HashSet};
use std::net::{IpAddr, Ipv4Addr};
use std::sync::{Arc, Barrier};

use cogcaptcha::{Category, QuestionBank, Timestamp};
use cogcaptcha_service::{Request, Response, Service, ServiceConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const T0: Timestamp = Timestamp(1_700_000_000);

fn config() -> ServiceConfig {
    let mut c = ServiceConfig::default();
    c.lifecycle.signing_secret = [9; 32];
    c
}

fn service(bank: QuestionBank) -> Service {
    Service::in_memory(&config(), bank, 42)
}

fn ip(n: u8) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(10, 0, 0, n))
}

fn issue(s: &Service, category: &str, who: u8, now: Timestamp) -> Response {
    s.handle(&Request::post("/v1/challenges", json!({ "category": category })).from(ip(who)), now)
}

fn answer(s: &Service, id: &str, text: &str, now: Timestamp) -> Response {
    s.handle(&Request::post(&format!("/v1/challenges/{id}/answer"), json!({ "answer": text })), now)
}

fn body(r: &Response) -> Value {
    r.json_body().expect("json body")
}

fn id_of(r: &Response) -> String {
    body(r)["id"].as_str().unwrap().to_owned()
}

fn canonical(s: &Service, id: &str) -> String {
    s.store().challenge(id).unwrap().rendered.canonical_answers[0].clone()
}

#[test]
fn issue_returns_the_view_contract() {
    let s = service(QuestionBank::starter());
    let r = issue(&s, "general", 1, T0);
    assert_eq!(r.status, 200);
    let b = body(&r);
    let keys: HashSet<&str> = b.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["id", "category", "question", "deadline", "attempts_remaining"].into());
    assert_eq!(b["attempts_remaining"], 3);
    assert_eq!(b["deadline"], T0.0 + 600);
    assert_eq!(b["question"], "In which direction does the Sun rise?");
}

#[test]
fn starter_general_answer_gets_a_pass_token() {
    let s = service(QuestionBank::starter());
    let id = id_of(&issue(&s, "general", 1, T0));
    let r = answer(&s, &id, "east", T0.plus(5));
    assert_eq!(r.status, 200);
    let token = body(&r)["pass_token"].as_str().unwrap().to_owned();
    let redeem = |t: &str| s.handle(&Request::post("/v1/tokens/redeem", json!({ "pass_token": t })), T0.plus(6));
    let first = redeem(&token);
    assert_eq!(first.status, 200);
    assert_eq!(body(&first)["challenge_id"], id.as_str());
    assert_eq!(redeem(&token).status, 409);
    assert_eq!(redeem("garbage").status, 400);
}

#[test]
fn status_codes_follow_the_flow() {
    let s = service(QuestionBank::starter());
    let id = id_of(&issue(&s, "mathematical", 1, T0));

    let wrong = answer(&s, &id, "14", T0);
    assert_eq!(wrong.status, 422);
    assert_eq!(body(&wrong)["attempts_remaining"], 2);
    assert_eq!(answer(&s, &id, "15", T0).status, 200);
    assert_eq!(answer(&s, &id, "15", T0).status, 409);
    assert_eq!(answer(&s, "nope", "15", T0).status, 404);

    let late = id_of(&issue(&s, "mathematical", 1, T0));
    assert_eq!(answer(&s, &late, "15", T0.plus(601)).status, 410);

    let spent = id_of(&issue(&s, "mathematical", 1, T0));
    for _ in 0..2 {
        assert_eq!(answer(&s, &spent, "1", T0).status, 422);
    }
    let last = answer(&s, &spent, "1", T0);
    assert_eq!((last.status, body(&last)["outcome"].as_str()), (422, Some("exhausted")));

    assert_eq!(issue(&s, "image", 1, T0).status, 400);
    assert_eq!(issue(&s, "poetry", 1, T0).status, 400);
    let malformed = Request {
        body: b"{not json".to_vec(),
        ..Request::post("/v1/challenges", Value::Null)
    };
    assert_eq!(s.handle(&malformed, T0).status, 400);
    assert_eq!(s.handle(&Request::post(&format!("/v1/challenges/{id}/answer"), json!({})), T0).status, 400);
    assert_eq!(s.handle(&Request::get("/v1/challenges"), T0).status, 405);
    assert_eq!(s.handle(&Request::get("/v2/anything"), T0).status, 404);
    assert_eq!(s.handle(&Request::get("/v1/health"), T0).status, 200);
}

#[test]
fn retry_restarts_the_timer_and_supersedes() {
    let s = service(QuestionBank::default_bank());
    let id = id_of(&issue(&s, "analytical", 1, T0));
    let r = s.handle(&Request::post(&format!("/v1/challenges/{id}/retry"), Value::Null).from(ip(1)), T0.plus(100));
    assert_eq!(r.status, 200);
    assert_eq!(body(&r)["deadline"], T0.0 + 700);
    assert_eq!(body(&r)["category"], "analytical");
    assert_eq!(answer(&s, &id, "x", T0.plus(100)).status, 409);
    let again = s.handle(&Request::post(&format!("/v1/challenges/{id}/retry"), Value::Null), T0.plus(100));
    assert_eq!(again.status, 409);
    assert_eq!(s.handle(&Request::post("/v1/challenges/zzz/retry", Value::Null), T0).status, 404);
}

#[test]
fn images_only_for_text_challenges() {
    let s = service(QuestionBank::default_bank());
    let text = issue(&s, "text", 1, T0);
    let path = body(&text)["image"].as_str().unwrap().to_owned();
    let img = s.handle(&Request::get(&path), T0);
    assert_eq!(img.status, 200);
    assert_eq!(img.header("content-type"), Some("image/x-portable-graymap"));
    assert!(img.body.starts_with(b"P5"));

    let general = id_of(&issue(&s, "general", 1, T0));
    assert_eq!(s.handle(&Request::get(&format!("/v1/challenges/{general}/image")), T0).status, 404);
    assert_eq!(s.handle(&Request::get(&format!("/v1/challenges/{general}/audio")), T0).status, 501);
    assert_eq!(s.handle(&Request::get("/v1/challenges/none/audio"), T0).status, 404);
}

#[test]
fn thirty_first_issue_in_a_minute_is_refused() {
    let s = service(QuestionBank::starter());
    for i in 0..30 {
        assert_eq!(issue(&s, "general", 1, T0.plus(i)).status, 200, "issue {i}");
    }
    let denied = issue(&s, "general", 1, T0.plus(30));
    assert_eq!(denied.status, 429);
    // the first event, at T0, leaves the window at T0 + 60
    assert_eq!(denied.header("retry-after"), Some("30"));
    assert_eq!(body(&denied)["retry_after"], 30);

    // another address, or the same address with an API key, is a new client
    assert_eq!(issue(&s, "general", 2, T0.plus(30)).status, 200);
    let keyed = Request::post("/v1/challenges", json!({ "category": "general" }))
        .from(ip(1))
        .header("X-Api-Key", "partner");
    assert_eq!(s.handle(&keyed, T0.plus(30)).status, 200);

    assert_eq!(issue(&s, "general", 1, T0.plus(60)).status, 200);
}

#[test]
fn retries_count_against_the_issue_budget() {
    let s = service(QuestionBank::starter());
    let mut id = id_of(&issue(&s, "general", 1, T0));
    for _ in 0..9 {
        let r = s.handle(&Request::post(&format!("/v1/challenges/{id}/retry"), Value::Null).from(ip(1)), T0);
        id = id_of(&r);
    }
    for _ in 0..20 {
        issue(&s, "general", 1, T0);
    }
    assert_eq!(issue(&s, "general", 1, T0).status, 429);
}

fn answer_tokens(answers: &[String]) -> HashSet<String> {
    answers
        .iter()
        .flat_map(|a| a.split(|c: char| !c.is_alphanumeric()).map(str::to_lowercase).collect::<Vec<_>>())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Response text with identifiers, tokens and (outside the text category)
/// the question removed; what is left must not name the answer.
fn visible_text(r: &Response, category: Category) -> String {
    let mut out: Vec<String> = r.headers.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    if let Some(mut b) = r.json_body() {
        if let Some(o) = b.as_object_mut() {
            for k in ["id", "image", "pass_token", "challenge_id", "deadline", "attempts_remaining", "retry_after"] {
                o.remove(k);
            }
            if category != Category::Text {
                o.remove("question");
            }
        }
        out.push(b.to_string());
    }
    out.join("\n")
}

#[test]
fn no_response_carries_a_canonical_answer() {
    let s = service(QuestionBank::default_bank());
    let cats = [Category::Analytical, Category::Mathematical, Category::General, Category::Text];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..600u64 {
        let cat = cats[rng.random_range(0..cats.len())];
        // a fresh address per issue keeps clear of the rate limit
        let who = (i % 250) as u8;
        let now = T0.plus(i * 60);
        let issued = issue(&s, cat.as_str(), who, now);
        assert_eq!(issued.status, 200);
        let id = id_of(&issued);
        let secret = answer_tokens(&s.store().challenge(&id).unwrap().rendered.canonical_answers);

        let mut responses = vec![issued];
        responses.push(answer(&s, &id, "definitely wrong", now));
        if cat == Category::Text {
            let img = s.handle(&Request::get(&format!("/v1/challenges/{id}/image")), now);
            responses.push(Response { body: Vec::new(), ..img });
        }
        let retried = s.handle(&Request::post(&format!("/v1/challenges/{id}/retry"), Value::Null).from(ip(who)), now);
        let fresh = id_of(&retried);
        let fresh_secret = answer_tokens(&s.store().challenge(&fresh).unwrap().rendered.canonical_answers);
        let wrong = answer(&s, &fresh, "also wrong", now);
        let correct = answer(&s, &fresh, &canonical(&s, &fresh), now);
        assert_eq!(correct.status, 200);

        for r in &responses {
            let text = visible_text(r, cat);
            for t in &secret {
                assert!(!text.split(|c: char| !c.is_alphanumeric()).any(|w| w.eq_ignore_ascii_case(t)), "{t} in {text}");
            }
        }
        for r in [&retried, &wrong, &correct] {
            let text = visible_text(r, cat);
            for t in &fresh_secret {
                assert!(!text.split(|c: char| !c.is_alphanumeric()).any(|w| w.eq_ignore_ascii_case(t)), "{t} in {text}");
            }
        }
    }
}

#[test]
fn pass_tokens_appear_only_on_successful_answers() {
    let s = service(QuestionBank::default_bank());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut live: Vec<String> = Vec::new();
    let mut passes = 0;
    for step in 0..3000u64 {
        let now = T0.plus(step);
        let who = (step % 200) as u8;
        let (req, is_answer) = match rng.random_range(0..6) {
            0 | 1 => (Request::post("/v1/challenges", json!({ "category": "general" })).from(ip(who)), false),
            _ if live.is_empty() => continue,
            2 => {
                let id = &live[rng.random_range(0..live.len())];
                (Request::post(&format!("/v1/challenges/{id}/retry"), Value::Null).from(ip(who)), false)
            }
            3 | 4 => {
                let id = live[rng.random_range(0..live.len())].clone();
                let text = if rng.random_bool(0.5) { canonical(&s, &id) } else { "wrong".into() };
                (Request::post(&format!("/v1/challenges/{id}/answer"), json!({ "answer": text })), true)
            }
            _ => {
                let id = &live[rng.random_range(0..live.len())];
                (Request::get(&format!("/v1/challenges/{id}/audio")), false)
            }
        };
        let r = s.handle(&req, now);
        if r.status == 200 {
            if let Some(id) = r.json_body().and_then(|b| b["id"].as_str().map(str::to_owned)) {
                live.push(id);
            }
        }
        let tokens = String::from_utf8_lossy(&r.body).matches("pass_token").count();
        if is_answer && r.status == 200 {
            assert_eq!(tokens, 1);
            passes += 1;
        } else {
            assert_eq!(tokens, 0, "{} {}", r.status, String::from_utf8_lossy(&r.body));
        }
    }
    assert!(passes > 50);
}

#[test]
fn concurrent_correct_answers_pass_once() {
    let s = Arc::new(service(QuestionBank::starter()));
    for _ in 0..10 {
        let id = id_of(&issue(&s, "general", 1, T0));
        let gate = Arc::new(Barrier::new(64));
        let handles: Vec<_> = (0..64)
            .map(|_| {
                let (s, id, gate) = (s.clone(), id.clone(), gate.clone());
                std::thread::spawn(move || {
                    gate.wait();
                    answer(&s, &id, "East", T0).status
                })
            })
            .collect();
        let statuses: Vec<u16> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(statuses.iter().filter(|s| **s == 200).count(), 1);
        assert!(statuses.iter().all(|s| *s == 200 || *s == 409));
    }
}

/// Replaces every id and token in a body with its first-seen ordinal.
fn structural(body: &[u8], names: &mut HashMap<String, String>) -> Value {
    fn walk(v: &mut Value, names: &mut HashMap<String, String>) {
        match v {
            Value::Object(o) => {
                for (k, x) in o.iter_mut() {
                    if matches!(k.as_str(), "id" | "challenge_id" | "pass_token" | "image") {
                        let n = names.len();
                        let s = x.as_str().unwrap_or_default().to_owned();
                        *x = Value::String(names.entry(s).or_insert_with(|| format!("#{n}")).clone());
                    } else {
                        walk(x, names);
                    }
                }
            }
            Value::Array(a) => a.iter_mut().for_each(|x| walk(x, names)),
            _ => {}
        }
    }
    let mut v: Value = serde_json::from_slice(body).unwrap_or_else(|_| Value::String(format!("{} bytes", body.len())));
    walk(&mut v, names);
    v
}

fn scripted_session() -> Vec<(u16, Value)> {
    let s = service(QuestionBank::default_bank());
    let mut names = HashMap::new();
    let mut out = Vec::new();
    let mut push = |r: &Response, names: &mut HashMap<String, String>| out.push((r.status, structural(&r.body, names)));

    push(&s.handle(&Request::get("/v1/categories"), T0), &mut names);
    let mut ids = Vec::new();
    for (i, cat) in ["analytical", "mathematical", "general", "text"].iter().enumerate() {
        let r = issue(&s, cat, 1, T0.plus(i as u64));
        ids.push(id_of(&r));
        push(&r, &mut names);
    }
    push(&answer(&s, &ids[0], "wrong", T0.plus(10)), &mut names);
    let r = s.handle(&Request::post(&format!("/v1/challenges/{}/retry", ids[0]), Value::Null).from(ip(1)), T0.plus(11));
    let fresh = id_of(&r);
    push(&r, &mut names);
    let ok = answer(&s, &fresh, &canonical(&s, &fresh), T0.plus(12));
    push(&ok, &mut names);
    let token = body(&ok)["pass_token"].as_str().unwrap().to_owned();
    for _ in 0..2 {
        push(&s.handle(&Request::post("/v1/tokens/redeem", json!({ "pass_token": token })), T0.plus(13)), &mut names);
    }
    push(&s.handle(&Request::get(&format!("/v1/challenges/{}/image", ids[3])), T0.plus(14)), &mut names);
    push(&answer(&s, &ids[1], &canonical(&s, &ids[1]), T0.plus(900)), &mut names);
    out
}

#[test]
fn identical_request_sequences_give_identical_responses() {
    let a = scripted_session();
    let b = scripted_session();
    assert_eq!(a.len(), 12);
    assert_eq!(a, b);
    assert_eq!(a.last().unwrap().0, 410);
}
