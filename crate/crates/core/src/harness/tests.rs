use super::combiner::{candidates, extract_integers};
use super::*;

const APPLES: &str = "Rahim has three bananas, Karim has five apples, Sikder has seven mangos. \
                      Jamal wants to buy three apples. How many apples left to karim?";

fn view(question: &str) -> ChallengeView {
    ChallengeView {
        id: "c".into(),
        category: Category::Mathematical,
        question: question.into(),
        image: None,
        deadline: Timestamp(0),
        attempts_remaining: 3,
    }
}

#[test]
fn extracts_digits_and_number_words() {
    assert_eq!(extract_integers(APPLES), vec![3, 5, 7, 3]);
    assert_eq!(extract_integers("His father's age is 45."), vec![45]);
    assert_eq!(
        extract_integers("forty-five, forty five, one hundred and 12 a"),
        vec![45, 45, 100, 12]
    );
    assert!(extract_integers("no numbers here").is_empty());
}

#[test]
fn combiner_order_on_the_apples_question() {
    let nums = extract_integers(APPLES);
    // pair (0, 1) is 3 and 5: 3+5, 3-5, 3*5
    assert_eq!(candidates(&nums, 2, 3), vec![8, -2, 15]);

    // 5 - 3 = 2 is reachable somewhere in the full enumeration
    let all = candidates(&nums, 2, usize::MAX);
    assert!(all.contains(&2));
    let with_distractors = all.iter().position(|v| *v == 2).unwrap();
    let clean = candidates(&extract_integers("Karim has five apples. Jamal wants to buy three apples."), 2, usize::MAX);
    let without = clean.iter().position(|v| *v == 2).unwrap();
    assert_eq!(without, 1);
    assert!(without < with_distractors);
}

#[test]
fn combiner_candidates_are_distinct_and_deterministic() {
    let nums = [4, 2, 9, 2, 6];
    let a = candidates(&nums, 2, 500);
    assert_eq!(a, candidates(&nums, 2, 500));
    let unique: std::collections::HashSet<_> = a.iter().collect();
    assert_eq!(unique.len(), a.len());
    // depth 1 is a prefix of depth 2
    let d1 = candidates(&nums, 1, usize::MAX);
    assert_eq!(&candidates(&nums, 2, usize::MAX)[..d1.len()], &d1[..]);
    assert!(candidates(&[7], 2, 10).is_empty());
}

#[test]
fn combiner_walks_its_list_across_attempts() {
    let bot = BotStrategy::combiner();
    let v = view(APPLES);
    let prompt = Prompt { view: &v, image: None };
    let mut state = EpisodeState::new(0, 3);
    let subs: Vec<String> = (0..4).map(|_| attempt(&bot, &prompt, &mut state)).collect();
    assert_eq!(subs, ["8", "-2", "15", ""]);
}

#[test]
fn replay_answers_from_memory() {
    let mut bot = BotStrategy::replay(Vec::<String>::new());
    let v = view("Karim's father age is 45. How old is Karim?");
    let prompt = Prompt { view: &v, image: None };
    assert!(!bot.remembers(&prompt));
    assert_eq!(attempt(&bot, &prompt, &mut EpisodeState::new(0, 1)), "");
    bot.observe(&prompt, "15");
    assert!(bot.remembers(&prompt));
    assert_eq!(attempt(&bot, &prompt, &mut EpisodeState::new(0, 1)), "15");

    let other = view("Karim's father age is 48. How old is Karim?");
    assert!(!bot.remembers(&Prompt { view: &other, image: None }));
}

#[test]
fn random_guess_is_uniform_over_its_dictionary() {
    let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    let bot = BotStrategy::random(words.clone());
    let v = view("q");
    let prompt = Prompt { view: &v, image: None };
    let mut counts = HashMap::new();
    let mut state = EpisodeState::new(7, 1);
    for _ in 0..20_000 {
        *counts.entry(attempt(&bot, &prompt, &mut state)).or_insert(0u32) += 1;
    }
    assert_eq!(counts.len(), 10);
    for w in &words {
        let c = counts[w];
        assert!((1800..=2200).contains(&c), "{w}: {c}");
    }
}

#[test]
fn image_category_runs_no_trials() {
    let bank = QuestionBank::starter();
    let mut target = BankTarget::new(&bank, 3);
    let config = TrialConfig {
        trials: 10,
        categories: vec![Category::Image],
        ..TrialConfig::default()
    };
    let report = run_trials(&mut BotStrategy::combiner(), &mut target, &config).unwrap();
    assert_eq!(report.overall.trials, 0);
    assert_eq!(report.unsupported, vec![Category::Image]);
    assert!(report.per_category.is_empty());
}

#[test]
fn zero_trials_is_an_error() {
    let bank = QuestionBank::starter();
    let config = TrialConfig {
        trials: 0,
        ..TrialConfig::default()
    };
    assert!(matches!(
        run_trials(&mut BotStrategy::combiner(), &mut BankTarget::new(&bank, 3), &config),
        Err(HarnessError::NoTrials)
    ));
}

#[test]
fn combiner_misses_the_starter_age_question() {
    // the starter maths question needs 45 / 3 but only "one" and 45 appear
    let bank = QuestionBank::starter();
    let config = TrialConfig {
        trials: 50,
        categories: vec![Category::Mathematical],
        ..TrialConfig::default()
    };
    let report = run_trials(&mut BotStrategy::combiner(), &mut BankTarget::new(&bank, 3), &config).unwrap();
    assert_eq!(report.overall.successes, 0);
    assert_eq!(report.attempts_used, 150);
}

#[test]
fn report_counts_add_up() {
    let bank = QuestionBank::default_bank();
    let config = TrialConfig {
        trials: 300,
        warmup: 20,
        attempts: 2,
        seed: 5,
        ..TrialConfig::default()
    };
    let report = run_trials(&mut BotStrategy::replay(DEFAULT_DICTIONARY), &mut BankTarget::new(&bank, 2), &config).unwrap();
    assert_eq!(report.overall.trials, 300);
    let (n, k) = report
        .per_category
        .values()
        .fold((0, 0), |(n, k), t| (n + t.trials, k + t.successes));
    assert_eq!((n, k), (300, report.overall.successes));
    assert!(report.attempts_used <= 600);
    let (lo, hi) = report.overall.wilson_95;
    assert!(lo <= report.overall.pass_rate && report.overall.pass_rate <= hi);
    assert!(report.replay_seen.is_some());
    assert!(report.wall_clock_ms_per_episode.is_none());
}

#[test]
fn time_margins() {
    let times: BTreeMap<Category, f64> = [
        (Category::General, 3.25),
        (Category::Text, 9.70),
        (Category::Analytical, 60.0),
    ]
    .into_iter()
    .collect();
    let rows = time_margin_report(&times, 600.0, DEFAULT_MARGIN_THRESHOLD).unwrap();
    let by: BTreeMap<_, _> = rows.iter().map(|r| (r.category, r)).collect();
    assert!((by[&Category::General].margin - 184.615).abs() < 1e-3);
    assert!(by[&Category::General].flagged);
    assert!((by[&Category::Text].margin - 61.856).abs() < 1e-3);
    assert!(by[&Category::Text].flagged);
    assert_eq!(by[&Category::Analytical].margin, 10.0);
    assert!(!by[&Category::Analytical].flagged);

    let bad: BTreeMap<Category, f32> = [(Category::General, 0.0)].into_iter().collect();
    assert_eq!(
        time_margin_report(&bad, 600.0, 10.0),
        Err(MarginError::NonPositiveMean(Category::General))
    );
}

#[test]
fn tally_without_trials() {
    let t = Tally::new(0, 0);
    assert_eq!((t.pass_rate, t.wilson_95), (0.0, (0.0, 1.0)));
}
