mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use dischargekit::concepts::remote::{NerError, NerRequest, NerResponse, RemoteNer, WireSpan};
use dischargekit::http::RetryPolicy;
use dischargekit::{
    dedup_concepts, extract_concepts, ConceptType, Lexicon, SectionName, Tokenizer,
};
use proptest::prelude::*;

const VOCAB: [&str; 4] = ["alpha", "beta", "gamma", "delta"];
const SEPARATORS: [&str; 4] = [" ", ", ", "\n", " - "];

/// Every (start word, length) whose words form a key, then a left-to-right
/// scan keeping the earliest placement not overlapping the previous pick and
/// the longest one among placements sharing that start.
fn oracle(text: &str, keys: &BTreeSet<String>) -> Vec<(usize, usize)> {
    let words = common::letter_runs(text);
    let lowered: Vec<String> = words
        .iter()
        .map(|&(s, e)| text[s..e].to_lowercase())
        .collect();
    let mut placements = Vec::new();
    for i in 0..words.len() {
        for len in 1..=words.len() - i {
            if keys.contains(&lowered[i..i + len].join(" ")) {
                placements.push((i, len));
            }
        }
    }
    let mut picked = Vec::new();
    let mut cursor = 0;
    loop {
        let best = placements
            .iter()
            .filter(|(i, _)| *i >= cursor)
            .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let Some(&(i, len)) = best else { break };
        picked.push((words[i].0, words[i + len - 1].1));
        cursor = i + len;
    }
    picked
}

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB.to_vec()), 1..=3).prop_map(|w| w.join(" "))
}

fn document() -> impl Strategy<Value = String> {
    prop::collection::vec(
        (
            prop::sample::select(VOCAB.to_vec()),
            prop::sample::select(SEPARATORS.to_vec()),
            any::<bool>(),
        ),
        0..25,
    )
    .prop_map(|parts| {
        parts
            .into_iter()
            .map(|(w, sep, upper)| {
                let w = if upper {
                    w.to_uppercase()
                } else {
                    w.to_string()
                };
                format!("{w}{sep}")
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn matches_brute_force_oracle(
        keys in prop::collection::btree_set(phrase(), 1..8),
        text in document(),
    ) {
        let lexicon = Lexicon::from_entries(keys.iter().map(|k| (k.clone(), ConceptType::Problem))).unwrap();
        let spans = extract_concepts(&text, &SectionName::PastMedicalHistory, &lexicon);
        let got: Vec<_> = spans.iter().map(|s| (s.start, s.end)).collect();
        prop_assert_eq!(got, oracle(&text, &keys));
        for s in &spans {
            prop_assert_eq!(&text[s.start..s.end], s.text.as_str());
        }
    }

    #[test]
    fn extraction_ignores_case(text in document()) {
        let lexicon = common::lexicon();
        let lexicon_keys = Lexicon::from_entries([("alpha beta".to_string(), ConceptType::Test)]).unwrap();
        for lex in [&lexicon, &lexicon_keys] {
            let lower = extract_concepts(&text.to_lowercase(), &SectionName::PhysicalExam, lex);
            let upper = extract_concepts(&text.to_uppercase(), &SectionName::PhysicalExam, lex);
            let a: Vec<_> = lower.iter().map(|s| (s.start, s.end, s.ctype)).collect();
            let b: Vec<_> = upper.iter().map(|s| (s.start, s.end, s.ctype)).collect();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn pmh_example_yields_thirteen_concepts_in_order() {
    let spans = extract_concepts(
        &common::pmh_example_text(),
        &SectionName::PastMedicalHistory,
        &common::lexicon(),
    );
    let surfaces = dedup_concepts(&spans);
    assert_eq!(surfaces, common::PMH_EXAMPLE_CONCEPTS);
}

#[test]
fn concept_list_is_shorter_than_its_section() {
    let lexicon = common::lexicon();
    let text = common::pmh_example_text();
    let list = dedup_concepts(&extract_concepts(
        &text,
        &SectionName::PastMedicalHistory,
        &lexicon,
    ))
    .join(", ");
    for tok in [Tokenizer::Whitespace, Tokenizer::CharQuarter] {
        assert!(tok.count(&list) < tok.count(&text));
    }
}

fn fast_policy() -> RetryPolicy {
    RetryPolicy {
        max_retries: 1,
        initial_backoff_ms: 5,
        max_backoff_ms: 10,
        timeout_ms: 2_000,
    }
}

async fn ner_server(respond: impl Fn(NerRequest) -> NerResponse + Send + Sync + 'static) -> String {
    let respond = Arc::new(respond);
    let app = Router::new()
        .route(
            "/extract",
            post(
                |State(f): State<Arc<dyn Fn(NerRequest) -> NerResponse + Send + Sync>>,
                 Json(req): Json<NerRequest>| async move { Json(f(req)) },
            ),
        )
        .with_state(respond as Arc<dyn Fn(NerRequest) -> NerResponse + Send + Sync>);
    common::serve(app).await
}

#[tokio::test]
async fn remote_ner_round_trips_lexicon_spans() {
    let lexicon = Arc::new(common::lexicon());
    let server_lex = lexicon.clone();
    let url = ner_server(move |req| {
        let section = SectionName::parse(&req.section);
        let spans = extract_concepts(&req.text, &section, &server_lex)
            .into_iter()
            .map(|s| WireSpan {
                text: s.text,
                ctype: s.ctype.as_str().to_string(),
                start: s.start,
                end: s.end,
            })
            .collect();
        NerResponse { spans }
    })
    .await;
    let ner = RemoteNer::new(&url, fast_policy());
    let text = common::pmh_example_text();
    let remote = ner
        .extract(&text, &SectionName::PastMedicalHistory)
        .await
        .unwrap();
    let local = extract_concepts(&text, &SectionName::PastMedicalHistory, &lexicon);
    assert_eq!(remote, local);
    assert_eq!(dedup_concepts(&remote), common::PMH_EXAMPLE_CONCEPTS);
}

#[tokio::test]
async fn remote_ner_accepts_zero_spans() {
    let url = ner_server(|_| NerResponse { spans: vec![] }).await;
    let ner = RemoteNer::new(&url, fast_policy());
    let spans = ner
        .extract("nothing here", &SectionName::PhysicalExam)
        .await
        .unwrap();
    assert!(spans.is_empty());
}

#[tokio::test]
async fn remote_ner_rejects_out_of_bounds_span() {
    let url = ner_server(|req| NerResponse {
        spans: vec![WireSpan {
            text: "x".into(),
            ctype: "PROBLEM".into(),
            start: req.text.len(),
            end: req.text.len() + 1,
        }],
    })
    .await;
    let ner = RemoteNer::new(&url, fast_policy());
    let err = ner
        .extract("short", &SectionName::PhysicalExam)
        .await
        .unwrap_err();
    assert!(matches!(err, NerError::Protocol { .. }), "{err}");
}

#[tokio::test]
async fn remote_ner_batch_keeps_order_and_isolates_failures() {
    let url = ner_server(|req| {
        let spans = match req.text.find("gallstones") {
            Some(start) => vec![WireSpan {
                text: "gallstones".into(),
                ctype: "PROBLEM".into(),
                start,
                end: start + "gallstones".len(),
            }],
            None => vec![WireSpan {
                text: "bogus".into(),
                ctype: "PROBLEM".into(),
                start: 0,
                end: 5,
            }],
        };
        NerResponse { spans }
    })
    .await;
    let ner = RemoteNer::new(&url, fast_policy());
    let docs = vec![
        (
            "had gallstones".to_string(),
            SectionName::PastMedicalHistory,
        ),
        ("nothing".to_string(), SectionName::PastMedicalHistory),
        (
            "gallstones again".to_string(),
            SectionName::PastMedicalHistory,
        ),
    ];
    let out = ner.extract_many(&docs, 2).await;
    assert_eq!(out[0].as_ref().unwrap()[0].start, 4);
    assert!(out[1].is_err());
    assert_eq!(out[2].as_ref().unwrap()[0].start, 0);
}
