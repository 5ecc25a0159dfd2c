#![allow(dead_code)]

pub mod oracles;

use std::net::SocketAddr;
use std::path::PathBuf;

use dischargekit::corpus::{load_corpus, Split, Visit};
use dischargekit::section::SectionName;
use dischargekit::Lexicon;
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn corpus() -> Vec<Visit> {
    load_corpus(fixture("corpus.jsonl"), Split::TestPhase2).expect("fixture corpus loads")
}

pub fn lexicon() -> Lexicon {
    Lexicon::load(fixture("lexicon.tsv")).expect("fixture lexicon loads")
}

pub fn pmh_example_text() -> String {
    std::fs::read_to_string(fixture("pmh_example.txt")).unwrap()
}

pub const PMH_EXAMPLE_CONCEPTS: [&str; 13] = [
    "prior paramedian pontine infarct",
    "right-sided lenticulostriate territory infarct",
    "Hypertension",
    "Dyslipidemia",
    "Colon cancer",
    "right colectomy",
    "adjuvant chemotherapy",
    "GI bleeding",
    "Cholecystectomy",
    "chronic cholecystitis",
    "gallstones",
    "Diverticulosis",
    "Hemorrhoids",
];

/// A note with every canonical header once, in canonical order.
pub fn golden_note() -> String {
    let mut note =
        String::from("Name:  ___   Unit No:   ___\n\nAllergies:\nNo Known Allergies\n\n");
    for (i, name) in SectionName::CANONICAL.iter().enumerate() {
        note.push_str(&format!(
            "{}:\nbody line {i} for {}.\n \n",
            name.display_name(),
            name.display_name()
        ));
    }
    note
}

const FILLER: [&str; 12] = [
    "stable overnight",
    "no acute distress",
    "Lives alone",
    "WBC-8.1 Hgb-12.0",
    "see above: improved",
    "follows commands",
    "",
    "   ",
    "- Hypertension",
    "BP 120/80",
    "pt seen: ok",
    "Résumé of café visit",
];

/// Random note built from canonical headers (in assorted spellings), unknown
/// headers, header-looking lines that are not headers, and filler. Returns
/// the note and the section names a correct segmenter must find, in order.
pub fn random_note(rng: &mut StdRng) -> (String, Vec<SectionName>) {
    let mut note = String::new();
    let mut expected = Vec::new();
    let lines = rng.random_range(0..40);
    for _ in 0..lines {
        let line = match rng.random_range(0..10) {
            0..=2 => {
                let name = SectionName::CANONICAL.choose(rng).unwrap().clone();
                let shown = name.display_name().to_string();
                match rng.random_range(0..4) {
                    0 => {
                        expected.push(name);
                        format!("{shown}:")
                    }
                    1 => {
                        expected.push(name);
                        format!("  {}  :", shown.to_uppercase())
                    }
                    2 => {
                        expected.push(name);
                        shown.to_lowercase().replace(' ', "   ")
                    }
                    _ => {
                        if name == SectionName::PertinentResults {
                            expected.push(name);
                        }
                        format!("{shown}: inline text")
                    }
                }
            }
            3 => {
                let label = *[
                    "Allergies:",
                    "Followup Instructions:",
                    "Facility:",
                    "ADMISSION EXAM:",
                ]
                .choose(rng)
                .unwrap();
                expected.push(SectionName::Unknown(label.to_string()));
                label.to_string()
            }
            _ => FILLER.choose(rng).unwrap().to_string(),
        };
        note.push_str(&line);
        let ending = ["\n", "\n", "\n", "\r\n", "\n\n"].choose(rng).unwrap();
        note.push_str(ending);
    }
    if rng.random_bool(0.5) {
        note.push_str("trailing text without newline");
    }
    (note, expected)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Serves `router` on an ephemeral local port and returns its base URL.
pub async fn serve(router: axum::Router) -> String {
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, router).await.unwrap();
    });
    format!("http://{addr}")
}

/// Lexicon-free word tokens used by brute-force oracles: maximal runs of
/// ASCII letters, with byte offsets.
pub fn letter_runs(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_ascii_alphabetic(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}
