mod common;

use std::time::Instant;

use dischargekit::{extract_section, redact_targets, segment, SectionName, SegmentedNote};

fn assert_tiles(note: &SegmentedNote) {
    let mut cursor = note.preamble_span.end;
    assert_eq!(note.preamble_span.start, 0);
    for s in &note.sections {
        assert_eq!(s.header_span.start, cursor);
        assert_eq!(s.header_span.end, s.body_span.start);
        assert_eq!(s.body_text, s.body_span.slice(&note.source));
        cursor = s.body_span.end;
    }
    assert_eq!(cursor, note.source.len());
    assert_eq!(note.reassemble(), note.source);
}

#[test]
fn golden_note_has_every_canonical_section_in_order() {
    let text = common::golden_note();
    let note = segment(&text);
    assert_tiles(&note);
    let names: Vec<_> = note.sections.iter().map(|s| s.name.clone()).collect();
    let mut expected = vec![SectionName::Unknown("Allergies:".into())];
    expected.extend(SectionName::CANONICAL.iter().cloned());
    assert_eq!(names, expected);
    for (i, name) in SectionName::CANONICAL.iter().enumerate() {
        let body = extract_section(&note, name).unwrap();
        assert_eq!(body, format!("body line {i} for {}.", name.display_name()));
    }
}

#[test]
fn random_notes_tile_and_find_expected_headers() {
    let mut rng = common::rng(11);
    let started = Instant::now();
    for _ in 0..100 {
        let (text, expected) = common::random_note(&mut rng);
        let note = segment(&text);
        assert_tiles(&note);
        let names: Vec<_> = note.sections.iter().map(|s| s.name.clone()).collect();
        assert_eq!(names, expected, "note:\n{text}");
    }
    assert!(started.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn fixture_corpus_notes_tile() {
    for visit in common::corpus() {
        let note = segment(&visit.note_text);
        assert_tiles(&note);
        assert!(
            note.first(&SectionName::BriefHospitalCourse).is_some(),
            "{}",
            visit.hadm_id
        );
    }
}

#[test]
fn redaction_removes_target_bodies_only() {
    for visit in common::corpus().iter().take(5) {
        let note = segment(&visit.note_text);
        let redacted = redact_targets(&note);
        let bhc = extract_section(&note, &SectionName::BriefHospitalCourse).unwrap();
        assert!(!redacted.contains(bhc));
        if let Some(cc) = extract_section(&note, &SectionName::ChiefComplaint) {
            assert!(redacted.contains(cc));
        }
    }
}

#[test]
fn inline_pertinent_results_keeps_text_in_body() {
    let note = segment("Pertinent Results: WBC 8.1\nmore\nBrief Hospital Course:\nok\n");
    let pr = note.first(&SectionName::PertinentResults).unwrap();
    assert_eq!(pr.header_span.slice(&note.source), "Pertinent Results:");
    assert_eq!(
        extract_section(&note, &SectionName::PertinentResults),
        Some("WBC 8.1\nmore")
    );
}
