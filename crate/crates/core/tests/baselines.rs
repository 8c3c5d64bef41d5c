use pairevo::backend::{decode_theta, encode_candidate, SyntheticBackend, SyntheticWorldConfig};
use pairevo::backend::ScriptedBackend;
use pairevo::baselines::{
    judge_diagnostic, pointwise_score, self_refine, DiagnosticOptions, LabeledPair, DEFAULT_POINTWISE_VOTES,
};
use pairevo::population::{Candidate, CandidateId};
use pairevo::prompts::PromptTemplates;

fn candidates(count: usize) -> Vec<Candidate> {
    (0..count)
        .map(|i| Candidate::sampled(CandidateId(i as u32), encode_candidate(i as f64 * 0.05 - 1.0, i as u64)))
        .collect()
}

fn mean_theta(cs: &[Candidate]) -> f64 {
    cs.iter().map(|c| decode_theta(&c.content).unwrap()).sum::<f64>() / cs.len() as f64
}

#[test]
fn zero_refine_rounds_make_no_calls() {
    let backend = ScriptedBackend::new(Vec::<String>::new());
    let input = candidates(4);
    let out = self_refine(&backend, &PromptTemplates::default(), "p", &input, 0, 2, 0).unwrap();
    assert_eq!(backend.calls(), 0);
    assert_eq!(out.calls, 0);
    assert_eq!(out.final_candidates(), &input[..]);
}

#[test]
fn refinement_with_positive_drift_raises_mean_quality() {
    let backend = SyntheticBackend::new(SyntheticWorldConfig::default()).unwrap();
    let input = candidates(40);
    let out = self_refine(&backend, &PromptTemplates::default(), "p", &input, 6, 4, 8).unwrap();
    assert_eq!(out.calls, 240);
    assert_eq!(out.rounds.len(), 7);
    assert!(mean_theta(out.final_candidates()) > mean_theta(&input));
    let ids: Vec<_> = out.final_candidates().iter().map(|c| c.id).collect();
    assert_eq!(ids, input.iter().map(|c| c.id).collect::<Vec<_>>());
}

#[test]
fn refine_failure_keeps_completed_rounds() {
    let backend = ScriptedBackend::new(["```cpp\nx\n```", "```cpp\ny\n```"]);
    backend.push_failure("down");
    let failure = self_refine(&backend, &PromptTemplates::default(), "p", &candidates(2), 3, 1, 0).unwrap_err();
    assert_eq!(failure.partial.rounds.len(), 2);
    assert_eq!(failure.partial.calls, 2);
}

#[test]
fn fourteen_scripted_votes_are_tallied() {
    let mut replies = vec!["reasoning\nVERDICT: YES"; 9];
    replies.extend(["VERDICT: NO"; 3]);
    replies.extend(["no verdict here", "VERDICT: MAYBE"]);
    let backend = ScriptedBackend::new(replies);
    let c = &candidates(1)[0];
    let v = pointwise_score(&backend, &PromptTemplates::default(), "p", c, DEFAULT_POINTWISE_VOTES, 1, 0).unwrap();
    assert_eq!((v.yes_votes, v.total_votes, v.discarded), (9, 12, 2));
    assert!(!v.is_flagged());
}

#[test]
fn diagnostic_skips_malformed_pairs() {
    let good = LabeledPair {
        problem: "p".into(),
        first: encode_candidate(3.0, 0),
        second: encode_candidate(-3.0, 1),
        first_accepted: true,
        second_accepted: false,
    };
    let both = LabeledPair {
        second_accepted: true,
        ..good.clone()
    };
    let empty = LabeledPair {
        first: "  ".into(),
        ..good.clone()
    };
    let backend = SyntheticBackend::new(SyntheticWorldConfig::default()).unwrap();
    let pairs = vec![good.clone(), both, empty, good];
    let report = judge_diagnostic(&backend, &PromptTemplates::default(), &pairs, &DiagnosticOptions::default()).unwrap();
    assert_eq!(report.pair_count, 2);
    assert_eq!(report.skipped_pairs, 2);
    for share in [report.pairwise_accuracy, report.pointwise_accuracy_on_accepted, report.pointwise_joint] {
        assert!((0.0..=1.0).contains(&share));
    }
}
