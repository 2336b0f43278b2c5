mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::*;
use pilot_core::agent::{EpisodeRunner, GroundingActor, NoMemory, ReferencePlanner, Trajectory};
use pilot_core::client::PromptLibrary;
use pilot_core::env::World;
use pilot_core::judge::*;
use pilot_core::port::PortError;

fn votes(scores: &[u8]) -> Vec<Vote> {
    scores.iter().map(|&s| Vote::new(s.into(), "r").unwrap()).collect()
}

#[test]
fn all_27_triples_match_the_oracle() {
    let levels = [1u8, 3, 5];
    for a in levels {
        for b in levels {
            for c in levels {
                let rec = aggregate_votes(&votes(&[a, b, c])).unwrap();
                assert_eq!((rec.reward, rec.tie_broken), vote_oracle(&[a, b, c]), "{a}{b}{c}");
                for perm in [[a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    assert_eq!(aggregate_votes(&votes(&perm)).unwrap().reward, rec.reward);
                }
                if a != b && b != c && a != c {
                    assert_eq!((rec.reward, rec.tie_broken), (3, true));
                }
            }
        }
    }
}

#[test]
fn vote_edge_cases() {
    assert!(matches!(aggregate_votes(&[]), Err(JudgeError::NoVotes)));
    assert!(matches!(Vote::new(4, "x"), Err(JudgeError::OutOfRubric(4))));
    let one = aggregate_votes(&votes(&[5])).unwrap();
    assert_eq!((one.reward, one.tie_broken), (5, false));
    let even = aggregate_votes(&votes(&[1, 5])).unwrap();
    assert_eq!((even.reward, even.tie_broken), (1, true));
}

#[test]
fn score_lines() {
    assert_eq!(parse_score("thoughts\nSCORE: 5").unwrap(), 5);
    assert_eq!(parse_score("**SCORE**: 3\n").unwrap(), 3);
    assert_eq!(parse_score("SCORE: 1\nrevised\nSCORE: 5").unwrap(), 5);
    assert!(matches!(parse_score("SCORE: 4"), Err(JudgeError::OutOfRubric(4))));
    assert!(parse_score("SCORE: [1/3/5]").is_err());
    assert!(matches!(parse_score("no score"), Err(JudgeError::MissingScore)));
}

fn solved() -> Trajectory {
    let spec = world("synthshop");
    let task = spec.task("T1").unwrap().clone();
    let mut w = World::new(Arc::clone(&spec), 0);
    EpisodeRunner::default()
        .run(&mut w, &task, &mut ReferencePlanner, &mut GroundingActor, &mut NoMemory::default())
        .unwrap()
}

struct Flaky {
    calls: AtomicUsize,
    good_after: usize,
}

impl JudgePort for Flaky {
    fn evaluate(&self, _req: &JudgeRequest<'_>) -> Result<String, PortError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(if n >= self.good_after { "SCORE: 5".into() } else { "I am not sure.".into() })
    }
}

#[test]
fn unusable_replies_retry_once_then_default() {
    let t = solved();
    let prompts = PromptLibrary::builtin();

    let once = Flaky { calls: AtomicUsize::new(0), good_after: 1 };
    let v = score_trajectory(&t, &once, prompts, 0).unwrap();
    assert_eq!((v.score, v.defaulted), (5, false));
    assert_eq!(once.calls.load(Ordering::SeqCst), 2);

    let never = Flaky { calls: AtomicUsize::new(0), good_after: usize::MAX };
    let v = score_trajectory(&t, &never, prompts, 0).unwrap();
    assert_eq!((v.score, v.defaulted), (1, true));
    assert_eq!(never.calls.load(Ordering::SeqCst), 2);

    let rec = judge_trajectory(&t, &never, prompts, 3).unwrap();
    assert_eq!((rec.reward, rec.tie_broken), (1, true));
}

#[test]
fn scripted_judge_rewards_success() {
    let t = solved();
    let rec = judge_trajectory(&t, &ScriptedJudge, PromptLibrary::builtin(), DEFAULT_VOTES).unwrap();
    assert_eq!((rec.reward, rec.tie_broken, rec.votes.len()), (5, false, 3));
    let msgs = judge_messages(PromptLibrary::builtin(), &t).unwrap();
    assert!(msgs.iter().any(|m| format!("{m:?}").contains(&t.task.instruction)));
}

#[test]
fn agreement_percentages() {
    let judge = [5, 3, 1, 5, 1];
    let human = [5, 1, 1, 3, 5];
    let a = agreement_stats(&judge, &human).unwrap();
    assert_eq!(a.n, 5);
    assert!((a.exact_pct - 40.0).abs() < 1e-12);
    assert!((a.within_one_level_pct - 80.0).abs() < 1e-12);
    assert!(matches!(agreement_stats(&[1], &[1, 3]), Err(JudgeError::LengthMismatch { .. })));
    assert!(matches!(agreement_stats(&[], &[]), Err(JudgeError::EmptyScores)));
}

#[test]
fn score_csv_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    std::fs::write(&path, "id,score\na,5\nb,3\nc,1\n").unwrap();
    assert_eq!(read_scores_csv(&path).unwrap(), vec![5, 3, 1]);
    std::fs::write(&path, "id,score\na,5\nb,2\n").unwrap();
    match read_scores_csv(&path) {
        Err(JudgeError::Csv { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}
