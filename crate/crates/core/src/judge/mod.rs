//! Trajectory-level rewards: rubric votes, vote aggregation and
//! judge/human agreement.

use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Trajectory;
use crate::client::{text_bindings, ChatMessage, PromptLibrary, Role, TemplateId};
use crate::port::PortError;

/// Allowed rubric scores, lowest first.
pub const RUBRIC: [u8; 3] = [1, 3, 5];
pub const DEFAULT_VOTES: usize = 3;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("no votes to aggregate")]
    NoVotes,
    #[error("score {0} is not one of 1, 3, 5")]
    OutOfRubric(i64),
    #[error("judge reply has no SCORE line")]
    MissingScore,
    #[error("score lists differ in length: {judge} vs {human}")]
    LengthMismatch { judge: usize, human: usize },
    #[error("empty score list")]
    EmptyScores,
    #[error("{path}:{line}: {message}")]
    Csv { path: String, line: usize, message: String },
    #[error("prompt: {0}")]
    Prompt(String),
}

pub fn check_rubric(score: i64) -> Result<u8, JudgeError> {
    match score {
        1 | 3 | 5 => Ok(score as u8),
        other => Err(JudgeError::OutOfRubric(other)),
    }
}

/// Rubric level index: 1, 3, 5 map to 0, 1, 2.
pub fn rubric_level(score: u8) -> Result<usize, JudgeError> {
    RUBRIC
        .iter()
        .position(|&s| s == score)
        .ok_or(JudgeError::OutOfRubric(score.into()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub score: u8,
    pub rationale: String,
    /// The judge never produced a valid score and the vote fell back to 1.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub defaulted: bool,
}

impl Vote {
    pub fn new(score: i64, rationale: impl Into<String>) -> Result<Vote, JudgeError> {
        Ok(Vote {
            score: check_rubric(score)?,
            rationale: rationale.into(),
            defaulted: false,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub votes: Vec<Vote>,
    pub reward: u8,
    /// No strict mode existed and the median decided, or a vote defaulted.
    pub tie_broken: bool,
}

pub struct JudgeRequest<'a> {
    pub trajectory: &'a Trajectory,
    pub messages: &'a [ChatMessage],
    /// Which of the K independent votes this call produces.
    pub vote_index: usize,
    pub attempt: usize,
}

pub trait JudgePort: Send + Sync {
    fn evaluate(&self, req: &JudgeRequest<'_>) -> Result<String, PortError>;
}

/// Simulation judge: 5 for success, 3 when some goal condition holds, else 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptedJudge;

impl JudgePort for ScriptedJudge {
    fn evaluate(&self, req: &JudgeRequest<'_>) -> Result<String, PortError> {
        let t = req.trajectory;
        let (score, verdict) = if t.success {
            (5, "goal fully satisfied")
        } else if t.goal_met > 0 {
            (3, "goal partially satisfied")
        } else {
            (1, "no goal condition satisfied")
        };
        Ok(format!(
            "FINAL ANSWER:\n{verdict} ({}/{} conditions, {} steps)\n\nSCORE: {score}",
            t.goal_met,
            t.goal_total(),
            t.steps.len()
        ))
    }
}

fn score_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*\**SCORE\**\s*:\s*\[?\s*(-?\d+)\s*\]?\**\s*$").unwrap())
}

/// Reads the last `SCORE: n` line of a judge reply.
pub fn parse_score(text: &str) -> Result<u8, JudgeError> {
    let caps = score_re().captures_iter(text).last().ok_or(JudgeError::MissingScore)?;
    let n: i64 = caps[1].parse().map_err(|_| JudgeError::MissingScore)?;
    check_rubric(n)
}

/// Judge prompt with the step-by-step evidence appended to the user turn.
pub fn judge_messages(prompts: &PromptLibrary, traj: &Trajectory) -> Result<Vec<ChatMessage>, JudgeError> {
    let mut messages = prompts
        .render(
            TemplateId::JudgeEval,
            &text_bindings([("instruction", traj.task.instruction.clone())]),
        )
        .map_err(|e| JudgeError::Prompt(e.to_string()))?;
    let mut evidence = String::from("\n");
    for (i, step) in traj.steps.iter().enumerate() {
        evidence.push_str(&format!("\nScreenshot {}:\n{}\n", i + 1, step.observation.render()));
        evidence.push_str(&format!("Plan:\n{}\nSubgoal: {}\n", step.plan.raw, step.subgoal.text));
        match &step.action {
            Some(a) => evidence.push_str(&format!("Action: {a}\n")),
            None => evidence.push_str("Action: none\n"),
        }
        if !step.note.is_empty() {
            evidence.push_str(&format!("Result: {}\n", step.note));
        }
    }
    evidence.push_str(&format!(
        "\nFinal answer: {}\n",
        traj.final_answer.as_deref().unwrap_or("(none)")
    ));
    match messages.iter_mut().rfind(|m| m.role == Role::User) {
        Some(user) => user.push_text(&evidence),
        None => messages.push(ChatMessage::text(Role::User, evidence)),
    }
    Ok(messages)
}

/// One vote. A reply without a valid score is retried once; a second
/// failure yields a defaulted vote of 1.
pub fn score_trajectory(
    traj: &Trajectory,
    judge: &dyn JudgePort,
    prompts: &PromptLibrary,
    vote_index: usize,
) -> Result<Vote, JudgeError> {
    let messages = judge_messages(prompts, traj)?;
    let mut last = String::new();
    for attempt in 0..2 {
        let reply = judge.evaluate(&JudgeRequest {
            trajectory: traj,
            messages: &messages,
            vote_index,
            attempt,
        });
        match reply.map_err(|e| e.to_string()).and_then(|r| {
            parse_score(&r).map(|s| (s, r)).map_err(|e| e.to_string())
        }) {
            Ok((score, text)) => {
                return Ok(Vote {
                    score,
                    rationale: text,
                    defaulted: false,
                })
            }
            Err(e) => {
                log::debug!("judge vote {vote_index} attempt {} unusable: {e}", attempt + 1);
                last = e;
            }
        }
    }
    log::warn!("judge vote {vote_index} defaulted to 1 after retry: {last}");
    Ok(Vote {
        score: 1,
        rationale: format!("unjudgeable: {last}"),
        defaulted: true,
    })
}

/// Strict mode when one exists, otherwise the lower median of the sorted
/// scores with `tie_broken` set.
pub fn aggregate_votes(votes: &[Vote]) -> Result<RewardRecord, JudgeError> {
    if votes.is_empty() {
        return Err(JudgeError::NoVotes);
    }
    let mut counts = [0usize; 3];
    for v in votes {
        counts[rubric_level(v.score)?] += 1;
    }
    let top = *counts.iter().max().unwrap();
    let leaders: Vec<usize> = (0..3).filter(|&i| counts[i] == top).collect();
    let (reward, tie) = if leaders.len() == 1 {
        (RUBRIC[leaders[0]], false)
    } else {
        let mut sorted: Vec<u8> = votes.iter().map(|v| v.score).collect();
        sorted.sort_unstable();
        (sorted[(sorted.len() - 1) / 2], true)
    };
    Ok(RewardRecord {
        votes: votes.to_vec(),
        reward,
        tie_broken: tie || votes.iter().any(|v| v.defaulted),
    })
}

/// K votes, gathered in parallel, then aggregated.
pub fn judge_trajectory(
    traj: &Trajectory,
    judge: &dyn JudgePort,
    prompts: &PromptLibrary,
    k: usize,
) -> Result<RewardRecord, JudgeError> {
    let votes = (0..k)
        .into_par_iter()
        .map(|i| score_trajectory(traj, judge, prompts, i))
        .collect::<Result<Vec<_>, _>>()?;
    aggregate_votes(&votes)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub n: usize,
    pub exact_pct: f64,
    pub within_one_level_pct: f64,
}

pub fn agreement_stats(judge: &[u8], human: &[u8]) -> Result<Agreement, JudgeError> {
    if judge.len() != human.len() {
        return Err(JudgeError::LengthMismatch {
            judge: judge.len(),
            human: human.len(),
        });
    }
    if judge.is_empty() {
        return Err(JudgeError::EmptyScores);
    }
    let mut exact = 0usize;
    let mut near = 0usize;
    for (&j, &h) in judge.iter().zip(human) {
        let (lj, lh) = (rubric_level(j)?, rubric_level(h)?);
        exact += usize::from(lj == lh);
        near += usize::from(lj.abs_diff(lh) <= 1);
    }
    let n = judge.len();
    Ok(Agreement {
        n,
        exact_pct: 100.0 * exact as f64 / n as f64,
        within_one_level_pct: 100.0 * near as f64 / n as f64,
    })
}

/// Reads a score column from a CSV file with a header row. Uses the column
/// named `score` when present, else the last column.
pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<u8>, JudgeError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let csv_err = |line: usize, message: String| JudgeError::Csv {
        path: shown.clone(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(0, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("score"))
        .unwrap_or(headers.len().saturating_sub(1));
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_err(line, e.to_string()))?;
        let field = rec.get(col).ok_or_else(|| csv_err(line, "missing score column".into()))?;
        let n: i64 = field
            .parse()
            .map_err(|_| csv_err(line, format!("not an integer: {field:?}")))?;
        out.push(check_rubric(n).map_err(|e| csv_err(line, e.to_string()))?);
    }
    Ok(out)
}
