//! Optional external judge for answer quality and match score.

use serde::Deserialize;
use thiserror::Error;

use crate::pipeline::LlmClient;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("JudgeUnavailable: {0}")]
    JudgeUnavailable(String),
    #[error("MalformedJudgeOutput: {0}")]
    MalformedJudgeOutput(String),
}

const JUDGE_PROMPT: &str = r#"You are serving as a rigorous reviewer and need to score the following response. Please provide two integer scores on a 1-5 scale (5 being the best):

# Criteria
Answer Quality (evaluating the overall integrity, coherence, and fluency of generated answers)
Match Score (assessing the degree of alignment between the answer and the query's intent, reflecting how effectively the response addresses the user's underlying need)

# Output Format (only return JSON)
{
  "Answer Quality": <1-5>,
  "Match Score": <1-5>,
  "Comment": "<concise justification in 50 characters or less>"
}

# Input
## Question
(User's input query)
## Response
(System-generated answer)"#;

/// The judge prompt with the question and answer substituted.
pub fn judge_prompt(question: &str, answer: &str) -> String {
    JUDGE_PROMPT.replace("(User's input query)", question).replace("(System-generated answer)", answer)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JudgeScores {
    pub answer_quality: u8,
    pub match_score: u8,
    pub comment: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVerdict {
    #[serde(rename = "Answer Quality")]
    answer_quality: i64,
    #[serde(rename = "Match Score")]
    match_score: i64,
    #[serde(rename = "Comment")]
    comment: String,
}

fn in_range(name: &str, v: i64) -> Result<u8, JudgeError> {
    if (1..=5).contains(&v) {
        Ok(v as u8)
    } else {
        Err(JudgeError::MalformedJudgeOutput(format!("{name} = {v} outside 1-5")))
    }
}

/// Parse a judge reply. The reply must be a single JSON object with exactly
/// the three expected keys.
pub fn parse_verdict(reply: &str) -> Result<JudgeScores, JudgeError> {
    let raw: RawVerdict = serde_json::from_str(reply.trim()).map_err(|e| JudgeError::MalformedJudgeOutput(e.to_string()))?;
    Ok(JudgeScores {
        answer_quality: in_range("Answer Quality", raw.answer_quality)?,
        match_score: in_range("Match Score", raw.match_score)?,
        comment: raw.comment,
    })
}

pub fn judge_aq_ms(question: &str, answer: &str, judge: Option<&dyn LlmClient>) -> Result<JudgeScores, JudgeError> {
    let judge = judge.ok_or_else(|| JudgeError::JudgeUnavailable("no judge configured".into()))?;
    let reply = judge.complete(&judge_prompt(question, answer)).map_err(|e| JudgeError::JudgeUnavailable(e.0))?;
    parse_verdict(&reply)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ClientError;
    use std::sync::Mutex;

    struct Recorder {
        reply: String,
        seen: Mutex<Vec<String>>,
    }

    impl LlmClient for Recorder {
        fn complete(&self, prompt: &str) -> Result<String, ClientError> {
            self.seen.lock().unwrap().push(prompt.to_string());
            Ok(self.reply.clone())
        }
    }

    #[test]
    fn well_formed_reply() {
        let r = Recorder { reply: r#"{"Answer Quality":4,"Match Score":5,"Comment":"clear"}"#.into(), seen: Mutex::new(vec![]) };
        let s = judge_aq_ms("Where is a toilet?", "Here [id:a]", Some(&r)).unwrap();
        assert_eq!((s.answer_quality, s.match_score), (4, 5));
        let sent = &r.seen.lock().unwrap()[0];
        assert!(sent.starts_with("You are serving as a rigorous reviewer"));
        assert!(sent.ends_with("## Question\nWhere is a toilet?\n## Response\nHere [id:a]"));
    }

    #[test]
    fn malformed_replies() {
        assert!(matches!(parse_verdict(r#"{"Answer Quality":4,"Comment":"x"}"#), Err(JudgeError::MalformedJudgeOutput(_))));
        assert!(matches!(
            parse_verdict(r#"{"Answer Quality":7,"Match Score":5,"Comment":"x"}"#),
            Err(JudgeError::MalformedJudgeOutput(_))
        ));
        assert!(matches!(parse_verdict("great answer"), Err(JudgeError::MalformedJudgeOutput(_))));
    }

    #[test]
    fn missing_judge() {
        assert!(matches!(judge_aq_ms("q", "a", None), Err(JudgeError::JudgeUnavailable(_))));
    }
}
