use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;

use super::{EmotionScore, PromptTemplates, ReflectionError};
use crate::llm::{ChatClient, ChatMessage};

/// Scores an event description.
pub trait EmotionEvaluator {
    fn evaluate(&self, description: &str, templates: &PromptTemplates) -> Result<EmotionScore, ReflectionError>;

    /// Positive-valence variant. Scores are reported only; the map is never
    /// changed by them.
    fn evaluate_positive(&self, description: &str, templates: &PromptTemplates) -> Result<PositiveScore, ReflectionError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveScore {
    pub positivity: u8,
    pub rationale: String,
}

/// Keyword-class scorer used offline.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedEvaluator;

fn contains_any(text: &str, words: &[&str]) -> bool {
    words.iter().any(|w| text.contains(w))
}

impl EmotionEvaluator for ScriptedEvaluator {
    fn evaluate(&self, description: &str, _templates: &PromptTemplates) -> Result<EmotionScore, ReflectionError> {
        if description.trim().is_empty() {
            return Err(ReflectionError::EmptyDescription);
        }
        let text = description.to_lowercase();
        let collided = contains_any(&text, &["collided", "collision", "bumped into", "crashed"]);
        let human = contains_any(&text, &["person", "human", "people"]);
        let near = contains_any(&text, &["came close", "near miss", "almost hit"]);
        let (u, g, why) = match (collided, near, human) {
            (true, _, true) => (3, 3, "The robot hit a person: the impact stopped it and could have hurt someone."),
            (true, _, false) => (3, 2, "The robot hit an object and disturbed its surroundings."),
            (false, true, true) => (2, 1, "The robot passed dangerously close to a person."),
            (false, true, false) => (1, 0, "The robot passed close to an object without contact."),
            _ => (0, 0, "Nothing adverse happened."),
        };
        EmotionScore::new(u, g, why)
    }

    fn evaluate_positive(&self, description: &str, _templates: &PromptTemplates) -> Result<PositiveScore, ReflectionError> {
        if description.trim().is_empty() {
            return Err(ReflectionError::EmptyDescription);
        }
        let text = description.to_lowercase();
        let hits = ["sofa", "relax", "comfort", "calm", "rest", "cozy", "pleasant"]
            .iter()
            .filter(|w| text.contains(*w))
            .count();
        let positivity = hits.min(3) as u8;
        Ok(PositiveScore { positivity, rationale: format!("{hits} pleasant cue(s) in the description") })
    }
}

/// Few-shot prompted evaluator over a chat endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEvaluator {
    client: ChatClient,
}

impl RemoteEvaluator {
    pub fn new(client: ChatClient) -> Self {
        Self { client }
    }
}

impl EmotionEvaluator for RemoteEvaluator {
    fn evaluate(&self, description: &str, templates: &PromptTemplates) -> Result<EmotionScore, ReflectionError> {
        if description.trim().is_empty() {
            return Err(ReflectionError::EmptyDescription);
        }
        let prompt = PromptTemplates::render(&templates.evaluator, &[("description", description.trim())])?;
        let reply = self.client.complete(&[ChatMessage::system(&templates.system), ChatMessage::user(prompt)])?;
        parse_score_response(&reply)
    }

    fn evaluate_positive(&self, description: &str, templates: &PromptTemplates) -> Result<PositiveScore, ReflectionError> {
        let prompt = PromptTemplates::render(&templates.evaluator_positive, &[("description", description.trim())])?;
        let reply = self.client.complete(&[ChatMessage::system(&templates.system), ChatMessage::user(prompt)])?;
        parse_positive_response(&reply)
    }
}

fn score_regex(name: &str) -> Regex {
    Regex::new(&format!(r"(?im)^\W*{name}\W*\s*[:=]\s*\**\s*(\d+)\s*(?:/\s*3)?")).expect("valid regex")
}

fn last_capture(re: &Regex, text: &str) -> Option<(usize, u32)> {
    re.captures_iter(text)
        .last()
        .and_then(|c| Some((c.get(0)?.start(), c[1].parse().ok()?)))
}

fn criterion(value: u32, name: &str) -> Result<u8, ReflectionError> {
    u8::try_from(value)
        .ok()
        .filter(|v| *v <= EmotionScore::MAX_PER_CRITERION)
        .ok_or_else(|| ReflectionError::MalformedResponse(format!("{name} score {value} is outside 0..=3")))
}

#[derive(Deserialize)]
struct JsonScore {
    upsetness: u32,
    guiltiness: u32,
    #[serde(default, alias = "reason", alias = "reasoning")]
    rationale: Option<String>,
}

/// Extracts both criteria from an evaluator reply.
///
/// Accepts `Upsetness: k/3` and `Guiltiness: k/3` lines (the last occurrence
/// wins) or a JSON object with `upsetness` and `guiltiness` fields. Anything
/// else is rejected; no default score is ever substituted.
pub fn parse_score_response(text: &str) -> Result<EmotionScore, ReflectionError> {
    static UPSET: OnceLock<Regex> = OnceLock::new();
    static GUILT: OnceLock<Regex> = OnceLock::new();
    static JSON_BLOCK: OnceLock<Regex> = OnceLock::new();
    if text.trim().is_empty() {
        return Err(ReflectionError::MalformedResponse("empty response".into()));
    }
    let upset = UPSET.get_or_init(|| score_regex("upsetness"));
    let guilt = GUILT.get_or_init(|| score_regex("guiltiness"));
    if let (Some((ua, u)), Some((ga, g))) = (last_capture(upset, text), last_capture(guilt, text)) {
        let rationale = text[..ua.min(ga)].trim().to_string();
        return EmotionScore::new(criterion(u, "upsetness")?, criterion(g, "guiltiness")?, rationale);
    }
    let json = JSON_BLOCK.get_or_init(|| Regex::new(r"(?s)\{[^{}]*\}").expect("valid regex"));
    for m in json.find_iter(text) {
        if let Ok(parsed) = serde_json::from_str::<JsonScore>(m.as_str()) {
            return EmotionScore::new(
                criterion(parsed.upsetness, "upsetness")?,
                criterion(parsed.guiltiness, "guiltiness")?,
                parsed.rationale.unwrap_or_default(),
            );
        }
    }
    Err(ReflectionError::MalformedResponse(
        "expected 'Upsetness: k/3' and 'Guiltiness: k/3' lines or a JSON score object".into(),
    ))
}

/// Extracts `Positivity: k/3` from a positive-valence evaluator reply.
pub fn parse_positive_response(text: &str) -> Result<PositiveScore, ReflectionError> {
    static POS: OnceLock<Regex> = OnceLock::new();
    let re = POS.get_or_init(|| score_regex("positivity"));
    let (at, v) = last_capture(re, text)
        .ok_or_else(|| ReflectionError::MalformedResponse("expected a 'Positivity: k/3' line".into()))?;
    Ok(PositiveScore { positivity: criterion(v, "positivity")?, rationale: text[..at].trim().to_string() })
}
