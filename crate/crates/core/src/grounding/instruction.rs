use serde::Deserialize;

use super::goals::{GoalApi, GoalCall, GoalProgram};
use super::GroundingError;
use crate::llm::{ChatClient, ChatMessage, LlmError};
use crate::reflection::PromptTemplates;

/// Object names understood by the scripted parser and offered to the remote one.
pub const SCENE_OBJECTS: [&str; 11] = [
    "picture",
    "chair",
    "table",
    "microwave",
    "refrigerator",
    "door",
    "shelving",
    "tv monitor",
    "sofa",
    "window",
    "plant",
];

/// Turns a free-form instruction into a goal program.
pub trait InstructionParser {
    fn parse(&self, text: &str) -> Result<GoalProgram, GroundingError>;
}

/// Rule-based parser for imperative instructions that chain object mentions
/// with "then", "and" or commas.
///
/// Each object mention becomes one call. The relation is taken from the last
/// spatial keyword between the previous mention and this one ("left side of",
/// "bottom of", ...); `between X and Y` consumes two mentions. Anything else,
/// including "in front of", maps to `go_to`.
#[derive(Debug, Clone)]
pub struct ScriptedInstructionParser {
    /// Object names as token sequences, longest first.
    vocabulary: Vec<Vec<String>>,
}

impl Default for ScriptedInstructionParser {
    fn default() -> Self {
        Self::new(SCENE_OBJECTS)
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

enum Relation {
    Api(GoalApi),
    Between,
}

fn relation_keyword(token: &str) -> Option<Relation> {
    Some(match token {
        "between" => Relation::Between,
        "left" | "leftside" => Relation::Api(GoalApi::GoLeftOf),
        "right" | "rightside" => Relation::Api(GoalApi::GoRightOf),
        "top" | "above" | "upper" => Relation::Api(GoalApi::GoTopOf),
        "bottom" | "below" | "beneath" | "bottomside" => Relation::Api(GoalApi::GoBottomOf),
        _ => return None,
    })
}

struct Mention {
    start: usize,
    end: usize,
    name: String,
}

impl ScriptedInstructionParser {
    pub fn new<S: AsRef<str>>(objects: impl IntoIterator<Item = S>) -> Self {
        let mut vocabulary: Vec<Vec<String>> =
            objects.into_iter().map(|o| tokenize(o.as_ref())).filter(|t| !t.is_empty()).collect();
        vocabulary.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        Self { vocabulary }
    }

    fn mentions(&self, tokens: &[String]) -> Vec<Mention> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let hit = self.vocabulary.iter().find(|w| tokens[i..].starts_with(w));
            match hit {
                Some(w) => {
                    out.push(Mention { start: i, end: i + w.len(), name: w.join(" ") });
                    i += w.len();
                }
                None => i += 1,
            }
        }
        out
    }
}

impl InstructionParser for ScriptedInstructionParser {
    fn parse(&self, text: &str) -> Result<GoalProgram, GroundingError> {
        let unparsable = || GroundingError::UnparsableInstruction(text.to_string());
        let tokens = tokenize(text);
        let mentions = self.mentions(&tokens);
        let mut calls = Vec::new();
        let mut prev_end = 0;
        let mut i = 0;
        while i < mentions.len() {
            let m = &mentions[i];
            let relation = tokens[prev_end..m.start].iter().rev().find_map(|t| relation_keyword(t));
            match relation {
                Some(Relation::Between) => {
                    let second = mentions.get(i + 1).ok_or_else(unparsable)?;
                    let joiner = &tokens[m.end..second.start];
                    if !(joiner == ["and"] || joiner == ["and", "the"]) {
                        return Err(unparsable());
                    }
                    calls.push(GoalCall { api: GoalApi::GoBetween, objects: vec![m.name.clone(), second.name.clone()] });
                    prev_end = second.end;
                    i += 2;
                }
                other => {
                    let api = match other {
                        Some(Relation::Api(api)) => api,
                        _ => GoalApi::GoTo,
                    };
                    calls.push(GoalCall { api, objects: vec![m.name.clone()] });
                    prev_end = m.end;
                    i += 1;
                }
            }
        }
        if calls.is_empty() {
            return Err(unparsable());
        }
        GoalProgram::new(calls, text)
    }
}

/// Parser backed by a chat model that must reply with a JSON call list.
#[derive(Debug, Clone)]
pub struct RemoteInstructionParser {
    client: ChatClient,
    templates: PromptTemplates,
    objects: Vec<String>,
}

#[derive(Deserialize)]
struct RawCall {
    api: String,
    objects: Vec<String>,
}

impl RemoteInstructionParser {
    pub fn new(client: ChatClient, templates: PromptTemplates, objects: Vec<String>) -> Self {
        Self { client, templates, objects }
    }

    /// Validates a model reply against the API table and the known objects.
    pub fn parse_reply(&self, reply: &str, source: &str) -> Result<GoalProgram, GroundingError> {
        let invalid = |m: String| GroundingError::InvalidProgram(m);
        let (start, end) = match (reply.find('['), reply.rfind(']')) {
            (Some(s), Some(e)) if s < e => (s, e),
            _ => return Err(invalid("reply contains no JSON array".into())),
        };
        let raw: Vec<RawCall> = serde_json::from_str(&reply[start..=end]).map_err(|e| invalid(e.to_string()))?;
        let mut calls = Vec::with_capacity(raw.len());
        for call in raw {
            let api = GoalApi::from_name(call.api.trim()).ok_or_else(|| invalid(format!("unknown api {:?}", call.api)))?;
            let mut objects = Vec::with_capacity(call.objects.len());
            for o in &call.objects {
                let name = tokenize(o).join(" ");
                if !self.objects.contains(&name) {
                    return Err(invalid(format!("unknown object {o:?}")));
                }
                objects.push(name);
            }
            calls.push(GoalCall { api, objects });
        }
        GoalProgram::new(calls, source)
    }
}

impl InstructionParser for RemoteInstructionParser {
    fn parse(&self, text: &str) -> Result<GoalProgram, GroundingError> {
        if text.trim().is_empty() {
            return Err(GroundingError::UnparsableInstruction(text.to_string()));
        }
        let prompt = PromptTemplates::render(
            &self.templates.goal_selector,
            &[("objects", &self.objects.join(", ")), ("instruction", text.trim())],
        )
        .map_err(|e| GroundingError::InvalidProgram(e.to_string()))?;
        let reply = self
            .client
            .complete(&[ChatMessage::system(&self.templates.system), ChatMessage::user(prompt)])
            .map_err(|e| match e {
                LlmError::BadResponse(m) => GroundingError::BadResponse(m),
                other => GroundingError::BackendUnavailable(other.to_string()),
            })?;
        self.parse_reply(&reply, text)
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::llm::LlmConfig;
    use GoalApi::*;

    fn parse(text: &str) -> Vec<String> {
        ScriptedInstructionParser::default().parse(text).unwrap().calls.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn single_and_chained_goals() {
        assert_eq!(parse("Head to the table."), ["go_to(table)"]);
        assert_eq!(
            parse("Go to the bottom side of the chair and finish your move at the picture."),
            ["go_bottom_of(chair)", "go_to(picture)"]
        );
        assert_eq!(parse("go between the shelving and refrigerator"), ["go_between(shelving, refrigerator)"]);
        assert_eq!(parse("Make your way to the microwave, and stop at the TV monitor."), ["go_to(microwave)", "go_to(tv monitor)"]);
        assert_eq!(
            parse("First, go in front of the microwave, move to the top of the refrigerator, and end your trajectory at the picture."),
            ["go_to(microwave)", "go_top_of(refrigerator)", "go_to(picture)"]
        );
        assert_eq!(parse("Move to the left side of the sofa"), ["go_left_of(sofa)"]);
    }

    #[test]
    fn unparsable_inputs() {
        let p = ScriptedInstructionParser::default();
        assert!(matches!(p.parse("dance please"), Err(GroundingError::UnparsableInstruction(_))));
        assert!(matches!(p.parse(""), Err(GroundingError::UnparsableInstruction(_))));
        assert!(matches!(p.parse("go between the chair"), Err(GroundingError::UnparsableInstruction(_))));
    }

    fn remote() -> RemoteInstructionParser {
        let config = LlmConfig {
            base_url: "http://127.0.0.1:9".into(),
            model: "m".into(),
            api_key: None,
            timeout: Duration::from_millis(200),
            retries: 0,
        };
        RemoteInstructionParser::new(
            ChatClient::new(config),
            PromptTemplates::default(),
            SCENE_OBJECTS.iter().map(|s| s.to_string()).collect(),
        )
    }

    #[test]
    fn remote_reply_validation() {
        let r = remote();
        let p = r
            .parse_reply(r#"Sure: [{"api":"go_bottom_of","objects":["Chair"]},{"api":"go_to","objects":["picture"]}]"#, "x")
            .unwrap();
        assert_eq!(p.calls, vec![GoalCall::new(GoBottomOf, &["chair"]), GoalCall::new(GoTo, &["picture"])]);
        for bad in [
            r#"[{"api":"go_under","objects":["chair"]}]"#,
            r#"[{"api":"go_between","objects":["chair"]}]"#,
            r#"[{"api":"go_to","objects":["unicorn"]}]"#,
            "[]",
            "no json",
        ] {
            assert!(matches!(r.parse_reply(bad, "x"), Err(GroundingError::InvalidProgram(_))), "{bad}");
        }
    }

    #[test]
    fn remote_offline_is_unavailable() {
        assert!(matches!(remote().parse("Head to the table."), Err(GroundingError::BackendUnavailable(_))));
    }
}
