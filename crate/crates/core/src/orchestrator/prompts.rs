//! Prompt construction for the three conversation roles, and parsing of
//! their raw outputs.

use std::sync::LazyLock;

use regex::Regex;
use serde_json::Value;

use crate::backend::ChatMessage;
use crate::domain::{IntentCatalog, Persona, StrategyCard, Turn};
use crate::persona::extract_json_object;

/// Stimulus the user model answers on the first turn.
pub const CONVERSATION_START: &str = "<conversation start>";

pub const USER_INSTRUCTION: &str = "Imagine you are a real person. You are having chat with a online agent, so the repsonse do not include any expresssions. Remember, maintain a natural tone. Your response should be only your text response without any other expressions and emojis. Keep it as short as possible. Again, NO EMOJIS";

const RESPONDER_PROMPT: &str = r#"# Dialogue History:
{history}

# Internal Reflection:
Based on the above dialogue, your current reasoning is:
{thought}

If the current thought indicates the user has implicitly expressed interest in a specific topic, continue the conversation by following that topic naturally.
If the user has not shown a clear interest or has declined previous suggestions, pivot to guide the next part of the conversation.
Try to avoid repetition with the previous dialogue, and keep your response short, matching the user's length.
Now, continue the conversation with an appropriate response.

Output Format:
{
    "response": <response>
}"#;

const RESPONDER_STRATEGY_PROMPT: &str = r#"# Dialogue History:
{history}

# Strategy
According to statistics about the user, there is a high propability that the user is interested in these: {intents}
Rationale: {rationale}

# Internal Reflection:
Based on the above dialogue, your current reasoning is:
{thought}

If the current thought indicates the user has implicitly expressed interest in a specific topic, continue the conversation by following that topic naturally.
If the user has not shown a clear interest or has declined previous suggestions, pivot by using the strategy that best fits their likely occupation or background to guide the next part of the conversation.
Try to avoid repetition with the previous dialogue, and keep your response short, matching the user's length.
Now, continue the conversation with an appropriate response.

Output Format:
{
    "response": <response>
}"#;

/// Messages for the user simulator. Roles are mirrored: the agent's
/// replies are the simulator's inputs and its own utterances are its
/// assistant turns.
pub fn build_user_messages(persona: &Persona, history: &[Turn]) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(2 + history.len() * 2);
    messages.push(ChatMessage::system(format!("{}\n\n{}", persona.text.trim(), USER_INSTRUCTION)));
    messages.push(ChatMessage::user(CONVERSATION_START));
    for turn in history {
        messages.push(ChatMessage::assistant(&turn.user_utterance));
        messages.push(ChatMessage::user(&turn.agent_response));
    }
    messages
}

/// System prompt for the thought planner. The four templates are listed
/// with their canonical wording; `with_response` asks for the labelled
/// "Thought:/Response:" framing used by the single-model pipeline.
pub fn planner_system_prompt(catalog: &IntentCatalog, with_response: bool) -> String {
    let intents = catalog
        .intents()
        .iter()
        .map(|i| i.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    let mut prompt = format!(
        "You are a friendly sales agent chatting with a user. Keep the chit-chat natural and look for a chance to lead the conversation to one of these topics: {intents}.\n\
         Before every reply, reason about the user with exactly one of these thoughts, replacing <intent> with a topic name:\n\
         - The user did not implicitly mention any potential intent; I should continue the chit-chat.\n\
         - The user implicitly mentioned the intent of <intent>; I should smoothly pivot the conversation to the topic of <intent>.\n\
         - The user did not change the topic of <intent>; I should continue the topic.\n\
         - The user has explicitly shown his/her intent of <intent>.\n"
    );
    if with_response {
        prompt.push_str(
            "Answer in exactly this format:\nThought: <one of the thoughts above>\nResponse: <your short reply to the user>",
        );
    } else {
        prompt.push_str("Answer with the thought only.");
    }
    prompt
}

/// Planner messages: system prompt, then the dialogue so far with the
/// current user utterance last.
pub fn build_planner_messages(
    catalog: &IntentCatalog,
    history: &[Turn],
    user_utterance: &str,
    with_response: bool,
) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(2 + history.len() * 2);
    messages.push(ChatMessage::system(planner_system_prompt(catalog, with_response)));
    for turn in history {
        messages.push(ChatMessage::user(&turn.user_utterance));
        messages.push(ChatMessage::assistant(format!(
            "Thought: {}\nResponse: {}",
            turn.agent_thought_raw, turn.agent_response
        )));
    }
    messages.push(ChatMessage::user(user_utterance));
    messages
}

/// Chronological "User:"/"Agent:" lines.
pub fn render_history(history: &[Turn], pending_user: Option<&str>) -> String {
    let mut lines = Vec::with_capacity(history.len() * 2 + 1);
    for turn in history {
        lines.push(format!("User: {}", turn.user_utterance));
        lines.push(format!("Agent: {}", turn.agent_response));
    }
    if let Some(u) = pending_user {
        lines.push(format!("User: {u}"));
    }
    lines.join("\n")
}

/// Responder prompt, with or without an occupation strategy section.
pub fn build_responder_prompt(history: &str, thought_raw: &str, strategy: Option<&StrategyCard>) -> String {
    // {history} and {thought} are substituted last so that user text that
    // happens to contain a placeholder is left untouched.
    let template = match strategy {
        Some(card) => RESPONDER_STRATEGY_PROMPT
            .replace("{intents}", &card.intents_joined())
            .replace("{rationale}", &card.rationale),
        None => RESPONDER_PROMPT.to_string(),
    };
    let (head, tail) = template.split_once("{thought}").expect("template has thought slot");
    let (before, after) = head.split_once("{history}").expect("template has history slot");
    format!("{before}{history}{after}{thought_raw}{tail}")
}

static THOUGHT_LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bthought\s*:").unwrap());
static RESPONSE_LABEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bresponse\s*:").unwrap());

/// Splits single-model output framed as "Thought: ...\nResponse: ...".
/// Without a response label the whole text is the response and the thought
/// is empty.
pub fn split_monolithic(output: &str) -> (String, String) {
    match RESPONSE_LABEL.find(output) {
        Some(m) => {
            let before = &output[..m.start()];
            let thought = match THOUGHT_LABEL.find(before) {
                Some(t) => &before[t.end()..],
                None => before,
            };
            (thought.trim().to_string(), output[m.end()..].trim().to_string())
        }
        None => (String::new(), output.trim().to_string()),
    }
}

/// Thought text from planner-only output; tolerates a planner that still
/// emits the labelled framing.
pub fn planner_thought(output: &str) -> String {
    if THOUGHT_LABEL.is_match(output) || RESPONSE_LABEL.is_match(output) {
        let (thought, _) = split_monolithic(output);
        if !thought.is_empty() {
            return thought;
        }
    }
    output.trim().to_string()
}

/// Responder reply: the "response" field of a JSON object when present,
/// otherwise the trimmed text.
pub fn responder_reply(output: &str) -> String {
    if let Ok(Value::Object(map)) = extract_json_object(output) {
        if let Some(Value::String(s)) = map.get("response") {
            return s.trim().to_string();
        }
    }
    let (_, after_label) = split_monolithic(output);
    after_label
}

/// True when the reply is "bye" or ends with the standalone token "bye".
pub fn detect_bye(response: &str) -> bool {
    let cleaned: String = response
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned.split_whitespace().last() == Some("bye")
}
