//! Chain-of-thought grammar: the four agent strategy templates and their
//! inverse.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::domain::{DomainError, Intent, IntentCatalog, Membership, Thought};

pub const CHIT_CHAT_TEMPLATE: &str =
    "The user did not implicitly mention any potential intent; I should continue the chit-chat.";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ThoughtError {
    #[error("cannot format an unrecognized thought")]
    Unrecognized,
}

// Intent capture stops at ';', '.', or end of line.
const INTENT: &str = r"([^;.\n]+?)";

static CHIT_CHAT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?im)the user did not implicitly mention any potential intent\s*[;,]?\s*i should continue (?:the )?chit[- ]?chat",
    )
    .unwrap()
});

static PIVOT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?im)the user implicitly mentioned the intent of {INTENT}\s*[;,]\s*i should smoothly pivot the conversation to the topic of {INTENT}\s*(?:[.;!]|$)"
    ))
    .unwrap()
});

static CONTINUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?im)the user did not change the topic of {INTENT}\s*[;,]\s*i should continue the topic"
    ))
    .unwrap()
});

static EXPLICIT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"(?im)the user has explicitly shown (?:his\s*/\s*her|his or her|her or his|his|her|their)\s+intent of {INTENT}\s*(?:[.;!]|$)"
    ))
    .unwrap()
});

static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?\n]+").unwrap());

/// Parses a raw thought. The terminal sentence is tried first, then the
/// whole text; the latest-ending template match wins in the fallback.
/// Never fails: text matching no template becomes `Unrecognized`.
pub fn parse_thought(raw: &str, catalog: &IntentCatalog) -> Thought {
    let normalized = normalize(raw);
    if let Some(last) = last_sentence(&normalized) {
        if let Some(t) = match_template(last, catalog, true) {
            return t;
        }
    }
    match_template(&normalized, catalog, false).unwrap_or_else(|| Thought::Unrecognized {
        raw: raw.to_string(),
    })
}

/// Emits the canonical template text for a recognized thought.
pub fn format_thought(thought: &Thought) -> Result<String, ThoughtError> {
    Ok(match thought {
        Thought::ChitChat => CHIT_CHAT_TEMPLATE.to_string(),
        Thought::Pivot { intent } => format!(
            "The user implicitly mentioned the intent of {intent}; I should smoothly pivot the conversation to the topic of {intent}."
        ),
        Thought::ContinueTopic { intent } => {
            format!("The user did not change the topic of {intent}; I should continue the topic.")
        }
        Thought::ExplicitIntent { intent } => {
            format!("The user has explicitly shown his/her intent of {intent}.")
        }
        Thought::Unrecognized { .. } => return Err(ThoughtError::Unrecognized),
    })
}

/// Alias-resolves a raw intent name. Unknown names pass through trimmed and
/// flagged out-of-catalog.
pub fn canonicalize_intent(
    raw: &str,
    catalog: &IntentCatalog,
) -> Result<(Intent, Membership), DomainError> {
    catalog.canonicalize(strip_decoration(raw))
}

fn normalize(raw: &str) -> String {
    // Collapse runs of spaces and tabs but keep line breaks, which delimit
    // sentences and intent captures.
    raw.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn last_sentence(text: &str) -> Option<&str> {
    SENTENCE_END
        .split(text)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .last()
}

fn strip_decoration(raw: &str) -> &str {
    raw.trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '<' | '>' | '*' | '[' | ']'))
        .trim()
}

fn match_template(text: &str, catalog: &IntentCatalog, whole: bool) -> Option<Thought> {
    let anchored = |m: regex::Match<'_>| !whole || (m.start() == 0 && is_tail(&text[m.end()..]));
    let intent_of = |caps: &regex::Captures<'_>| {
        canonicalize_intent(caps.get(1)?.as_str(), catalog)
            .ok()
            .map(|(i, _)| i)
    };

    let mut best: Option<(usize, Thought)> = None;
    let mut consider = |end: usize, t: Thought| {
        if best.as_ref().is_none_or(|(e, _)| end > *e) {
            best = Some((end, t));
        }
    };

    for m in CHIT_CHAT.find_iter(text).filter(|m| anchored(*m)) {
        consider(m.end(), Thought::ChitChat);
    }
    for (re, make) in [
        (&*PIVOT, pivot as fn(Intent) -> Thought),
        (&*CONTINUE, continue_topic),
        (&*EXPLICIT, explicit),
    ] {
        for caps in re.captures_iter(text) {
            let m = caps.get(0).unwrap();
            if !anchored(m) {
                continue;
            }
            if let Some(intent) = intent_of(&caps) {
                consider(m.end(), make(intent));
            }
        }
    }
    best.map(|(_, t)| t)
}

fn pivot(intent: Intent) -> Thought {
    Thought::Pivot { intent }
}

fn continue_topic(intent: Intent) -> Thought {
    Thought::ContinueTopic { intent }
}

fn explicit(intent: Intent) -> Thought {
    Thought::ExplicitIntent { intent }
}

/// Only trailing punctuation may follow an anchored match.
fn is_tail(rest: &str) -> bool {
    rest.chars().all(|c| c.is_whitespace() || c.is_ascii_punctuation())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cat() -> IntentCatalog {
        IntentCatalog::default()
    }

    fn intent(s: &str) -> Intent {
        Intent::new(s)
    }

    #[test]
    fn parses_verbatim_templates() {
        assert_eq!(
            parse_thought(
                "The user did not implicitly mention any potential intent; I should continue the chit-chat.",
                &cat()
            ),
            Thought::ChitChat
        );
        assert_eq!(
            parse_thought("The user has explicitly shown his/her intent of SearchHotel.", &cat()),
            Thought::ExplicitIntent { intent: intent("SearchHotel") }
        );
        assert_eq!(
            parse_thought(
                "The user implicitly mentioned the intent of FindRestaurant; I should smoothly pivot the conversation to the topic of FindRestaurant.",
                &cat()
            ),
            Thought::Pivot { intent: intent("FindRestaurants") }
        );
        assert_eq!(
            parse_thought("The user did not change the topic of FindEvents; I should continue the topic.", &cat()),
            Thought::ContinueTopic { intent: intent("FindEvents") }
        );
    }

    #[test]
    fn free_text_is_unrecognized() {
        let raw = "Let me think about the weather.";
        assert_eq!(
            parse_thought(raw, &cat()),
            Thought::Unrecognized { raw: raw.to_string() }
        );
        assert!(!parse_thought("", &cat()).is_recognized());
    }

    #[test]
    fn formats_templates() {
        assert_eq!(
            format_thought(&Thought::ContinueTopic { intent: intent("FindEvents") }).unwrap(),
            "The user did not change the topic of FindEvents; I should continue the topic."
        );
        assert_eq!(format_thought(&Thought::ChitChat).unwrap(), CHIT_CHAT_TEMPLATE);
        assert_eq!(
            format_thought(&Thought::Unrecognized { raw: "x".into() }),
            Err(ThoughtError::Unrecognized)
        );
    }

    #[test]
    fn pronoun_variants() {
        for p in ["his/her", "his or her", "his", "her", "his / her"] {
            let raw = format!("The user has explicitly shown {p} intent of FindEvents.");
            assert_eq!(
                parse_thought(&raw, &cat()),
                Thought::ExplicitIntent { intent: intent("FindEvents") },
                "{p}"
            );
        }
    }

    #[test]
    fn last_sentence_wins() {
        let raw = "The user did not change the topic of FindEvents; I should continue the topic. \
                   Actually the user has explicitly shown his/her intent of FindEvents.";
        // last sentence contains extra words before the template, so the
        // whole-text scan picks the latest-ending match
        assert_eq!(
            parse_thought(raw, &cat()),
            Thought::ExplicitIntent { intent: intent("FindEvents") }
        );
        let raw = "Hmm, tricky.\nThe user implicitly mentioned the intent of SearchHotel; I should smoothly pivot the conversation to the topic of SearchHotel";
        assert_eq!(
            parse_thought(raw, &cat()),
            Thought::Pivot { intent: intent("SearchHotel") }
        );
    }

    #[test]
    fn verbose_prefix_and_decorated_intent() {
        let raw = "Thinking it over: the user has explicitly shown his/her intent of `FindRestaurant`!";
        assert_eq!(
            parse_thought(raw, &cat()),
            Thought::ExplicitIntent { intent: intent("FindRestaurants") }
        );
    }

    #[test]
    fn out_of_catalog_intent_passes_through() {
        assert_eq!(
            parse_thought("The user has explicitly shown his/her intent of BookFlight.", &cat()),
            Thought::ExplicitIntent { intent: intent("BookFlight") }
        );
        assert_eq!(
            canonicalize_intent("BookFlight", &cat()).unwrap().1,
            Membership::OutOfCatalog
        );
        assert!(canonicalize_intent("  ", &cat()).is_err());
    }

    fn any_spelling() -> impl Strategy<Value = &'static str> {
        prop::sample::select(vec![
            "FindRestaurants",
            "FindRestaurant",
            "FindAttraction",
            "SearchHotel",
            "FindEvents",
            "FindEvent",
        ])
    }

    fn any_thought() -> impl Strategy<Value = Thought> {
        (0..4usize, any_spelling()).prop_map(|(k, s)| {
            let i = cat().canonicalize(s).unwrap().0;
            match k {
                0 => Thought::ChitChat,
                1 => Thought::Pivot { intent: i },
                2 => Thought::ContinueTopic { intent: i },
                _ => Thought::ExplicitIntent { intent: i },
            }
        })
    }

    proptest! {
        #[test]
        fn round_trip(t in any_thought()) {
            let text = format_thought(&t).unwrap();
            prop_assert_eq!(parse_thought(&text, &cat()), t);
        }

        #[test]
        fn case_and_trailing_punctuation_do_not_matter(t in any_thought(), upper in any::<bool>(), extra in "[.!]{0,2}") {
            let mut text = format_thought(&t).unwrap();
            text.push_str(&extra);
            if upper { text = text.to_uppercase() } else { text = text.to_lowercase() }
            prop_assert_eq!(parse_thought(&text, &cat()), t);
        }

        #[test]
        fn canonicalize_is_idempotent(raw in "[A-Za-z ]{1,20}") {
            prop_assume!(!raw.trim().is_empty());
            let once = canonicalize_intent(&raw, &cat()).unwrap().0;
            let twice = canonicalize_intent(once.as_str(), &cat()).unwrap().0;
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn parse_is_total(raw in ".{0,200}") {
            let t = parse_thought(&raw, &cat());
            if let Thought::Unrecognized { raw: r } = t {
                prop_assert_eq!(r, raw);
            }
        }
    }
}
