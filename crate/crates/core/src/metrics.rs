//! Conversation metrics: success rate, turns to success, intent
//! distributions and the guided continuation ratio.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Condition, Intent, Outcome, Thought, Transcript};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no transcripts")]
    Empty,
}

pub type IntentCounts = BTreeMap<Intent, u64>;

/// How per-transcript pivot ratios are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioAveraging {
    /// Total continued pivots over total pivots.
    #[default]
    Pooled,
    /// Mean of per-transcript ratios, skipping transcripts without pivots.
    PerConversation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricOptions {
    /// When set, chit-chat and unrecognized thoughts end an intent run.
    #[serde(default)]
    pub chit_chat_breaks_runs: bool,
    #[serde(default)]
    pub ratio_averaging: RatioAveraging,
}

pub fn success_rate(transcripts: &[Transcript]) -> Result<f64, MetricsError> {
    if transcripts.is_empty() {
        return Err(MetricsError::Empty);
    }
    let wins = transcripts.iter().filter(|t| t.success).count();
    Ok(wins as f64 / transcripts.len() as f64)
}

pub fn avg_turns_successful(transcripts: &[Transcript]) -> Option<f64> {
    let turns: Vec<usize> = transcripts.iter().filter(|t| t.success).map(|t| t.turn_count()).collect();
    (!turns.is_empty()).then(|| turns.iter().sum::<usize>() as f64 / turns.len() as f64)
}

/// Intent runs of one thought sequence, each run counted once.
pub fn intent_runs<'a, I>(thoughts: I, chit_chat_breaks_runs: bool) -> Vec<&'a Intent>
where
    I: IntoIterator<Item = &'a Thought>,
{
    let mut runs: Vec<&Intent> = Vec::new();
    let mut open = false;
    for thought in thoughts {
        match thought.intent() {
            Some(intent) => {
                if !(open && runs.last() == Some(&intent)) {
                    runs.push(intent);
                }
                open = true;
            }
            None => {
                if chit_chat_breaks_runs {
                    open = false;
                }
            }
        }
    }
    runs
}

pub fn intent_distribution_with(transcripts: &[Transcript], chit_chat_breaks_runs: bool) -> IntentCounts {
    let mut counts = IntentCounts::new();
    for t in transcripts {
        for intent in intent_runs(t.thoughts(), chit_chat_breaks_runs) {
            *counts.entry(intent.clone()).or_default() += 1;
        }
    }
    counts
}

pub fn intent_distribution(transcripts: &[Transcript]) -> IntentCounts {
    intent_distribution_with(transcripts, false)
}

pub fn success_intent_distribution(transcripts: &[Transcript]) -> IntentCounts {
    let mut counts = IntentCounts::new();
    for t in transcripts.iter().filter(|t| t.success) {
        if let Outcome::ExplicitIntent { intent } = &t.outcome {
            *counts.entry(intent.clone()).or_default() += 1;
        }
    }
    counts
}

/// Pivot events in one transcript: (qualifying pivots, followed by any
/// continue, followed by a continue on the same intent).
pub fn pivot_events(t: &Transcript) -> (u64, u64, u64) {
    let thoughts: Vec<&Thought> = t.thoughts().collect();
    let mut events = (0, 0, 0);
    for pair in thoughts.windows(2) {
        if let Thought::Pivot { intent } = pair[0] {
            events.0 += 1;
            if let Thought::ContinueTopic { intent: next } = pair[1] {
                events.1 += 1;
                if next == intent {
                    events.2 += 1;
                }
            }
        }
    }
    events
}

pub fn guided_continuation_ratio(transcripts: &[Transcript]) -> Option<f64> {
    Accumulator::from_transcripts(transcripts, MetricOptions::default()).guided_ratio(RatioAveraging::Pooled)
}

/// Additive sufficient statistics for every metric; merge is plain
/// addition, so partitions can be reduced in any order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub conversations: u64,
    pub successes: u64,
    pub successful_turns: u64,
    pub intent_distribution: IntentCounts,
    pub success_intent_distribution: IntentCounts,
    pub pivot_events: u64,
    pub pivot_continued: u64,
    pub pivot_continued_same_intent: u64,
    /// Per-conversation ratio sum and the number of conversations with pivots.
    pub ratio_sum: f64,
    pub ratio_conversations: u64,
}

impl Accumulator {
    pub fn add(&mut self, t: &Transcript, opts: MetricOptions) {
        self.conversations += 1;
        if t.success {
            self.successes += 1;
            self.successful_turns += t.turn_count() as u64;
            if let Outcome::ExplicitIntent { intent } = &t.outcome {
                *self.success_intent_distribution.entry(intent.clone()).or_default() += 1;
            }
        }
        for intent in intent_runs(t.thoughts(), opts.chit_chat_breaks_runs) {
            *self.intent_distribution.entry(intent.clone()).or_default() += 1;
        }
        let (pivots, continued, same) = pivot_events(t);
        self.pivot_events += pivots;
        self.pivot_continued += continued;
        self.pivot_continued_same_intent += same;
        if pivots > 0 {
            self.ratio_sum += continued as f64 / pivots as f64;
            self.ratio_conversations += 1;
        }
    }

    pub fn from_transcripts(transcripts: &[Transcript], opts: MetricOptions) -> Accumulator {
        let mut acc = Accumulator::default();
        for t in transcripts {
            acc.add(t, opts);
        }
        acc
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.conversations += other.conversations;
        self.successes += other.successes;
        self.successful_turns += other.successful_turns;
        for (k, v) in &other.intent_distribution {
            *self.intent_distribution.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.success_intent_distribution {
            *self.success_intent_distribution.entry(k.clone()).or_default() += v;
        }
        self.pivot_events += other.pivot_events;
        self.pivot_continued += other.pivot_continued;
        self.pivot_continued_same_intent += other.pivot_continued_same_intent;
        self.ratio_sum += other.ratio_sum;
        self.ratio_conversations += other.ratio_conversations;
    }

    pub fn guided_ratio(&self, averaging: RatioAveraging) -> Option<f64> {
        match averaging {
            RatioAveraging::Pooled => ratio(self.pivot_continued, self.pivot_events),
            RatioAveraging::PerConversation => {
                (self.ratio_conversations > 0).then(|| self.ratio_sum / self.ratio_conversations as f64)
            }
        }
    }

    pub fn report(&self, condition: impl Into<String>, opts: MetricOptions) -> Result<MetricsReport, MetricsError> {
        if self.conversations == 0 {
            return Err(MetricsError::Empty);
        }
        Ok(MetricsReport {
            condition: condition.into(),
            n_conversations: self.conversations,
            n_successes: self.successes,
            success_rate: self.successes as f64 / self.conversations as f64,
            avg_turns_successful: ratio(self.successful_turns, self.successes),
            intent_distribution: self.intent_distribution.clone(),
            success_intent_distribution: self.success_intent_distribution.clone(),
            guided_continuation_ratio: self.guided_ratio(opts.ratio_averaging),
            same_intent_continuation_ratio: ratio(self.pivot_continued_same_intent, self.pivot_events),
            pivot_events: self.pivot_events,
            options: opts,
        })
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Aggregated metrics for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub condition: String,
    pub n_conversations: u64,
    pub n_successes: u64,
    pub success_rate: f64,
    pub avg_turns_successful: Option<f64>,
    pub intent_distribution: IntentCounts,
    pub success_intent_distribution: IntentCounts,
    pub guided_continuation_ratio: Option<f64>,
    /// Diagnostic: pivots followed by a continue on the same intent.
    pub same_intent_continuation_ratio: Option<f64>,
    pub pivot_events: u64,
    #[serde(default)]
    pub options: MetricOptions,
}

impl MetricsReport {
    pub fn compute(condition: impl Into<String>, transcripts: &[Transcript], opts: MetricOptions) -> Result<MetricsReport, MetricsError> {
        Accumulator::from_transcripts(transcripts, opts).report(condition, opts)
    }
}

/// One report per condition, in condition order.
pub fn reports_by_condition(transcripts: &[Transcript], opts: MetricOptions) -> Vec<(Condition, MetricsReport)> {
    let mut groups: BTreeMap<Condition, Accumulator> = BTreeMap::new();
    for t in transcripts {
        groups.entry(t.condition).or_default().add(t, opts);
    }
    groups
        .into_iter()
        .map(|(c, acc)| {
            let report = acc.report(c.label(), opts).expect("group is non-empty");
            (c, report)
        })
        .collect()
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::domain::{FixedValue, OccupationSector, RoleModels, Turn};
    use proptest::prelude::*;

    fn thought() -> impl Strategy<Value = Thought> {
        let intent = prop::sample::select(vec!["A", "B", "C"]).prop_map(Intent::new);
        prop_oneof![
            Just(Thought::ChitChat),
            Just(Thought::Unrecognized { raw: "?".into() }),
            intent.clone().prop_map(|intent| Thought::Pivot { intent }),
            intent.prop_map(|intent| Thought::ContinueTopic { intent }),
        ]
    }

    fn build(mut thoughts: Vec<Thought>, end: Option<&str>) -> Transcript {
        let outcome = match end {
            Some(n) => {
                thoughts.push(Thought::ExplicitIntent { intent: Intent::new(n) });
                Outcome::ExplicitIntent { intent: Intent::new(n) }
            }
            None => Outcome::MaxTurns,
        };
        Transcript {
            id: "t".into(),
            persona_id: "p".into(),
            condition: Condition(FixedValue::Occupation(OccupationSector::Agr)),
            conversation_index: 0,
            strategy: None,
            turns: thoughts
                .into_iter()
                .enumerate()
                .map(|(k, t)| Turn {
                    index: k as u32 + 1,
                    user_utterance: String::new(),
                    agent_thought_raw: String::new(),
                    agent_thought: t,
                    agent_response: String::new(),
                })
                .collect(),
            success: outcome.is_success(),
            outcome,
            seed: 0,
            max_turns: 20,
            models: RoleModels { user: "u".into(), planner: "p".into(), responder: None },
            started_at: None,
            finished_at: None,
            extra: Default::default(),
        }
    }

    fn transcript() -> impl Strategy<Value = Transcript> {
        (
            prop::collection::vec(thought(), 0..19),
            prop::option::of(prop::sample::select(vec!["A", "B", "C"])),
        )
            .prop_filter_map("needs a turn", |(th, end)| {
                (!th.is_empty() || end.is_some()).then(|| build(th, end))
            })
    }

    proptest! {
        #[test]
        fn fractions_and_conservation(ts in prop::collection::vec(transcript(), 1..30)) {
            let r = MetricsReport::compute("x", &ts, MetricOptions::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.success_rate));
            if let Some(g) = r.guided_continuation_ratio {
                prop_assert!((0.0..=1.0).contains(&g));
            }
            let successes = ts.iter().filter(|t| t.success).count() as u64;
            prop_assert_eq!(r.success_intent_distribution.values().sum::<u64>(), successes);
            for (intent, n) in &r.success_intent_distribution {
                prop_assert!(*n <= r.intent_distribution.get(intent).copied().unwrap_or(0));
            }
        }

        #[test]
        fn duplicating_intent_thoughts_in_place_keeps_distribution(t in transcript(), at in any::<prop::sample::Index>()) {
            let thoughts: Vec<Thought> = t.thoughts().cloned().collect();
            let k = at.index(thoughts.len());
            prop_assume!(thoughts[k].intent().is_some());
            let mut dup = t.clone();
            let mut copy = dup.turns[k].clone();
            copy.index += 1;
            dup.turns.insert(k + 1, copy);
            prop_assert_eq!(intent_distribution(&[t]), intent_distribution(&[dup]));
        }

        #[test]
        fn permutation_and_merge(mut ts in prop::collection::vec(transcript(), 1..20), split in any::<prop::sample::Index>()) {
            let opts = MetricOptions::default();
            let whole = MetricsReport::compute("x", &ts, opts).unwrap();
            let k = split.index(ts.len());
            let mut left = Accumulator::from_transcripts(&ts[..k], opts);
            left.merge(&Accumulator::from_transcripts(&ts[k..], opts));
            prop_assert_eq!(&left.report("x", opts).unwrap(), &whole);
            ts.reverse();
            let reversed = MetricsReport::compute("x", &ts, opts).unwrap();
            prop_assert_eq!(reversed.intent_distribution, whole.intent_distribution);
            prop_assert_eq!(reversed.success_rate, whole.success_rate);
            prop_assert_eq!(reversed.guided_continuation_ratio, whole.guided_continuation_ratio);
            prop_assert_eq!(reversed.avg_turns_successful, whole.avg_turns_successful);
        }
    }
}
