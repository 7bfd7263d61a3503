//! Turn-based conversations between the user simulator, the thought planner
//! and (optionally) a separate responder.

mod config;
pub mod prompts;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::{info, warn};

pub use config::{ConfigError, PipelineMode, RoleConfig, RoleConfigs, RunConfig};

use crate::backend::{BackendError, BackendFactory, ChatBackend, ChatMessage, ChatParams};
use crate::domain::{
    IntentCatalog, OccupationSector, Outcome, Persona, RoleModels, StrategyCard, Thought,
    Transcript, Turn,
};
use crate::thought::parse_thought;
use prompts::{
    build_planner_messages, build_responder_prompt, build_user_messages, detect_bye,
    planner_thought, render_history, responder_reply, split_monolithic,
};

pub const DEFAULT_CONVERSATIONS_PER_PERSONA: u32 = 15;
pub const DEFAULT_MAX_TURNS: u32 = 20;
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("strict replay miss in {persona_id} conversation {conversation_index}: key {key}")]
    ReplayMiss {
        persona_id: String,
        conversation_index: u32,
        key: String,
    },
    #[error("transcript sink failed: {0}")]
    Sink(String),
}

/// A conversation cut short by a backend failure. Kept out of metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortedConversation {
    pub persona_id: String,
    pub conversation_index: u32,
    pub turns_completed: u32,
    pub error: String,
    #[serde(skip)]
    pub cause: Option<BackendError>,
}

/// Mutable per-conversation bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConversationState {
    pub history: Vec<Turn>,
    pub last_thought: Option<Thought>,
    pub pivot_pending: bool,
}

impl ConversationState {
    pub fn push(&mut self, turn: Turn) {
        self.pivot_pending = turn.agent_thought.is_pivot();
        self.last_thought = Some(turn.agent_thought.clone());
        self.history.push(turn);
    }
}

/// Termination check. Precedence: explicit intent, then "bye", then the
/// turn cap.
pub fn check_termination(state: &ConversationState, max_turns: u32) -> Option<Outcome> {
    let last = state.history.last()?;
    if let Some(Thought::ExplicitIntent { intent }) = &state.last_thought {
        return Some(Outcome::ExplicitIntent { intent: intent.clone() });
    }
    if detect_bye(&last.agent_response) {
        return Some(Outcome::AgentBye);
    }
    if state.history.len() >= max_turns as usize {
        return Some(Outcome::MaxTurns);
    }
    None
}

/// Re-derives a transcript's outcome from its turns: no prefix may
/// terminate early, and the full sequence must yield the recorded outcome.
pub fn audit_transcript(t: &Transcript) -> bool {
    let mut state = ConversationState::default();
    for (i, turn) in t.turns.iter().enumerate() {
        state.push(turn.clone());
        let verdict = check_termination(&state, t.max_turns);
        if i + 1 < t.turns.len() {
            if verdict.is_some() {
                return false;
            }
        } else {
            return verdict.as_ref() == Some(&t.outcome) && t.is_consistent();
        }
    }
    false
}

/// Live backends for each role.
#[derive(Clone)]
pub struct RoleBackends {
    pub user: Arc<dyn ChatBackend>,
    pub planner: Arc<dyn ChatBackend>,
    pub responder: Option<Arc<dyn ChatBackend>>,
}

/// Resolved simulation settings (everything but the backends).
#[derive(Debug, Clone)]
pub struct SimSettings {
    pub conversations_per_persona: u32,
    pub max_turns: u32,
    pub pipeline: PipelineMode,
    pub catalog: IntentCatalog,
    pub strategies: Vec<StrategyCard>,
    pub seed: u64,
    pub parallelism: usize,
    pub user_params: ChatParams,
    pub planner_params: ChatParams,
    pub responder_params: Option<ChatParams>,
    pub record_timestamps: bool,
}

impl SimSettings {
    /// Default settings with placeholder model names; the responder params
    /// are used only in planner/responder mode.
    pub fn new(pipeline: PipelineMode) -> SimSettings {
        SimSettings {
            conversations_per_persona: DEFAULT_CONVERSATIONS_PER_PERSONA,
            max_turns: DEFAULT_MAX_TURNS,
            pipeline,
            catalog: IntentCatalog::default(),
            strategies: StrategyCard::defaults(),
            seed: 0,
            parallelism: DEFAULT_PARALLELISM,
            user_params: ChatParams::new("user"),
            planner_params: ChatParams::new("planner").with_temperature(0.0),
            responder_params: Some(ChatParams::new("responder")),
            record_timestamps: false,
        }
    }
}

/// Card for a sector, if configured.
pub fn strategy_for(cards: &[StrategyCard], sector: OccupationSector) -> Result<&StrategyCard, ConfigError> {
    cards
        .iter()
        .find(|c| c.sector == sector)
        .ok_or(ConfigError::MissingStrategy(sector))
}

pub struct BatchResult {
    pub transcripts: Vec<Transcript>,
    pub aborted: Vec<AbortedConversation>,
}

impl BatchResult {
    pub fn abort_fraction(&self) -> f64 {
        let total = self.transcripts.len() + self.aborted.len();
        if total == 0 {
            0.0
        } else {
            self.aborted.len() as f64 / total as f64
        }
    }
}

/// Deterministic per-conversation seed.
pub fn conversation_seed(base: u64, persona_id: &str, index: u32) -> u64 {
    let digest = Sha256::digest(format!("{base}:{persona_id}:{index}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub struct Simulator {
    settings: SimSettings,
    roles: RoleBackends,
}

impl Simulator {
    pub fn new(settings: SimSettings, roles: RoleBackends) -> Result<Simulator, ConfigError> {
        if settings.max_turns < 1 {
            return Err(ConfigError::Invalid("max_turns must be >= 1".into()));
        }
        if settings.conversations_per_persona < 1 {
            return Err(ConfigError::Invalid("conversations_per_persona must be >= 1".into()));
        }
        if matches!(settings.pipeline, PipelineMode::PlannerResponder { .. })
            && (roles.responder.is_none() || settings.responder_params.is_none())
        {
            return Err(ConfigError::Invalid(
                "planner_responder pipeline requires a responder role".into(),
            ));
        }
        Ok(Simulator { settings, roles })
    }

    /// Builds backends for every role named in the config.
    pub fn from_config(config: &RunConfig, factory: &mut BackendFactory) -> Result<Simulator, ConfigError> {
        config.validate()?;
        let build = |spec, factory: &mut BackendFactory| factory.build(spec).map_err(ConfigError::Backend);
        let user = build(&config.roles.user.backend, factory)?;
        let planner = build(&config.roles.planner.backend, factory)?;
        let responder = match (&config.pipeline, &config.roles.responder) {
            (PipelineMode::PlannerResponder { .. }, Some(r)) => Some(build(&r.backend, factory)?),
            _ => None,
        };
        let settings = SimSettings {
            conversations_per_persona: config.conversations_per_persona,
            max_turns: config.max_turns,
            pipeline: config.pipeline,
            catalog: config.intents.clone(),
            strategies: config.strategies.clone(),
            seed: config.seed,
            parallelism: config.parallelism,
            user_params: config.roles.user.params(0.7),
            planner_params: config.roles.planner.params(0.7),
            responder_params: config.roles.responder.as_ref().map(|r| r.params(0.7)),
            record_timestamps: config.record_timestamps,
        };
        Simulator::new(settings, RoleBackends { user, planner, responder })
    }

    pub fn settings(&self) -> &SimSettings {
        &self.settings
    }

    fn strategy(&self, persona: &Persona) -> Result<Option<&StrategyCard>, ConfigError> {
        match self.settings.pipeline {
            PipelineMode::PlannerResponder { strategy_enabled: true } => {
                strategy_for(&self.settings.strategies, persona.spec.sector).map(Some)
            }
            _ => Ok(None),
        }
    }

    /// Queries the planner for the current turn. Returns the raw thought,
    /// its parse, and (single-model pipeline only) the response.
    pub async fn plan_thought(
        &self,
        history: &[Turn],
        user_utterance: &str,
        seed: u64,
    ) -> Result<(String, Thought, Option<String>), BackendError> {
        let monolithic = matches!(self.settings.pipeline, PipelineMode::Monolithic);
        let messages = build_planner_messages(&self.settings.catalog, history, user_utterance, monolithic);
        let params = self.settings.planner_params.clone().with_seed(seed);
        let output = self.roles.planner.chat(&messages, &params).await?;
        let (raw, response) = if monolithic {
            let (thought, response) = split_monolithic(&output);
            (thought, Some(response))
        } else {
            (planner_thought(&output), None)
        };
        let parsed = parse_thought(&raw, &self.settings.catalog);
        Ok((raw, parsed, response))
    }

    /// Runs one conversation to termination.
    pub async fn run_conversation(
        &self,
        persona: &Persona,
        conversation_index: u32,
        seed: u64,
    ) -> Result<Transcript, AbortedConversation> {
        let strategy = self.strategy(persona).map_err(|e| AbortedConversation {
            persona_id: persona.id.clone(),
            conversation_index,
            turns_completed: 0,
            error: e.to_string(),
            cause: None,
        })?;
        let started_at = self.settings.record_timestamps.then(now);
        let mut state = ConversationState::default();
        let abort = |state: &ConversationState, e: BackendError| AbortedConversation {
            persona_id: persona.id.clone(),
            conversation_index,
            turns_completed: state.history.len() as u32,
            error: e.to_string(),
            cause: Some(e),
        };

        let outcome = loop {
            let user_params = self.settings.user_params.clone().with_seed(seed);
            let user_messages = build_user_messages(persona, &state.history);
            let utterance = self
                .roles
                .user
                .chat(&user_messages, &user_params)
                .await
                .map_err(|e| abort(&state, e))?
                .trim()
                .to_string();

            let (thought_raw, thought, mono_response) = self
                .plan_thought(&state.history, &utterance, seed)
                .await
                .map_err(|e| abort(&state, e))?;

            let response = match mono_response {
                Some(r) => r,
                None => {
                    let responder = self.roles.responder.as_ref().expect("validated in Simulator::new");
                    let params = self
                        .settings
                        .responder_params
                        .clone()
                        .expect("validated in Simulator::new")
                        .with_seed(seed);
                    let history = render_history(&state.history, Some(&utterance));
                    let prompt = build_responder_prompt(&history, &thought_raw, strategy);
                    let out = responder
                        .chat(&[ChatMessage::user(prompt)], &params)
                        .await
                        .map_err(|e| abort(&state, e))?;
                    responder_reply(&out)
                }
            };

            state.push(Turn {
                index: state.history.len() as u32 + 1,
                user_utterance: utterance,
                agent_thought_raw: thought_raw,
                agent_thought: thought,
                agent_response: response,
            });
            if let Some(outcome) = check_termination(&state, self.settings.max_turns) {
                break outcome;
            }
        };

        Ok(Transcript {
            id: format!("{}-c{:02}", persona.id, conversation_index),
            persona_id: persona.id.clone(),
            condition: persona.spec.condition(),
            conversation_index,
            strategy: strategy.cloned(),
            success: outcome.is_success(),
            outcome,
            turns: state.history,
            seed,
            max_turns: self.settings.max_turns,
            models: RoleModels {
                user: self.settings.user_params.model.clone(),
                planner: self.settings.planner_params.model.clone(),
                responder: match self.settings.pipeline {
                    PipelineMode::PlannerResponder { .. } => {
                        self.settings.responder_params.as_ref().map(|p| p.model.clone())
                    }
                    PipelineMode::Monolithic => None,
                },
            },
            started_at,
            finished_at: self.settings.record_timestamps.then(now),
            extra: Default::default(),
        })
    }

    /// Checks that a batch over these personas can run at all.
    pub fn check_personas(&self, personas: &[Persona]) -> Result<(), BatchError> {
        let mut ids = HashSet::new();
        for p in personas {
            if !ids.insert(p.id.as_str()) {
                return Err(BatchError::Config(format!("duplicate persona id {}", p.id)));
            }
            if p.text.trim().is_empty() {
                return Err(BatchError::Config(format!("persona {} has empty text", p.id)));
            }
            self.strategy(p).map_err(|e| BatchError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Runs `conversations_per_persona` conversations for every persona
    /// with bounded concurrency. `sink` sees transcripts in (persona,
    /// conversation) order as they become available.
    pub async fn run_batch_with<F>(&self, personas: &[Persona], mut sink: F) -> Result<BatchResult, BatchError>
    where
        F: FnMut(&Transcript) -> std::io::Result<()>,
    {
        self.check_personas(personas)?;
        let per = self.settings.conversations_per_persona;
        let total = personas.len() * per as usize;
        let done = AtomicUsize::new(0);
        let jobs = personas
            .iter()
            .flat_map(|p| (0..per).map(move |i| (p, i)));
        let mut results = stream::iter(jobs)
            .map(|(persona, i)| {
                let done = &done;
                async move {
                    let seed = conversation_seed(self.settings.seed, &persona.id, i);
                    let r = self.run_conversation(persona, i, seed).await;
                    let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                    if n.is_multiple_of(100) || n == total {
                        info!(completed = n, total, "conversations");
                    }
                    r
                }
            })
            .buffered(self.settings.parallelism.max(1));

        let mut out = BatchResult { transcripts: Vec::with_capacity(total), aborted: Vec::new() };
        while let Some(result) = results.next().await {
            match result {
                Ok(t) => {
                    sink(&t).map_err(|e| BatchError::Sink(e.to_string()))?;
                    out.transcripts.push(t);
                }
                Err(a) => {
                    if let Some(BackendError::ReplayMiss { key }) = &a.cause {
                        return Err(BatchError::ReplayMiss {
                            persona_id: a.persona_id.clone(),
                            conversation_index: a.conversation_index,
                            key: key.clone(),
                        });
                    }
                    warn!(persona = %a.persona_id, conversation = a.conversation_index, error = %a.error, "conversation aborted");
                    out.aborted.push(a);
                }
            }
        }
        Ok(out)
    }

    pub async fn run_batch(&self, personas: &[Persona]) -> Result<BatchResult, BatchError> {
        self.run_batch_with(personas, |_| Ok(())).await
    }
}

/// Current UTC time, RFC 3339 with milliseconds.
pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
