//! Persona sampling and generation.
//!
//! One attribute is held fixed per condition; the other three are drawn
//! uniformly. Specs are planned up front on a single seeded RNG, so the spec
//! sequence is fixed before any backend call runs.

use std::collections::{BTreeMap, HashMap, HashSet};

use futures::stream::{self, StreamExt};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::{debug, warn};

use crate::backend::{BackendError, ChatBackend, ChatMessage, ChatParams};
use crate::domain::{
    AgeGroup, DomainError, FixedAttribute, FixedValue, Gender, OccupationSector, Persona,
    PersonaSpec, PersonalityTrait,
};

pub const DEFAULT_PERSONAS_PER_CONDITION: u32 = 20;
pub const DEFAULT_RETRIES: u32 = 3;
pub const DEFAULT_PERSONA_TEMPERATURE: f64 = 1.0;

const PERSONA_PROMPT: &str = r#"Create a detailed and realistic persona for a user simulator based on the following criteria:

- **Gender**: {gender}
- **Age**: {age}
- **Occupation**: {occupation}, according to the International Standard Industrial Classification (ISIC)
- **Name**: Generate according to the gender (different names every time).
- **Personality Traits**: {personality}, according to the Myers-Briggs Type Indicator (MBTI).

### **Objective:**
The goal is to generate well-rounded personas that explicitly reflect the provided gender, age, and occupation. These personas should illustrate how each individual engages with their surroundings, expresses themselves, and navigates social and professional interactions.
Directly generate a unique persona, make sure you specify the age, the gender, and the occupation.

### **Output Format (Strict JSON)**
Respond **ONLY** with a valid JSON object, following this exact format:
```json
{
    "persona": "You're [Name], a [Age]-year-old male [Occupation] who [personality-driven description]. [Other descriptions]"
}
```

### **Sample output:**
{
    "persona": "You're Emily Thompson, a 28-year-old female marketing specialist who thrives in dynamic environments. You love brainstorming creative campaigns, networking at industry events, and sharing innovative ideas with colleagues. Outside of work, you enjoy hiking in the mountains, playing guitar at open mic nights, and engaging in social activities that keep your energy levels high."
}

Ensure that:
- The JSON output is **well-formed and properly formatted**.
- The persona is natural and unique each time.
- Do not include additional explanations or formatting outside of the JSON output.
- You have to come up with different names everytime so be creative on names.
- The age should be within the age range."#;

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error("no JSON object found in model output")]
    NoJsonFound,
    #[error("malformed JSON in model output: {0}")]
    MalformedJson(String),
    #[error("persona generation failed after {attempts} attempts: {last}")]
    GenerationFailed { attempts: u32, last: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub fixed_attribute: FixedAttribute,
    pub values: Vec<String>,
    #[serde(default = "default_per_condition")]
    pub personas_per_condition: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_per_condition() -> u32 {
    DEFAULT_PERSONAS_PER_CONDITION
}

impl SamplingPlan {
    /// Sweeps every value of the attribute.
    pub fn full(fixed_attribute: FixedAttribute, personas_per_condition: u32, seed: u64) -> Self {
        SamplingPlan {
            fixed_attribute,
            values: fixed_attribute
                .domain()
                .into_iter()
                .map(|v| v.token().to_string())
                .collect(),
            personas_per_condition,
            seed,
        }
    }

    pub fn fixed_values(&self) -> Result<Vec<FixedValue>, PersonaError> {
        if self.personas_per_condition < 1 {
            return Err(PersonaError::InvalidPlan("personas_per_condition must be >= 1".into()));
        }
        if self.values.is_empty() {
            return Err(PersonaError::InvalidPlan("values must not be empty".into()));
        }
        let parsed = self
            .values
            .iter()
            .map(|v| self.fixed_attribute.parse_value(v))
            .collect::<Result<Vec<_>, _>>()?;
        let unique: HashSet<_> = parsed.iter().collect();
        if unique.len() != parsed.len() {
            return Err(PersonaError::InvalidPlan("values must be distinct".into()));
        }
        Ok(parsed)
    }
}

/// A planned persona: id plus sampled spec.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPersona {
    pub id: String,
    pub spec: PersonaSpec,
}

/// Samples one spec with `fixed` held and everything else uniform.
pub fn sample_spec<R: Rng + ?Sized>(fixed: FixedValue, rng: &mut R) -> PersonaSpec {
    let gender = match fixed {
        FixedValue::Gender(g) => g,
        _ => *Gender::ALL.choose(rng).unwrap(),
    };
    let age_group = match fixed {
        FixedValue::Age(a) => a,
        _ => *AgeGroup::ALL.choose(rng).unwrap(),
    };
    let (lo, hi) = age_group.years();
    let age_years = rng.random_range(lo..=hi);
    let sector = match fixed {
        FixedValue::Occupation(s) => s,
        _ => *OccupationSector::ALL.choose(rng).unwrap(),
    };
    let occupation_title = sector.titles().choose(rng).unwrap().to_string();
    let personality = *PersonalityTrait::ALL.choose(rng).unwrap();
    PersonaSpec {
        gender,
        age_group,
        age_years,
        sector,
        occupation_title,
        personality,
        fixed_attribute: fixed.attribute(),
    }
}

/// Expands a plan into its full, deterministic spec sequence, ordered by
/// condition then index.
pub fn plan_specs(plan: &SamplingPlan) -> Result<Vec<PlannedPersona>, PersonaError> {
    let values = plan.fixed_values()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Vec::with_capacity(values.len() * plan.personas_per_condition as usize);
    for value in values {
        for i in 0..plan.personas_per_condition {
            out.push(PlannedPersona {
                id: format!("{}-{}-{:02}", value.attribute().token(), value.token(), i),
                spec: sample_spec(value, &mut rng),
            });
        }
    }
    Ok(out)
}

pub fn render_persona_prompt(spec: &PersonaSpec) -> String {
    PERSONA_PROMPT
        .replace("{gender}", spec.gender.token())
        .replace(
            "{age}",
            &format!("{} years old ({})", spec.age_years, spec.age_group.phrase()),
        )
        .replace("{occupation}", &spec.occupation_title)
        .replace(
            "{personality}",
            &format!("{} ({})", spec.personality.full_name(), spec.personality.letter()),
        )
}

/// Returns the first top-level JSON object in model output, after removing
/// Markdown code fences and any surrounding prose.
pub fn extract_json_object(text: &str) -> Result<Value, PersonaError> {
    let cleaned: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n");
    let mut first_error = None;
    for (pos, _) in cleaned.match_indices('{') {
        let mut values = serde_json::Deserializer::from_str(&cleaned[pos..]).into_iter::<Value>();
        match values.next() {
            Some(Ok(v @ Value::Object(_))) => return Ok(v),
            Some(Err(e)) => {
                first_error.get_or_insert_with(|| e.to_string());
            }
            _ => {}
        }
    }
    match first_error {
        Some(e) => Err(PersonaError::MalformedJson(e)),
        None => Err(PersonaError::NoJsonFound),
    }
}

/// Display name: the run of capitalized words after "You're".
pub fn extract_name(text: &str) -> Option<String> {
    let start = text.find("You're ").map(|i| i + "You're ".len())?;
    let mut words = Vec::new();
    for word in text[start..].split_whitespace() {
        let bare = word.trim_end_matches(|c: char| !c.is_alphanumeric());
        if !bare.chars().next().is_some_and(char::is_uppercase) {
            break;
        }
        words.push(bare);
        if bare.len() != word.len() {
            break;
        }
    }
    (!words.is_empty()).then(|| words.join(" "))
}

fn persona_text(raw: &str) -> Result<String, PersonaError> {
    let v = extract_json_object(raw)?;
    v.get("persona")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| PersonaError::MalformedJson("missing non-empty \"persona\" string".into()))
}

/// Queries the backend for one persona, re-asking up to `retries` times
/// when the output does not contain a usable persona object. Backend errors
/// are returned immediately.
pub async fn generate_persona(
    id: &str,
    spec: &PersonaSpec,
    backend: &dyn ChatBackend,
    params: &ChatParams,
    retries: u32,
) -> Result<Persona, PersonaError> {
    let messages = [ChatMessage::user(render_persona_prompt(spec))];
    let mut last = String::new();
    for attempt in 0..=retries {
        // Distinct seeds per attempt keep retries from hitting a replay
        // cache entry that already failed to parse.
        let params = match params.seed {
            Some(s) => params.clone().with_seed(s.wrapping_add(attempt as u64)),
            None => params.clone(),
        };
        let raw = backend.chat(&messages, &params).await?;
        match persona_text(&raw) {
            Ok(text) => {
                return Ok(Persona {
                    id: id.to_string(),
                    spec: spec.clone(),
                    name: extract_name(&text),
                    text,
                    extra: BTreeMap::new(),
                })
            }
            Err(e) => {
                debug!(id, attempt, error = %e, "persona output rejected");
                last = e.to_string();
            }
        }
    }
    Err(PersonaError::GenerationFailed { attempts: retries + 1, last })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonaGenOptions {
    pub retries: u32,
    pub parallelism: usize,
}

impl Default for PersonaGenOptions {
    fn default() -> Self {
        PersonaGenOptions { retries: DEFAULT_RETRIES, parallelism: 4 }
    }
}

/// Outcome of a batch: personas produced in plan order, plus the first
/// failure if generation stopped early.
pub struct PersonaBatch {
    pub personas: Vec<Persona>,
    pub error: Option<(String, PersonaError)>,
}

fn persona_seed(base: u64, id: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(format!("{base}:{id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Generates every planned persona with bounded concurrency. Results keep
/// plan order. A duplicate (spec, text) pair is re-queried with a fresh
/// seed; repeated name collisions are only logged.
pub async fn generate_personas(
    planned: &[PlannedPersona],
    backend: &dyn ChatBackend,
    params: &ChatParams,
    base_seed: u64,
    opts: &PersonaGenOptions,
) -> PersonaBatch {
    let results: Vec<Result<Persona, (String, PersonaError)>> = stream::iter(planned.iter())
        .map(|p| async move {
            let params = params.clone().with_seed(persona_seed(base_seed, &p.id));
            generate_persona(&p.id, &p.spec, backend, &params, opts.retries)
                .await
                .map_err(|e| (p.id.clone(), e))
        })
        .buffered(opts.parallelism.max(1))
        .collect()
        .await;

    let mut personas = Vec::with_capacity(results.len());
    let mut seen_pairs: HashSet<(PersonaSpec, String)> = HashSet::new();
    let mut seen_names: HashMap<String, String> = HashMap::new();
    for result in results {
        let mut persona = match result {
            Ok(p) => p,
            Err(e) => return PersonaBatch { personas, error: Some(e) },
        };
        let mut bump = 1u64;
        while seen_pairs.contains(&(persona.spec.clone(), persona.text.clone()))
            && bump <= opts.retries as u64
        {
            warn!(id = %persona.id, "duplicate persona text, regenerating");
            let seed = persona_seed(base_seed, &persona.id).wrapping_add(bump * 1_000_003);
            match generate_persona(&persona.id, &persona.spec, backend, &params.clone().with_seed(seed), opts.retries).await {
                Ok(p) => persona = p,
                Err(e) => return PersonaBatch { personas, error: Some((persona.id.clone(), e)) },
            }
            bump += 1;
        }
        if let Some(name) = &persona.name {
            if let Some(other) = seen_names.insert(name.clone(), persona.id.clone()) {
                warn!(id = %persona.id, other = %other, name = %name, "duplicate persona name");
            }
        }
        seen_pairs.insert((persona.spec.clone(), persona.text.clone()));
        personas.push(persona);
    }
    PersonaBatch { personas, error: None }
}
