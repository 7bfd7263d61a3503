//! Vocabulary shared by every stage of the harness: persona attributes,
//! intents, agent thoughts, turns and transcripts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("unknown {kind} value '{value}'")]
    UnknownValue { kind: &'static str, value: String },
    #[error("intent name is empty")]
    EmptyIntent,
    #[error("duplicate canonical intent '{0}'")]
    DuplicateIntent(String),
    #[error("strategy card for {sector} must name two distinct intents")]
    InvalidStrategyCard { sector: OccupationSector },
}

/// Parses a lowercase token against a fixed table, ignoring case and
/// treating '-' and '_' as equivalent.
fn lookup<T: Copy>(kind: &'static str, table: &[(&str, T)], raw: &str) -> Result<T, DomainError> {
    let needle = raw.trim().to_ascii_lowercase().replace('-', "_");
    table
        .iter()
        .find(|(token, _)| *token == needle)
        .map(|(_, v)| *v)
        .ok_or_else(|| DomainError::UnknownValue {
            kind,
            value: raw.to_string(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn token(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Gender::Female => "Female",
            Gender::Male => "Male",
        }
    }
}

impl FromStr for Gender {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        lookup("gender", &[("female", Gender::Female), ("male", Gender::Male)], s)
    }
}

/// Age bracket. Boundary years shared by two brackets go to the younger one,
/// so the ranges partition 15..=90.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeGroup {
    Teen,
    Adult,
    MiddleAged,
    Elderly,
}

/// Upper bound used when sampling elderly ages.
pub const ELDERLY_MAX_AGE: u32 = 90;

impl AgeGroup {
    pub const ALL: [AgeGroup; 4] = [
        AgeGroup::Teen,
        AgeGroup::Adult,
        AgeGroup::MiddleAged,
        AgeGroup::Elderly,
    ];

    /// Inclusive year range.
    pub fn years(self) -> (u32, u32) {
        match self {
            AgeGroup::Teen => (15, 19),
            AgeGroup::Adult => (20, 45),
            AgeGroup::MiddleAged => (46, 65),
            AgeGroup::Elderly => (66, ELDERLY_MAX_AGE),
        }
    }

    pub fn contains(self, years: u32) -> bool {
        let (lo, hi) = self.years();
        (lo..=hi).contains(&years)
    }

    pub fn for_age(years: u32) -> Option<AgeGroup> {
        Self::ALL.into_iter().find(|g| g.contains(years))
    }

    pub fn token(self) -> &'static str {
        match self {
            AgeGroup::Teen => "teen",
            AgeGroup::Adult => "adult",
            AgeGroup::MiddleAged => "middle_aged",
            AgeGroup::Elderly => "elderly",
        }
    }

    /// Lowercase phrase used inside prompts.
    pub fn phrase(self) -> &'static str {
        match self {
            AgeGroup::Teen => "teen",
            AgeGroup::Adult => "adult",
            AgeGroup::MiddleAged => "middle-aged",
            AgeGroup::Elderly => "elderly",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::Teen => "Teen",
            AgeGroup::Adult => "Adult",
            AgeGroup::MiddleAged => "Middle-aged",
            AgeGroup::Elderly => "Elderly",
        }
    }
}

impl FromStr for AgeGroup {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        lookup(
            "age group",
            &[
                ("teen", AgeGroup::Teen),
                ("adult", AgeGroup::Adult),
                ("middle_aged", AgeGroup::MiddleAged),
                ("middleaged", AgeGroup::MiddleAged),
                ("elderly", AgeGroup::Elderly),
            ],
            s,
        )
    }
}

/// The six ISIC sections used for occupations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupationSector {
    Agr,
    Info,
    Fin,
    Edu,
    Heal,
    Arts,
}

impl OccupationSector {
    pub const ALL: [OccupationSector; 6] = [
        OccupationSector::Agr,
        OccupationSector::Info,
        OccupationSector::Fin,
        OccupationSector::Edu,
        OccupationSector::Heal,
        OccupationSector::Arts,
    ];

    pub fn token(self) -> &'static str {
        match self {
            OccupationSector::Agr => "agr",
            OccupationSector::Info => "info",
            OccupationSector::Fin => "fin",
            OccupationSector::Edu => "edu",
            OccupationSector::Heal => "heal",
            OccupationSector::Arts => "arts",
        }
    }

    /// Short code as printed in result tables.
    pub fn label(self) -> &'static str {
        match self {
            OccupationSector::Agr => "Agr",
            OccupationSector::Info => "Info",
            OccupationSector::Fin => "Fin",
            OccupationSector::Edu => "Edu",
            OccupationSector::Heal => "Heal",
            OccupationSector::Arts => "Arts",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            OccupationSector::Agr => "Agriculture, Forestry, and Fishing",
            OccupationSector::Info => "Information and Communication",
            OccupationSector::Fin => "Financial and Insurance Activities",
            OccupationSector::Edu => "Education",
            OccupationSector::Heal => "Human Health and Social Work Activities",
            OccupationSector::Arts => "Arts, Entertainment, and Recreation",
        }
    }

    pub fn titles(self) -> [&'static str; 4] {
        match self {
            OccupationSector::Agr => ["Farmer", "Woodcutter", "Fisherman", "Horticulturist"],
            OccupationSector::Info => [
                "Software Engineer",
                "Cybersecurity Specialist",
                "Data Scientist",
                "Telecommunications Technician",
            ],
            OccupationSector::Fin => [
                "Investment Analyst",
                "Actuary",
                "Insurance Claims Adjuster",
                "Financial Advisor",
            ],
            OccupationSector::Edu => [
                "Primary School Teacher",
                "University Professor",
                "Vocational Trainer",
                "Special Education Teacher",
            ],
            OccupationSector::Heal => ["Doctor", "Nurse", "Physical Therapist", "Psychologist"],
            OccupationSector::Arts => ["Actor", "Musician", "Artist", "Writer"],
        }
    }
}

impl fmt::Display for OccupationSector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OccupationSector {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        lookup(
            "occupation sector",
            &[
                ("agr", OccupationSector::Agr),
                ("info", OccupationSector::Info),
                ("fin", OccupationSector::Fin),
                ("edu", OccupationSector::Edu),
                ("heal", OccupationSector::Heal),
                ("arts", OccupationSector::Arts),
            ],
            s,
        )
    }
}

/// A single MBTI pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PersonalityTrait {
    E,
    I,
    S,
    N,
    T,
    F,
    J,
    P,
}

impl PersonalityTrait {
    pub const ALL: [PersonalityTrait; 8] = [
        PersonalityTrait::E,
        PersonalityTrait::I,
        PersonalityTrait::S,
        PersonalityTrait::N,
        PersonalityTrait::T,
        PersonalityTrait::F,
        PersonalityTrait::J,
        PersonalityTrait::P,
    ];

    pub fn letter(self) -> char {
        match self {
            PersonalityTrait::E => 'E',
            PersonalityTrait::I => 'I',
            PersonalityTrait::S => 'S',
            PersonalityTrait::N => 'N',
            PersonalityTrait::T => 'T',
            PersonalityTrait::F => 'F',
            PersonalityTrait::J => 'J',
            PersonalityTrait::P => 'P',
        }
    }

    pub fn full_name(self) -> &'static str {
        match self {
            PersonalityTrait::E => "Extraversion",
            PersonalityTrait::I => "Introversion",
            PersonalityTrait::S => "Sensing",
            PersonalityTrait::N => "Intuition",
            PersonalityTrait::T => "Thinking",
            PersonalityTrait::F => "Feeling",
            PersonalityTrait::J => "Judging",
            PersonalityTrait::P => "Perceiving",
        }
    }
}

impl FromStr for PersonalityTrait {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        PersonalityTrait::ALL
            .into_iter()
            .find(|t| {
                needle.eq_ignore_ascii_case(&t.letter().to_string())
                    || needle.eq_ignore_ascii_case(t.full_name())
            })
            .ok_or_else(|| DomainError::UnknownValue {
                kind: "personality trait",
                value: s.to_string(),
            })
    }
}

/// Which persona attribute a sampling condition holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedAttribute {
    Gender,
    Age,
    Occupation,
}

impl FixedAttribute {
    pub fn token(self) -> &'static str {
        match self {
            FixedAttribute::Gender => "gender",
            FixedAttribute::Age => "age",
            FixedAttribute::Occupation => "occupation",
        }
    }

    /// Every value of this attribute, in table order.
    pub fn domain(self) -> Vec<FixedValue> {
        match self {
            FixedAttribute::Gender => Gender::ALL.into_iter().map(FixedValue::Gender).collect(),
            FixedAttribute::Age => AgeGroup::ALL.into_iter().map(FixedValue::Age).collect(),
            FixedAttribute::Occupation => OccupationSector::ALL
                .into_iter()
                .map(FixedValue::Occupation)
                .collect(),
        }
    }

    pub fn parse_value(self, raw: &str) -> Result<FixedValue, DomainError> {
        Ok(match self {
            FixedAttribute::Gender => FixedValue::Gender(raw.parse()?),
            FixedAttribute::Age => FixedValue::Age(raw.parse()?),
            FixedAttribute::Occupation => FixedValue::Occupation(raw.parse()?),
        })
    }
}

impl fmt::Display for FixedAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FixedAttribute {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        lookup(
            "fixed attribute",
            &[
                ("gender", FixedAttribute::Gender),
                ("age", FixedAttribute::Age),
                ("occupation", FixedAttribute::Occupation),
            ],
            s,
        )
    }
}

/// The held-fixed value of a sampling condition. Orders by attribute, then
/// by table order within the attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FixedValue {
    Gender(Gender),
    Age(AgeGroup),
    Occupation(OccupationSector),
}

impl FixedValue {
    pub fn attribute(self) -> FixedAttribute {
        match self {
            FixedValue::Gender(_) => FixedAttribute::Gender,
            FixedValue::Age(_) => FixedAttribute::Age,
            FixedValue::Occupation(_) => FixedAttribute::Occupation,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            FixedValue::Gender(g) => g.token(),
            FixedValue::Age(a) => a.token(),
            FixedValue::Occupation(s) => s.token(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FixedValue::Gender(g) => g.label(),
            FixedValue::Age(a) => a.label(),
            FixedValue::Occupation(s) => s.label(),
        }
    }
}

/// Condition key carried by personas and transcripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "ConditionRepr", into = "ConditionRepr")]
pub struct Condition(pub FixedValue);

#[derive(Serialize, Deserialize)]
struct ConditionRepr {
    attribute: FixedAttribute,
    value: String,
}

impl TryFrom<ConditionRepr> for Condition {
    type Error = DomainError;

    fn try_from(r: ConditionRepr) -> Result<Self, Self::Error> {
        r.attribute.parse_value(&r.value).map(Condition)
    }
}

impl From<Condition> for ConditionRepr {
    fn from(c: Condition) -> Self {
        ConditionRepr {
            attribute: c.0.attribute(),
            value: c.0.token().to_string(),
        }
    }
}

impl Condition {
    pub fn attribute(self) -> FixedAttribute {
        self.0.attribute()
    }

    pub fn label(self) -> &'static str {
        self.0.label()
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.0.attribute(), self.0.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PersonaSpec {
    pub gender: Gender,
    pub age_group: AgeGroup,
    pub age_years: u32,
    pub sector: OccupationSector,
    pub occupation_title: String,
    #[serde(rename = "trait")]
    pub personality: PersonalityTrait,
    pub fixed_attribute: FixedAttribute,
}

impl PersonaSpec {
    /// The condition this spec was sampled under.
    pub fn condition(&self) -> Condition {
        Condition(match self.fixed_attribute {
            FixedAttribute::Gender => FixedValue::Gender(self.gender),
            FixedAttribute::Age => FixedValue::Age(self.age_group),
            FixedAttribute::Occupation => FixedValue::Occupation(self.sector),
        })
    }

    pub fn is_valid(&self) -> bool {
        self.age_group.contains(self.age_years)
            && self.sector.titles().contains(&self.occupation_title.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub spec: PersonaSpec,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// Canonical intent name. Catalog membership is a property of an
/// [`IntentCatalog`], not of the name itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Intent(String);

impl Intent {
    pub fn new(name: impl Into<String>) -> Intent {
        Intent(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whether a canonicalized intent came from the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    InCatalog,
    OutOfCatalog,
}

/// Open intent vocabulary with an alias table. Lookups ignore ASCII case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CatalogRepr", into = "CatalogRepr")]
pub struct IntentCatalog {
    canonical: Vec<Intent>,
    aliases: BTreeMap<String, Intent>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct CatalogRepr {
    canonical: Vec<String>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
}

impl TryFrom<CatalogRepr> for IntentCatalog {
    type Error = DomainError;

    fn try_from(r: CatalogRepr) -> Result<Self, Self::Error> {
        IntentCatalog::new(r.canonical, r.aliases)
    }
}

impl From<IntentCatalog> for CatalogRepr {
    fn from(c: IntentCatalog) -> Self {
        CatalogRepr {
            canonical: c.canonical.iter().map(|i| i.0.clone()).collect(),
            aliases: c.aliases.into_iter().map(|(k, v)| (k, v.0)).collect(),
        }
    }
}

impl Default for IntentCatalog {
    fn default() -> Self {
        IntentCatalog::new(
            ["FindRestaurants", "FindAttraction", "SearchHotel", "FindEvents"],
            [
                ("FindRestaurant", "FindRestaurants"),
                ("FindAttractions", "FindAttraction"),
                ("SearchHotels", "SearchHotel"),
                ("FindEvent", "FindEvents"),
            ],
        )
        .expect("default catalog is well formed")
    }
}

impl IntentCatalog {
    pub fn new<C, A, K, V>(canonical: C, aliases: A) -> Result<IntentCatalog, DomainError>
    where
        C: IntoIterator,
        C::Item: Into<String>,
        A: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut names = Vec::new();
        let mut index = HashMap::new();
        for name in canonical {
            let name: String = name.into().trim().to_string();
            if name.is_empty() {
                return Err(DomainError::EmptyIntent);
            }
            let key = name.to_ascii_lowercase();
            if index.insert(key, names.len()).is_some() {
                return Err(DomainError::DuplicateIntent(name));
            }
            names.push(Intent(name));
        }
        let mut alias_map = BTreeMap::new();
        for (from, to) in aliases {
            let from: String = from.into().trim().to_string();
            let to: String = to.into();
            let target = index
                .get(&to.trim().to_ascii_lowercase())
                .map(|&i| names[i].clone())
                .ok_or(DomainError::UnknownValue {
                    kind: "alias target",
                    value: to,
                })?;
            alias_map.insert(from, target);
        }
        Ok(IntentCatalog {
            canonical: names,
            aliases: alias_map,
            index,
        })
    }

    /// Canonical intents in catalog order.
    pub fn intents(&self) -> &[Intent] {
        &self.canonical
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&str, &Intent)> {
        self.aliases.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn contains(&self, intent: &Intent) -> bool {
        self.index.contains_key(&intent.0.to_ascii_lowercase())
    }

    /// Position in catalog order, if the intent is a catalog member.
    pub fn position(&self, intent: &Intent) -> Option<usize> {
        self.index.get(&intent.0.to_ascii_lowercase()).copied()
    }

    /// Trims, resolves aliases and catalog spelling. Unknown names pass
    /// through verbatim (trimmed) and are flagged out-of-catalog.
    pub fn canonicalize(&self, raw: &str) -> Result<(Intent, Membership), DomainError> {
        let name = raw.trim();
        if name.is_empty() {
            return Err(DomainError::EmptyIntent);
        }
        let key = name.to_ascii_lowercase();
        if let Some(&i) = self.index.get(&key) {
            return Ok((self.canonical[i].clone(), Membership::InCatalog));
        }
        if let Some(target) = self
            .aliases
            .iter()
            .find(|(alias, _)| alias.eq_ignore_ascii_case(name))
            .map(|(_, t)| t)
        {
            return Ok((target.clone(), Membership::InCatalog));
        }
        Ok((Intent(name.to_string()), Membership::OutOfCatalog))
    }
}

/// Parsed agent chain-of-thought.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Thought {
    ChitChat,
    Pivot { intent: Intent },
    ContinueTopic { intent: Intent },
    ExplicitIntent { intent: Intent },
    Unrecognized { raw: String },
}

impl Thought {
    pub fn intent(&self) -> Option<&Intent> {
        match self {
            Thought::Pivot { intent }
            | Thought::ContinueTopic { intent }
            | Thought::ExplicitIntent { intent } => Some(intent),
            Thought::ChitChat | Thought::Unrecognized { .. } => None,
        }
    }

    pub fn is_recognized(&self) -> bool {
        !matches!(self, Thought::Unrecognized { .. })
    }

    pub fn is_pivot(&self) -> bool {
        matches!(self, Thought::Pivot { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: u32,
    pub user_utterance: String,
    pub agent_thought_raw: String,
    pub agent_thought: Thought,
    pub agent_response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    ExplicitIntent { intent: Intent },
    AgentBye,
    MaxTurns,
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::ExplicitIntent { .. })
    }
}

/// Occupation prior injected into the responder prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyCard {
    pub sector: OccupationSector,
    pub intents: [Intent; 2],
    pub rationale: String,
}

impl StrategyCard {
    pub fn new(
        sector: OccupationSector,
        first: impl Into<String>,
        second: impl Into<String>,
        rationale: impl Into<String>,
    ) -> Result<StrategyCard, DomainError> {
        let intents = [Intent::new(first), Intent::new(second)];
        if intents[0] == intents[1] {
            return Err(DomainError::InvalidStrategyCard { sector });
        }
        Ok(StrategyCard {
            sector,
            intents,
            rationale: rationale.into(),
        })
    }

    /// Intents joined in card order, as substituted into prompts.
    pub fn intents_joined(&self) -> String {
        format!("{}, {}", self.intents[0], self.intents[1])
    }

    /// The six occupation cards derived from the first simulation round.
    pub fn defaults() -> Vec<StrategyCard> {
        use OccupationSector::*;
        [
            (
                Agr,
                "FindRestaurants",
                "FindAttraction",
                "These users often value relaxation and leisure experiences when off work.",
            ),
            (
                Info,
                "SearchHotel",
                "FindRestaurants",
                "Tech workers frequently travel for work and value reliable accommodations and good dining options.",
            ),
            (
                Fin,
                "SearchHotel",
                "FindRestaurants",
                "These users may have business travel needs and typically prefer higher-end services.",
            ),
            (
                Edu,
                "FindRestaurants",
                "FindEvents",
                "Educators often enjoy social or cultural activities and group-friendly dining.",
            ),
            (
                Heal,
                "FindRestaurants",
                "FindEvents",
                "These users often seek stress relief through leisure activities and social events.",
            ),
            (
                Arts,
                "FindEvents",
                "FindRestaurants",
                "Creatives are usually interested in events and venues that provide inspiration or entertainment, along with unique dining experiences.",
            ),
        ]
        .into_iter()
        .map(|(s, a, b, r)| StrategyCard::new(s, a, b, r).expect("default cards are distinct"))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleModels {
    pub user: String,
    pub planner: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responder: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub persona_id: String,
    pub condition: Condition,
    pub conversation_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyCard>,
    pub turns: Vec<Turn>,
    pub outcome: Outcome,
    pub success: bool,
    pub seed: u64,
    pub max_turns: u32,
    pub models: RoleModels,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Transcript {
    pub fn turn_count(&self) -> usize {
        self.turns.len()
    }

    pub fn thoughts(&self) -> impl Iterator<Item = &Thought> {
        self.turns.iter().map(|t| &t.agent_thought)
    }

    /// Structural invariants: contiguous 1-based turns within the cap, and
    /// success agreeing with the outcome.
    pub fn is_consistent(&self) -> bool {
        !self.turns.is_empty()
            && self.turns.len() <= self.max_turns as usize
            && self
                .turns
                .iter()
                .enumerate()
                .all(|(i, t)| t.index as usize == i + 1)
            && self.success == self.outcome.is_success()
    }
}
