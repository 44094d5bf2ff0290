//! Zero-shot and n-shot prompt construction for external description
//! generators.
//!
//! A prompt is a sequence of demonstration blocks (question, then
//! description) followed by the query question, joined with single
//! newlines. Shots are chosen by one of four strategies:
//!
//! | strategy     | ranking                                              |
//! |--------------|------------------------------------------------------|
//! | `RS`         | uniform sample without replacement, seeded per query |
//! | `SIIR`       | image-vector cosine to the query image               |
//! | `STTR`       | text-vector cosine to the query's zero-shot draft    |
//! | `FIXED_POOL` | first `n` entries of a curated list                  |
//!
//! Similarity-ranked shots are emitted in ascending similarity, so the most
//! similar demonstration sits right before the query. A pool entry with the
//! query's own id is never selected.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textvec::{cosine, Vector};

pub const PLACEHOLDER: &str = "{Category}";
pub const MAX_SHOTS: usize = 4;

pub const LOCAL_QUESTION: &str = "What are the main visual features for {Category} in this image?";
pub const GLOBAL_QUESTION: &str =
    "What are the main elements in this image, and how do they interact or relate to each other?";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IclError {
    #[error("template {id:?}: placeholder {PLACEHOLDER} appears {count} times")]
    BadPlaceholderCount { id: String, count: usize },
    #[error("template {id:?} has no {PLACEHOLDER} placeholder but category {category:?} was given")]
    MissingPlaceholder { id: String, category: String },
    #[error("template {id:?} needs a category")]
    MissingCategory { id: String },
    #[error("n_shots = {n} exceeds the maximum of {MAX_SHOTS}")]
    TooManyShots { n: usize },
    #[error("n_shots = {n} but only {available} pool entries are eligible for query {query:?}")]
    PoolTooSmall { n: usize, available: usize, query: String },
    #[error("{strategy} needs a {kind} vector for {id:?}")]
    MissingVector { strategy: Strategy, kind: &'static str, id: String },
    #[error("vector dimension mismatch for {id:?}: {left} vs {right}")]
    DimensionMismatch { id: String, left: usize, right: usize },
    #[error("unknown shot strategy {0:?} (expected RS, SIIR, STTR or FIXED_POOL)")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub question_pattern: String,
    #[serde(default)]
    pub answer_prefix: Option<String>,
}

impl PromptTemplate {
    pub fn new(id: &str, question_pattern: &str, answer_prefix: Option<&str>) -> Result<Self, IclError> {
        let count = question_pattern.matches(PLACEHOLDER).count();
        if count > 1 {
            return Err(IclError::BadPlaceholderCount { id: id.into(), count });
        }
        Ok(Self {
            id: id.into(),
            question_pattern: question_pattern.into(),
            answer_prefix: answer_prefix.map(str::to_string),
        })
    }

    /// Category-conditioned question about local visual features.
    pub fn local() -> Self {
        Self::new("local", LOCAL_QUESTION, None).expect("one placeholder")
    }

    /// Category-free question about the whole scene.
    pub fn global() -> Self {
        Self::new("global", GLOBAL_QUESTION, None).expect("no placeholder")
    }

    /// Built-in template by id (`local` or `global`).
    pub fn builtin(id: &str) -> Option<Self> {
        match id {
            "local" => Some(Self::local()),
            "global" => Some(Self::global()),
            _ => None,
        }
    }

    pub fn with_answer_prefix(mut self, prefix: &str) -> Self {
        self.answer_prefix = Some(prefix.to_string());
        self
    }

    pub fn has_placeholder(&self) -> bool {
        self.question_pattern.contains(PLACEHOLDER)
    }

    /// The question alone, without any answer prefix.
    pub fn question(&self, category: Option<&str>) -> Result<String, IclError> {
        let category = category.filter(|c| !c.is_empty());
        match (self.has_placeholder(), category) {
            (true, Some(c)) => Ok(self.question_pattern.replacen(PLACEHOLDER, c, 1)),
            (true, None) => Err(IclError::MissingCategory { id: self.id.clone() }),
            (false, Some(c)) => Err(IclError::MissingPlaceholder { id: self.id.clone(), category: c.into() }),
            (false, None) => Ok(self.question_pattern.clone()),
        }
    }

    /// Question followed by the answer prefix, if one is configured.
    pub fn render_zero_shot(&self, category: Option<&str>) -> Result<String, IclError> {
        let q = self.question(category)?;
        Ok(match &self.answer_prefix {
            Some(p) if !p.is_empty() => format!("{q} {p}"),
            _ => q,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "SIIR")]
    Siir,
    #[serde(rename = "STTR")]
    Sttr,
    #[serde(rename = "FIXED_POOL")]
    FixedPool,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rs => "RS",
            Strategy::Siir => "SIIR",
            Strategy::Sttr => "STTR",
            Strategy::FixedPool => "FIXED_POOL",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = IclError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "RS" => Ok(Strategy::Rs),
            "SIIR" => Ok(Strategy::Siir),
            "STTR" => Ok(Strategy::Sttr),
            "FIXED_POOL" => Ok(Strategy::FixedPool),
            _ => Err(IclError::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotSelectionSpec {
    pub strategy: Strategy,
    pub n_shots: usize,
    pub seed: u64,
}

/// One pool entry that may be used as a demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotCandidate {
    pub id: String,
    pub category: Option<String>,
    pub description: String,
    pub image_vector: Option<Vector>,
    pub text_vector: Option<Vector>,
}

impl ShotCandidate {
    pub fn new(id: &str, description: &str) -> Self {
        Self { id: id.into(), category: None, description: description.into(), image_vector: None, text_vector: None }
    }
}

/// What the selector knows about the item being prompted for.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShotQuery {
    pub id: String,
    pub image_vector: Option<Vector>,
    /// Text vector of a zero-shot draft description, for STTR.
    pub draft_vector: Option<Vector>,
}

// FNV-1a, so per-query RS streams do not depend on std's hasher.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

fn rank_by_similarity<'a>(
    strategy: Strategy,
    kind: &'static str,
    target: Option<&Vector>,
    query_id: &str,
    eligible: &[&'a ShotCandidate],
    pick: impl Fn(&ShotCandidate) -> Option<&Vector>,
    n: usize,
) -> Result<Vec<&'a ShotCandidate>, IclError> {
    let target = target.ok_or_else(|| IclError::MissingVector { strategy, kind, id: query_id.into() })?;
    let mut scored = eligible
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = pick(c).ok_or_else(|| IclError::MissingVector { strategy, kind, id: c.id.clone() })?;
            let sim = cosine(target, v).map_err(|_| IclError::DimensionMismatch {
                id: c.id.clone(),
                left: target.dim(),
                right: v.dim(),
            })?;
            Ok((i, sim))
        })
        .collect::<Result<Vec<_>, IclError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored[..n].iter().rev().map(|&(i, _)| eligible[i]).collect())
}

/// Chooses the demonstrations for one query, in prompt order.
pub fn select_shots<'a>(
    spec: &ShotSelectionSpec,
    pool: &'a [ShotCandidate],
    query: &ShotQuery,
) -> Result<Vec<&'a ShotCandidate>, IclError> {
    let n = spec.n_shots;
    if n > MAX_SHOTS {
        return Err(IclError::TooManyShots { n });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<&ShotCandidate> = pool.iter().filter(|c| c.id != query.id).collect();
    if n > eligible.len() {
        return Err(IclError::PoolTooSmall { n, available: eligible.len(), query: query.id.clone() });
    }
    match spec.strategy {
        Strategy::Rs => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a(&query.id));
            Ok(rand::seq::index::sample(&mut rng, eligible.len(), n).into_iter().map(|i| eligible[i]).collect())
        }
        Strategy::Siir => rank_by_similarity(
            Strategy::Siir,
            "image",
            query.image_vector.as_ref(),
            &query.id,
            &eligible,
            |c| c.image_vector.as_ref(),
            n,
        ),
        Strategy::Sttr => rank_by_similarity(
            Strategy::Sttr,
            "text",
            query.draft_vector.as_ref(),
            &query.id,
            &eligible,
            |c| c.text_vector.as_ref(),
            n,
        ),
        Strategy::FixedPool => Ok(eligible[..n].to_vec()),
    }
}

/// One demonstration block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shot {
    pub id: String,
    pub question: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub query_id: String,
    #[serde(rename = "prompt")]
    pub rendered_prompt: String,
    pub shot_ids: Vec<String>,
    pub template_id: String,
    pub max_new_tokens: Option<u32>,
}

impl PromptBundle {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }
}

/// `Q1 \n d1 \n … \n Qn \n dn \n Q_query`.
pub fn render_prompt(shots: &[Shot], query_question: &str) -> String {
    let mut parts: Vec<&str> = Vec::with_capacity(shots.len() * 2 + 1);
    for s in shots {
        parts.push(&s.question);
        parts.push(&s.description);
    }
    parts.push(query_question);
    parts.join("\n")
}

pub fn assemble_bundle(
    template: &PromptTemplate,
    query_id: &str,
    shots: &[Shot],
    query_question: &str,
    max_new_tokens: Option<u32>,
) -> PromptBundle {
    PromptBundle {
        query_id: query_id.into(),
        rendered_prompt: render_prompt(shots, query_question),
        shot_ids: shots.iter().map(|s| s.id.clone()).collect(),
        template_id: template.id.clone(),
        max_new_tokens,
    }
}
