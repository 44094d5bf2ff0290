//! Fidelity metrics between originals, descriptions and reconstructions.
//!
//! Scores are kept on their natural scale: CLIP-S and CLIP-S-I are
//! `100 × cosine`, SSIM is in [-1, 1]. Presentation scaling (SSIM × 100,
//! two decimals) happens only when a report is rendered.

mod frechet;
mod human;
mod ssim;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::Presented;
use crate::textvec::{cosine, Vector};

pub use frechet::{frechet_distance, trace_sqrt_product, FeaturePopulation, JITTER, NEG_TOLERANCE};
pub use human::{aggregate_human_scores, HumanScoreSet, ModelScores};
pub use ssim::{ssim, ssim_map, LumaImage, C1, C2, SIGMA, WINDOW};

#[derive(Debug, Error)]
pub enum FidelityError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("image sizes differ: {left:?} vs {right:?}")]
    SizeMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("image {width}x{height} is smaller than the {window}x{window} window")]
    TooSmall { width: usize, height: usize, window: usize },
    #[error("{0}")]
    Image(String),
    #[error("population needs at least 2 samples, got {count}")]
    TooFewSamples { count: usize },
    #[error("covariance is not symmetric (max deviation {deviation:e})")]
    NotSymmetric { deviation: f64 },
    #[error("covariance product is not positive semidefinite (eigenvalue {eigenvalue:e} after jitter)")]
    NotPsd { eigenvalue: f64 },
    #[error("nothing to aggregate")]
    Empty,
    #[error("{metric} score {score} for {id:?} is out of range")]
    OutOfRange { id: String, metric: Metric, score: f64 },
    #[error("duplicate {metric} score for {id:?}")]
    DuplicateScore { id: String, metric: Metric },
    #[error("human score {score} for ({model:?}, {id:?}) is outside 1..=5")]
    HumanScoreOutOfRange { model: String, id: String, score: i64 },
    #[error("human score CSV: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ClipS,
    ClipSI,
    Ssim,
}

impl Metric {
    pub fn key(self) -> &'static str {
        match self {
            Metric::ClipS => "clip_s",
            Metric::ClipSI => "clip_s_i",
            Metric::Ssim => "ssim",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub id: String,
    pub score: f64,
    pub metric: Metric,
}

fn scaled_cosine(a: &Vector, b: &Vector) -> Result<f64, FidelityError> {
    cosine(a, b).map(|c| 100.0 * c).map_err(|_| FidelityError::DimensionMismatch { left: a.dim(), right: b.dim() })
}

/// Image-text agreement, `100 × cosine(image, text)`. Not clamped.
pub fn clip_s(image_vec: &Vector, text_vec: &Vector) -> Result<f64, FidelityError> {
    scaled_cosine(image_vec, text_vec)
}

/// Image-image agreement between an original and its reconstruction.
pub fn clip_s_i(original_vec: &Vector, reconstructed_vec: &Vector) -> Result<f64, FidelityError> {
    scaled_cosine(original_vec, reconstructed_vec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ItemScores {
    pub id: String,
    pub clip_s: Option<f64>,
    pub clip_s_i: Option<f64>,
    pub ssim: Option<f64>,
}

impl ItemScores {
    fn slot(&mut self, metric: Metric) -> &mut Option<f64> {
        match metric {
            Metric::ClipS => &mut self.clip_s,
            Metric::ClipSI => &mut self.clip_s_i,
            Metric::Ssim => &mut self.ssim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub dataset: String,
    pub clip_s: Option<MetricSummary>,
    pub clip_s_i: Option<MetricSummary>,
    pub ssim: Option<MetricSummary>,
    pub fid: Option<f64>,
    pub items: Vec<ItemScores>,
}

/// Means per metric plus the per-item breakdown, items in first-seen order.
pub fn aggregate_fidelity(
    dataset: &str,
    pairs: &[ScoredPair],
    fid: Option<f64>,
) -> Result<FidelityReport, FidelityError> {
    if pairs.is_empty() && fid.is_none() {
        return Err(FidelityError::Empty);
    }
    let mut items: Vec<ItemScores> = Vec::new();
    let mut slot_of: HashMap<&str, usize> = HashMap::new();
    let mut sums: HashMap<Metric, (f64, usize)> = HashMap::new();
    for p in pairs {
        let in_range = match p.metric {
            Metric::Ssim => (-1.0..=1.0).contains(&p.score),
            _ => p.score.is_finite(),
        };
        if !in_range {
            return Err(FidelityError::OutOfRange { id: p.id.clone(), metric: p.metric, score: p.score });
        }
        let i = *slot_of.entry(p.id.as_str()).or_insert_with(|| {
            items.push(ItemScores { id: p.id.clone(), ..Default::default() });
            items.len() - 1
        });
        let slot = items[i].slot(p.metric);
        if slot.is_some() {
            return Err(FidelityError::DuplicateScore { id: p.id.clone(), metric: p.metric });
        }
        *slot = Some(p.score);
        let e = sums.entry(p.metric).or_insert((0.0, 0));
        e.0 += p.score;
        e.1 += 1;
    }
    let summary = |m: Metric| sums.get(&m).map(|&(s, n)| MetricSummary { mean: s / n as f64, count: n });
    Ok(FidelityReport {
        dataset: dataset.to_string(),
        clip_s: summary(Metric::ClipS),
        clip_s_i: summary(Metric::ClipSI),
        ssim: summary(Metric::Ssim),
        fid,
        items,
    })
}

/// How report numbers are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Presentation {
    /// SSIM × 100 and every value printed with two decimals.
    pub scaled: bool,
}

impl Presentation {
    fn value(self, metric: Option<Metric>, v: f64) -> Presented {
        if self.scaled {
            let v = if metric == Some(Metric::Ssim) { v * 100.0 } else { v };
            Presented { value: v, places: Some(2) }
        } else {
            Presented { value: v, places: None }
        }
    }

    fn cell(self, metric: Option<Metric>, v: Option<f64>) -> String {
        match v {
            None => String::new(),
            Some(v) => match self.value(metric, v) {
                Presented { value, places: Some(p) } => format!("{value:.p$}"),
                Presented { value, places: None } => format!("{value}"),
            },
        }
    }
}

#[derive(Serialize)]
struct MetricsJson {
    clip_s: Option<Presented>,
    clip_s_i: Option<Presented>,
    ssim: Option<Presented>,
    fid: Option<Presented>,
}

#[derive(Serialize)]
struct ItemJson<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    clip_s: Option<Presented>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clip_s_i: Option<Presented>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ssim: Option<Presented>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    dataset: &'a str,
    metrics: MetricsJson,
    items: Vec<ItemJson<'a>>,
}

impl FidelityReport {
    pub fn to_json(&self, presentation: Presentation) -> String {
        let p = presentation;
        let mean = |m: Metric, s: Option<MetricSummary>| s.map(|s| p.value(Some(m), s.mean));
        let json = ReportJson {
            dataset: &self.dataset,
            metrics: MetricsJson {
                clip_s: mean(Metric::ClipS, self.clip_s),
                clip_s_i: mean(Metric::ClipSI, self.clip_s_i),
                ssim: mean(Metric::Ssim, self.ssim),
                fid: self.fid.map(|f| p.value(None, f)),
            },
            items: self
                .items
                .iter()
                .map(|i| ItemJson {
                    id: &i.id,
                    clip_s: i.clip_s.map(|v| p.value(Some(Metric::ClipS), v)),
                    clip_s_i: i.clip_s_i.map(|v| p.value(Some(Metric::ClipSI), v)),
                    ssim: i.ssim.map(|v| p.value(Some(Metric::Ssim), v)),
                })
                .collect(),
        };
        serde_json::to_string(&json).expect("report serializes")
    }

    /// One-row table in the column order SSIM, FID, CLIP-S-I, then CLIP-S
    /// when image-text scores are present.
    pub fn to_csv(&self, presentation: Presentation) -> String {
        let p = presentation;
        let mut header = vec!["dataset", "ssim", "fid", "clip_s_i"];
        let mut row = vec![
            self.dataset.clone(),
            p.cell(Some(Metric::Ssim), self.ssim.map(|s| s.mean)),
            p.cell(None, self.fid),
            p.cell(Some(Metric::ClipSI), self.clip_s_i.map(|s| s.mean)),
        ];
        if let Some(s) = self.clip_s {
            header.push("clip_s");
            row.push(p.cell(Some(Metric::ClipS), Some(s.mean)));
        }
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}
