//! Human fidelity ratings on a 1 (completely unfaithful) to 5 (completely
//! faithful) scale, ingested from `model,id,score` CSV.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FidelityError;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HumanScoreSet {
    // model -> (id, score) in input order
    scores: BTreeMap<String, Vec<(String, u8)>>,
}

#[derive(Deserialize)]
struct Row {
    model: String,
    id: String,
    score: i64,
}

impl HumanScoreSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: &str, id: &str, score: i64) -> Result<(), FidelityError> {
        if !(1..=5).contains(&score) {
            return Err(FidelityError::HumanScoreOutOfRange { model: model.into(), id: id.into(), score });
        }
        self.scores.entry(model.to_string()).or_default().push((id.to_string(), score as u8));
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, FidelityError> {
        let mut set = Self::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| FidelityError::Csv(e.to_string()))?;
            set.insert(&row.model, &row.id, row.score)?;
        }
        Ok(set)
    }

    pub fn from_path(path: &Path) -> Result<Self, FidelityError> {
        let file = std::fs::File::open(path).map_err(|e| FidelityError::Csv(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.scores.keys().map(String::as_str)
    }

    pub fn scores(&self, model: &str) -> Option<&[(String, u8)]> {
        self.scores.get(model).map(Vec::as_slice)
    }
}

/// Mean score and 1..=5 histogram for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelScores {
    pub model: String,
    pub count: usize,
    pub mean: f64,
    pub histogram: [usize; 5],
}

/// Per-model summaries in lexicographic model order.
pub fn aggregate_human_scores(set: &HumanScoreSet) -> Vec<ModelScores> {
    set.scores
        .iter()
        .filter(|(_, s)| !s.is_empty())
        .map(|(model, s)| {
            let mut histogram = [0usize; 5];
            for &(_, v) in s {
                histogram[usize::from(v) - 1] += 1;
            }
            let total: usize = s.iter().map(|&(_, v)| usize::from(v)).sum();
            ModelScores { model: model.clone(), count: s.len(), mean: total as f64 / s.len() as f64, histogram }
        })
        .collect()
}
