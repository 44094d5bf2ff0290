//! Run configuration: a TOML file with one flat section per subcommand,
//! merged with command-line flags (flags win).
//!
//! ```toml
//! dataset = "cub200"
//! out = "reports"
//! seed = 7
//!
//! [classify]
//! vectors = ["clip_text.fgvd.jsonl"]
//! text = "descriptions.fgvd.jsonl"
//! tfidf = true
//! k_range = "3:30"
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scale_presentation: Option<bool>,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub fidelity: FidelitySection,
    #[serde(default)]
    pub prompts: PromptsSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default)]
    pub files: Vec<PathBuf>,
    #[serde(default)]
    pub pairs: Vec<PathBuf>,
    #[serde(default)]
    pub features: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    #[serde(default)]
    pub vectors: Vec<PathBuf>,
    pub text: Option<PathBuf>,
    pub tfidf: Option<bool>,
    pub method: Option<String>,
    pub k: Option<usize>,
    pub k_range: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelitySection {
    pub pairs: Option<PathBuf>,
    pub features_original: Option<PathBuf>,
    pub features_reconstructed: Option<PathBuf>,
    pub image_vectors: Option<PathBuf>,
    pub text_vectors: Option<PathBuf>,
    pub reconstructed_image_vectors: Option<PathBuf>,
    pub human_scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptsSection {
    pub text: Option<PathBuf>,
    pub template: Option<String>,
    pub question_pattern: Option<String>,
    pub category: Option<String>,
    pub answer_prefix: Option<String>,
    pub strategy: Option<String>,
    pub n_shots: Option<usize>,
    pub pool: Option<PathBuf>,
    pub image_vectors: Option<PathBuf>,
    pub text_vectors: Option<PathBuf>,
    pub draft_vectors: Option<PathBuf>,
    pub max_new_tokens: Option<u32>,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        rebase(base, p);
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Usage(format!("{}: path not found", path.display())),
            _ => CliError::Usage(format!("{}: {e}", path.display())),
        })?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        rebase_opt(base, &mut self.out);
        let v = &mut self.validate;
        v.files.iter_mut().chain(&mut v.pairs).chain(&mut v.features).for_each(|p| rebase(base, p));
        let c = &mut self.classify;
        c.vectors.iter_mut().for_each(|p| rebase(base, p));
        rebase_opt(base, &mut c.text);
        let f = &mut self.fidelity;
        for p in [
            &mut f.pairs,
            &mut f.features_original,
            &mut f.features_reconstructed,
            &mut f.image_vectors,
            &mut f.text_vectors,
            &mut f.reconstructed_image_vectors,
            &mut f.human_scores,
        ] {
            rebase_opt(base, p);
        }
        let p = &mut self.prompts;
        for q in [&mut p.text, &mut p.pool, &mut p.image_vectors, &mut p.text_vectors, &mut p.draft_vectors] {
            rebase_opt(base, q);
        }
    }

    /// Every file the config points at, tagged with its format.
    pub fn referenced_files(&self) -> Vec<(FileKind, PathBuf)> {
        let mut out = Vec::new();
        let corpus = |out: &mut Vec<_>, p: &Option<PathBuf>| {
            if let Some(p) = p {
                out.push((FileKind::Corpus, p.clone()));
            }
        };
        out.extend(self.validate.files.iter().map(|p| (FileKind::Corpus, p.clone())));
        out.extend(self.validate.pairs.iter().map(|p| (FileKind::Pairs, p.clone())));
        out.extend(self.validate.features.iter().map(|p| (FileKind::Features, p.clone())));
        out.extend(self.classify.vectors.iter().map(|p| (FileKind::Corpus, p.clone())));
        corpus(&mut out, &self.classify.text);
        let f = &self.fidelity;
        if let Some(p) = &f.pairs {
            out.push((FileKind::Pairs, p.clone()));
        }
        for p in [&f.features_original, &f.features_reconstructed].into_iter().flatten() {
            out.push((FileKind::Features, p.clone()));
        }
        for p in [&f.image_vectors, &f.text_vectors, &f.reconstructed_image_vectors] {
            corpus(&mut out, p);
        }
        let p = &self.prompts;
        for q in [&p.text, &p.pool, &p.image_vectors, &p.text_vectors, &p.draft_vectors] {
            corpus(&mut out, q);
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|(k, p)| seen.insert((*k, p.clone())));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FileKind {
    Corpus,
    Pairs,
    Features,
}

impl FileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FileKind::Corpus => "corpus",
            FileKind::Pairs => "pairs",
            FileKind::Features => "features",
        }
    }
}

/// Parses `A:B` into the inclusive range `A..=B`.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("invalid k range {s:?}; expected A:B with 1 <= A <= B"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}
