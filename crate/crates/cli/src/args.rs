//! Command-line flags and their merge with the config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fgvd_core::icl::{PromptTemplate, ShotSelectionSpec, Strategy};
use fgvd_core::trac::Method;

use crate::config::{parse_k_range, ConfigFile, FileKind};
use crate::CliError;

const DEFAULT_K: usize = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fgvd-eval",
    version,
    about = "Distinctiveness and fidelity evaluation for fine-grained visual descriptions"
)]
pub struct Cli {
    /// TOML run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every referenced corpus, pair manifest and feature file.
    Validate(ValidateArgs),
    /// Retrieval classification reports (top1, topk, centroid) and k-sweeps.
    Classify(ClassifyArgs),
    /// SSIM, FID, CLIP-S and CLIP-S-I reports.
    Fidelity(FidelityArgs),
    /// Zero-shot / n-shot prompt bundles for the test split.
    Prompts(PromptsArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// SSIM x100 and two-decimal rounding in reports.
    #[arg(long)]
    pub scale_presentation: bool,
}

struct Common {
    dataset: String,
    out: Option<PathBuf>,
    seed: u64,
    scaled: bool,
}

impl CommonArgs {
    fn merge(&self, file: &ConfigFile) -> Common {
        Common {
            dataset: self.dataset.clone().or_else(|| file.dataset.clone()).unwrap_or_else(|| "unnamed".into()),
            out: self.out.clone().or_else(|| file.out.clone()),
            seed: self.seed.or(file.seed).unwrap_or(0),
            scaled: self.scale_presentation || file.scale_presentation.unwrap_or(false),
        }
    }
}

fn require_out(out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out.ok_or_else(|| CliError::Usage("no output directory; pass --out DIR or set `out` in the config".into()))
}

fn pick_vec(flag: &[PathBuf], file: Vec<PathBuf>) -> Vec<PathBuf> {
    if flag.is_empty() {
        file
    } else {
        flag.to_vec()
    }
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Corpus files (`*.fgvd.jsonl`).
    pub files: Vec<PathBuf>,
    /// Image-pair manifests.
    #[arg(long)]
    pub pairs: Vec<PathBuf>,
    /// Feature-population files.
    #[arg(long)]
    pub features: Vec<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone)]
pub struct ValidateRun {
    pub files: Vec<(FileKind, PathBuf)>,
    pub out: Option<PathBuf>,
}

impl ValidateArgs {
    pub fn merge(&self, file: ConfigFile) -> ValidateRun {
        let common = self.common.merge(&file);
        let mut files: Vec<(FileKind, PathBuf)> = Vec::new();
        files.extend(self.files.iter().map(|p| (FileKind::Corpus, p.clone())));
        files.extend(self.pairs.iter().map(|p| (FileKind::Pairs, p.clone())));
        files.extend(self.features.iter().map(|p| (FileKind::Features, p.clone())));
        files.extend(file.referenced_files());
        ValidateRun { files, out: common.out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Top1,
    Topk,
    Centroid,
}

impl std::str::FromStr for MethodArg {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <MethodArg as ValueEnum>::from_str(s, true)
            .map_err(|_| CliError::Usage(format!("unknown method {s:?}; expected top1, topk or centroid")))
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Embedding corpora, one retrieval backend each.
    #[arg(long)]
    pub vectors: Vec<PathBuf>,
    /// Description corpus for the TF-IDF backend.
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Add a TF-IDF backend fitted on the support descriptions of --text.
    #[arg(long)]
    pub tfidf: bool,
    /// Run one method instead of all three.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Inclusive top-k sweep range, e.g. 3:30.
    #[arg(long, value_name = "A:B")]
    pub k_range: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone)]
pub struct ClassifyRun {
    pub dataset: String,
    pub out: PathBuf,
    pub vectors: Vec<PathBuf>,
    pub text: Option<PathBuf>,
    pub tfidf: bool,
    pub methods: Vec<Method>,
    pub k_range: Option<Vec<usize>>,
    pub scaled: bool,
}

impl ClassifyArgs {
    pub fn merge(&self, file: ConfigFile) -> Result<ClassifyRun, CliError> {
        let common = self.common.merge(&file);
        let c = file.classify;
        let method = match (self.method, c.method.as_deref()) {
            (Some(m), _) => Some(m),
            (None, Some(s)) => Some(s.parse::<MethodArg>()?),
            (None, None) => None,
        };
        let k = self.k.or(c.k).unwrap_or(DEFAULT_K);
        let k_range = self.k_range.clone().or(c.k_range).map(|s| parse_k_range(&s)).transpose()?;
        let methods = match method {
            Some(MethodArg::Top1) => vec![Method::Top1],
            Some(MethodArg::Topk) => vec![Method::TopK(k)],
            Some(MethodArg::Centroid) => vec![Method::Centroid],
            None => vec![Method::Top1, Method::TopK(k), Method::Centroid],
        };
        let tfidf = self.tfidf || c.tfidf.unwrap_or(false);
        let text = self.text.clone().or(c.text);
        if tfidf && text.is_none() {
            return Err(CliError::Usage("--tfidf needs a description corpus (--text)".into()));
        }
        let vectors = pick_vec(&self.vectors, c.vectors);
        if vectors.is_empty() && !tfidf {
            return Err(CliError::Usage("nothing to classify; pass --vectors or --tfidf with --text".into()));
        }
        Ok(ClassifyRun {
            dataset: common.dataset,
            out: require_out(common.out)?,
            vectors,
            text,
            tfidf,
            methods,
            k_range,
            scaled: common.scaled,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct FidelityArgs {
    /// Image-pair manifest for SSIM.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Features of the original images (FID).
    #[arg(long)]
    pub features_original: Option<PathBuf>,
    /// Features of the reconstructed images (FID).
    #[arg(long)]
    pub features_reconstructed: Option<PathBuf>,
    /// Image embeddings of the originals (CLIP-S, CLIP-S-I).
    #[arg(long)]
    pub image_vectors: Option<PathBuf>,
    /// Text embeddings of the descriptions (CLIP-S).
    #[arg(long)]
    pub text_vectors: Option<PathBuf>,
    /// Image embeddings of the reconstructions (CLIP-S-I).
    #[arg(long)]
    pub reconstructed_image_vectors: Option<PathBuf>,
    /// `model,id,score` CSV of 1-5 human ratings.
    #[arg(long)]
    pub human_scores: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone)]
pub struct FidelityRun {
    pub dataset: String,
    pub out: PathBuf,
    pub pairs: Option<PathBuf>,
    pub features: Option<(PathBuf, PathBuf)>,
    pub image_vectors: Option<PathBuf>,
    pub text_vectors: Option<PathBuf>,
    pub reconstructed_image_vectors: Option<PathBuf>,
    pub human_scores: Option<PathBuf>,
    pub scaled: bool,
}

impl FidelityArgs {
    pub fn merge(&self, file: ConfigFile) -> Result<FidelityRun, CliError> {
        let common = self.common.merge(&file);
        let f = file.fidelity;
        let features = match (
            self.features_original.clone().or(f.features_original),
            self.features_reconstructed.clone().or(f.features_reconstructed),
        ) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(CliError::Usage("FID needs both --features-original and --features-reconstructed".into())),
        };
        let run = FidelityRun {
            dataset: common.dataset,
            out: require_out(common.out)?,
            pairs: self.pairs.clone().or(f.pairs),
            features,
            image_vectors: self.image_vectors.clone().or(f.image_vectors),
            text_vectors: self.text_vectors.clone().or(f.text_vectors),
            reconstructed_image_vectors: self.reconstructed_image_vectors.clone().or(f.reconstructed_image_vectors),
            human_scores: self.human_scores.clone().or(f.human_scores),
            scaled: common.scaled,
        };
        let needs_images = run.text_vectors.is_some() || run.reconstructed_image_vectors.is_some();
        if needs_images && run.image_vectors.is_none() {
            return Err(CliError::Usage("CLIP-S and CLIP-S-I need --image-vectors".into()));
        }
        if run.pairs.is_none() && run.features.is_none() && !needs_images && run.human_scores.is_none() {
            return Err(CliError::Usage("no fidelity inputs given".into()));
        }
        Ok(run)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PromptsArgs {
    /// Description corpus; its test split are the queries, its support split the shot pool.
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Built-in template: `local` (category-conditioned) or `global`.
    #[arg(long)]
    pub template: Option<String>,
    /// Custom question with at most one `{Category}` placeholder.
    #[arg(long)]
    pub question_pattern: Option<String>,
    /// General category substituted into the question, e.g. "bird".
    #[arg(long)]
    pub category: Option<String>,
    /// Text appended after the query question, e.g. "It has".
    #[arg(long)]
    pub answer_prefix: Option<String>,
    /// RS, SIIR, STTR or FIXED_POOL.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub n_shots: Option<usize>,
    /// Curated shot list for FIXED_POOL.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Image embeddings for SIIR (pool and queries).
    #[arg(long)]
    pub image_vectors: Option<PathBuf>,
    /// Text embeddings of the pool descriptions for STTR.
    #[arg(long)]
    pub text_vectors: Option<PathBuf>,
    /// Text embeddings of each query's zero-shot draft for STTR.
    #[arg(long)]
    pub draft_vectors: Option<PathBuf>,
    /// Generation length passed through to the extractor.
    #[arg(long)]
    pub max_new_tokens: Option<u32>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone)]
pub struct PromptsRun {
    pub out: PathBuf,
    pub text: PathBuf,
    pub template: PromptTemplate,
    pub category: Option<String>,
    pub spec: ShotSelectionSpec,
    pub pool: Option<PathBuf>,
    pub image_vectors: Option<PathBuf>,
    pub text_vectors: Option<PathBuf>,
    pub draft_vectors: Option<PathBuf>,
    pub max_new_tokens: Option<u32>,
}

impl PromptsArgs {
    pub fn merge(&self, file: ConfigFile) -> Result<PromptsRun, CliError> {
        let common = self.common.merge(&file);
        let p = file.prompts;
        let text = self
            .text
            .clone()
            .or(p.text)
            .ok_or_else(|| CliError::Usage("prompts needs a description corpus (--text)".into()))?;
        let template_id = self.template.clone().or(p.template);
        let pattern = self.question_pattern.clone().or(p.question_pattern);
        let answer_prefix = self.answer_prefix.clone().or(p.answer_prefix);
        let mut template = match (pattern, template_id) {
            (Some(pattern), id) => PromptTemplate::new(id.as_deref().unwrap_or("custom"), &pattern, None)?,
            (None, Some(id)) => PromptTemplate::builtin(&id)
                .ok_or_else(|| CliError::Usage(format!("unknown template {id:?}; expected local or global")))?,
            (None, None) => PromptTemplate::local(),
        };
        if let Some(prefix) = answer_prefix {
            template = template.with_answer_prefix(&prefix);
        }
        let strategy: Strategy = self.strategy.clone().or(p.strategy).as_deref().unwrap_or("RS").parse()?;
        let spec = ShotSelectionSpec { strategy, n_shots: self.n_shots.or(p.n_shots).unwrap_or(0), seed: common.seed };
        let run = PromptsRun {
            out: require_out(common.out)?,
            text,
            template,
            category: self.category.clone().or(p.category),
            spec,
            pool: self.pool.clone().or(p.pool),
            image_vectors: self.image_vectors.clone().or(p.image_vectors),
            text_vectors: self.text_vectors.clone().or(p.text_vectors),
            draft_vectors: self.draft_vectors.clone().or(p.draft_vectors),
            max_new_tokens: self.max_new_tokens.or(p.max_new_tokens),
        };
        if run.spec.n_shots > 0 {
            let missing = match strategy {
                Strategy::Siir if run.image_vectors.is_none() => Some("SIIR needs --image-vectors"),
                Strategy::Sttr if run.text_vectors.is_none() || run.draft_vectors.is_none() => {
                    Some("STTR needs --text-vectors and --draft-vectors")
                }
                Strategy::FixedPool if run.pool.is_none() => Some("FIXED_POOL needs --pool"),
                _ => None,
            };
            if let Some(msg) = missing {
                return Err(CliError::Usage(msg.into()));
            }
        }
        Ok(run)
    }
}
