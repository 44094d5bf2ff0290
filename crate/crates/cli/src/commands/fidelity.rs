use std::path::Path;

use fgvd_core::corpus::{join_on_id, load_corpus, load_features, load_pairs, CorpusRecord};
use fgvd_core::fidelity::{
    aggregate_fidelity, aggregate_human_scores, clip_s, clip_s_i, frechet_distance, ssim, FeaturePopulation,
    HumanScoreSet, LumaImage, Metric, Presentation, ScoredPair,
};
use fgvd_core::Vector;
use rayon::prelude::*;

use crate::args::FidelityRun;
use crate::{thread_pool, write_output, CliError};

fn ssim_scores(manifest: &Path) -> Result<Vec<ScoredPair>, CliError> {
    let pairs = load_pairs(manifest)?;
    if pairs.is_empty() {
        return Err(CliError::Data(format!("{}: empty pair list", manifest.display())));
    }
    let base = manifest.parent().unwrap_or(Path::new(""));
    pairs
        .par_iter()
        .map(|p| {
            let (a, b) = p.resolve(base);
            let open = |path: &Path| {
                LumaImage::open(path).map_err(|e| CliError::Data(format!("pair {:?}: {}: {e}", p.id, path.display())))
            };
            let score = ssim(&open(&a)?, &open(&b)?).map_err(|e| CliError::Data(format!("pair {:?}: {e}", p.id)))?;
            Ok(ScoredPair { id: p.id.clone(), score, metric: Metric::Ssim })
        })
        .collect()
}

fn population(path: &Path) -> Result<FeaturePopulation, CliError> {
    let rows: Vec<Vec<f64>> =
        load_features(path)?.into_iter().map(|r| r.vector.into_iter().map(f64::from).collect()).collect();
    FeaturePopulation::fit(&rows).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn vector_of(r: &CorpusRecord, path: &Path) -> Result<Vector, CliError> {
    r.vector
        .as_deref()
        .map(Vector::from_f32)
        .ok_or_else(|| CliError::Data(format!("{}: record {:?} has no vector", path.display(), r.id)))
}

/// Scores every record of `left` against the same id in `right`.
fn paired_cosines(
    left: &Path,
    right: &Path,
    metric: Metric,
    score: fn(&Vector, &Vector) -> Result<f64, fgvd_core::fidelity::FidelityError>,
) -> Result<Vec<ScoredPair>, CliError> {
    let l = load_corpus(left)?;
    let r = load_corpus(right)?;
    join_on_id(&l.records, &r.records)?
        .into_iter()
        .map(|(a, b)| {
            let s = score(&vector_of(b, right)?, &vector_of(a, left)?)
                .map_err(|e| CliError::Data(format!("record {:?}: {e}", a.id)))?;
            Ok(ScoredPair { id: a.id.clone(), score: s, metric })
        })
        .collect()
}

pub fn run(cfg: &FidelityRun) -> Result<String, CliError> {
    thread_pool()?.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &FidelityRun) -> Result<String, CliError> {
    let mut pairs = Vec::new();
    if let Some(p) = &cfg.pairs {
        pairs.extend(ssim_scores(p)?);
    }
    if let (Some(images), Some(texts)) = (&cfg.image_vectors, &cfg.text_vectors) {
        // image first, text second
        pairs.extend(paired_cosines(texts, images, Metric::ClipS, clip_s)?);
    }
    if let (Some(images), Some(recon)) = (&cfg.image_vectors, &cfg.reconstructed_image_vectors) {
        pairs.extend(paired_cosines(recon, images, Metric::ClipSI, clip_s_i)?);
    }
    let fid = match &cfg.features {
        Some((orig, recon)) => Some(frechet_distance(&population(orig)?, &population(recon)?)?),
        None => None,
    };
    let mut written = Vec::new();
    if let Some(path) = &cfg.human_scores {
        if !path.exists() {
            return Err(CliError::Io(format!("{}: path not found", path.display())));
        }
        let set = HumanScoreSet::from_path(path)?;
        let json = serde_json::to_string(&aggregate_human_scores(&set)).expect("scores serialize");
        write_output(&cfg.out, "human_scores.json", &(json + "\n"))?;
        written.push("human_scores.json");
    }
    if pairs.is_empty() && fid.is_none() && !written.is_empty() {
        return Ok(format!("fidelity {}: wrote {}", cfg.dataset, written.join(", ")));
    }
    let report = aggregate_fidelity(&cfg.dataset, &pairs, fid)?;
    let presentation = Presentation { scaled: cfg.scaled };
    write_output(&cfg.out, "fidelity.json", &(report.to_json(presentation) + "\n"))?;
    write_output(&cfg.out, "fidelity.csv", &report.to_csv(presentation))?;
    let mut parts = Vec::new();
    let scale = |m: Metric, v: f64| if cfg.scaled && m == Metric::Ssim { v * 100.0 } else { v };
    for (m, s) in [(Metric::Ssim, report.ssim), (Metric::ClipSI, report.clip_s_i), (Metric::ClipS, report.clip_s)] {
        if let Some(s) = s {
            parts.push(format!("{m}={:.4} (n={})", scale(m, s.mean), s.count));
        }
    }
    if let Some(f) = report.fid {
        parts.push(format!("fid={f:.4}"));
    }
    Ok(format!("fidelity {}: {}", cfg.dataset, parts.join(", ")))
}
