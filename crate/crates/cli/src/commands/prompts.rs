use std::collections::HashMap;
use std::path::Path;

use fgvd_core::corpus::{load_corpus, split_view, CorpusRecord, Split};
use fgvd_core::icl::{assemble_bundle, select_shots, PromptBundle, Shot, ShotCandidate, ShotQuery};
use fgvd_core::Vector;
use rayon::prelude::*;

use super::vectors_by_id;
use crate::args::PromptsRun;
use crate::{thread_pool, write_output, CliError};

fn optional_vectors(path: &Option<std::path::PathBuf>) -> Result<HashMap<String, Vector>, CliError> {
    match path {
        Some(p) => vectors_by_id(p),
        None => Ok(HashMap::new()),
    }
}

fn candidates(
    records: &[CorpusRecord],
    images: &HashMap<String, Vector>,
    texts: &HashMap<String, Vector>,
) -> Vec<ShotCandidate> {
    records
        .iter()
        .map(|r| ShotCandidate {
            id: r.id.clone(),
            category: Some(r.label.clone()),
            description: r.text.clone(),
            image_vector: images.get(&r.id).cloned(),
            text_vector: texts.get(&r.id).cloned(),
        })
        .collect()
}

fn pool_records(
    cfg: &PromptsRun,
    corpus_records: &[CorpusRecord],
    pool: Option<&Path>,
) -> Result<Vec<CorpusRecord>, CliError> {
    match pool {
        Some(p) if cfg.spec.strategy == fgvd_core::icl::Strategy::FixedPool => Ok(load_corpus(p)?.records),
        _ => Ok(split_view(corpus_records, Split::Support)),
    }
}

pub fn run(cfg: &PromptsRun) -> Result<String, CliError> {
    thread_pool()?.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &PromptsRun) -> Result<String, CliError> {
    let corpus = load_corpus(&cfg.text)?;
    let queries = split_view(&corpus.records, Split::Test);
    if queries.is_empty() {
        return Err(CliError::Data(format!("{}: test split is empty", cfg.text.display())));
    }
    let images = optional_vectors(&cfg.image_vectors)?;
    let texts = optional_vectors(&cfg.text_vectors)?;
    let drafts = optional_vectors(&cfg.draft_vectors)?;
    let pool = candidates(&pool_records(cfg, &corpus.records, cfg.pool.as_deref())?, &images, &texts);

    let category = cfg.category.as_deref();
    let shot_question = cfg.template.question(category)?;
    let query_question = cfg.template.render_zero_shot(category)?;

    let bundles: Vec<PromptBundle> = queries
        .par_iter()
        .map(|q| {
            let query = ShotQuery {
                id: q.id.clone(),
                image_vector: images.get(&q.id).cloned(),
                draft_vector: drafts.get(&q.id).cloned(),
            };
            let shots: Vec<Shot> = select_shots(&cfg.spec, &pool, &query)?
                .into_iter()
                .map(|c| Shot { id: c.id.clone(), question: shot_question.clone(), description: c.description.clone() })
                .collect();
            Ok(assemble_bundle(&cfg.template, &q.id, &shots, &query_question, cfg.max_new_tokens))
        })
        .collect::<Result<_, CliError>>()?;

    let mut jsonl = String::new();
    for b in &bundles {
        jsonl.push_str(&b.to_json_line());
        jsonl.push('\n');
    }
    write_output(&cfg.out, "prompts.jsonl", &jsonl)?;
    Ok(format!(
        "prompts: {} bundles, strategy={}, n_shots={}, seed={}, template={}",
        bundles.len(),
        cfg.spec.strategy.as_str(),
        cfg.spec.n_shots,
        cfg.spec.seed,
        cfg.template.id
    ))
}
