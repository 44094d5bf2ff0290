//! One module per subcommand. Each `run` writes its reports and returns the
//! one-line summary printed on stdout.

pub mod classify;
pub mod fidelity;
pub mod prompts;
pub mod validate;

use std::collections::HashMap;
use std::path::Path;

use fgvd_core::corpus::{load_corpus, Corpus};
use fgvd_core::Vector;

use crate::CliError;

/// Loads a corpus and indexes its vectors by id. Records without a vector are skipped.
pub(crate) fn vectors_by_id(path: &Path) -> Result<HashMap<String, Vector>, CliError> {
    let corpus: Corpus = load_corpus(path)?;
    Ok(corpus.records.into_iter().filter_map(|r| r.vector.map(|v| (r.id, Vector::from_f32(&v)))).collect())
}
