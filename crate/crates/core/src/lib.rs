//! Evaluation engine for fine-grained visual descriptions.
//!
//! The crate never runs a neural model. It consumes corpus files produced by
//! an external extractor and measures two things about generated descriptions:
//!
//! - **distinctiveness**: how well a description can be classified by
//!   retrieving similar descriptions from a labelled support set
//!   ([`trac`]), with embeddings either ingested from the extractor or built
//!   natively with TF-IDF ([`textvec`]);
//! - **fidelity**: how well a description (or an image reconstructed from it)
//!   agrees with the original image ([`fidelity`]).
//!
//! [`icl`] builds the zero-shot and n-shot prompt bundles the extractor feeds
//! to its generator, and [`corpus`] owns every on-disk format.

pub mod corpus;
pub mod fidelity;
pub mod icl;
pub mod textvec;
pub mod trac;

mod decimal;

pub use corpus::{CorpusManifest, CorpusRecord, Split};
pub use textvec::{cosine, TfidfModel, Vector};
pub use trac::{ClassificationOutcome, Method, SupportIndex};

// FeaturePopulation::from_moments takes nalgebra matrices.
pub use nalgebra;
