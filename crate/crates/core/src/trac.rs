//! Retrieval-based classification of test descriptions against a labelled
//! support set.
//!
//! Every similarity is a cosine, computed as a dot product between
//! L2-normalized vectors. Three classifiers share one index:
//!
//! - [`SupportIndex::classify_top1`]: label of the single most similar row.
//!   Rows with equal similarity are ordered by row index, lowest first.
//! - [`SupportIndex::classify_topk`]: modal label among the `k` most similar
//!   rows. Label ties are broken by the larger summed similarity, then by
//!   holding the nearest neighbour, then by lexicographic label order.
//! - [`SupportIndex::classify_centroid`]: label of the most similar class
//!   centroid, where a centroid is the normalized mean of the class's
//!   normalized vectors. Ties go to the lexicographically first label.
//!
//! [`evaluate`] reports accuracy as the fraction of test items whose
//! predicted label equals the true label.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::corpus::CorpusRecord;
use crate::decimal;
use crate::textvec::{dot, Vector};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TracError {
    #[error("support set is empty")]
    EmptySupport,
    #[error("test set is empty")]
    EmptyTests,
    #[error("record {id:?} has no vector")]
    MissingVector { id: String },
    #[error("record {id:?} has dimension {found}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("k = {k} is outside [1, {max}]")]
    KOutOfRange { k: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Top1,
    TopK(usize),
    Centroid,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Top1 => "top1",
            Method::TopK(_) => "topk",
            Method::Centroid => "centroid",
        }
    }

    pub fn k(self) -> Option<usize> {
        match self {
            Method::TopK(k) => Some(k),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::TopK(k) => write!(f, "topk({k})"),
            m => f.write_str(m.name()),
        }
    }
}

/// One retrieved support row (or class centroid) and its similarity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub id: String,
    #[serde(serialize_with = "decimal::six_places")]
    pub sim: f64,
    #[serde(skip)]
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    /// Evidence sorted by descending similarity.
    pub neighbors: Vec<Neighbor>,
}

#[derive(Debug, Clone)]
struct Centroid {
    label: String,
    vector: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SupportIndex {
    dim: usize,
    ids: Vec<String>,
    labels: Vec<String>,
    rows: Vec<f64>,
    // sorted by label
    centroids: Vec<Centroid>,
}

fn normalize_in_place(v: &mut [f64]) {
    let n = crate::textvec::l2_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Descending similarity, then ascending row index.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

impl SupportIndex {
    /// Builds an index from `(id, label, vector)` rows.
    pub fn from_rows<I, S>(rows: I) -> Result<Self, TracError>
    where
        I: IntoIterator<Item = (S, S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut flat = Vec::new();
        let mut dim = None;
        for (id, label, mut v) in rows {
            let id = id.into();
            let expected = *dim.get_or_insert(v.len());
            if v.len() != expected {
                return Err(TracError::DimensionMismatch { id, expected, found: v.len() });
            }
            normalize_in_place(&mut v);
            flat.extend_from_slice(&v);
            ids.push(id);
            labels.push(label.into());
        }
        let dim = dim.ok_or(TracError::EmptySupport)?;

        let mut sums: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (i, label) in labels.iter().enumerate() {
            let acc = sums.entry(label.as_str()).or_insert_with(|| vec![0.0; dim]);
            for (a, x) in acc.iter_mut().zip(&flat[i * dim..(i + 1) * dim]) {
                *a += x;
            }
        }
        let counts = labels.iter().fold(BTreeMap::<&str, usize>::new(), |mut m, l| {
            *m.entry(l.as_str()).or_default() += 1;
            m
        });
        let centroids = sums
            .into_iter()
            .map(|(label, mut v)| {
                let n = counts[label] as f64;
                v.iter_mut().for_each(|x| *x /= n);
                normalize_in_place(&mut v);
                Centroid { label: label.to_string(), vector: v }
            })
            .collect();

        Ok(Self { dim, ids, labels, rows: flat, centroids })
    }

    /// Builds an index from support records; every record needs a vector.
    pub fn build(support: &[CorpusRecord]) -> Result<Self, TracError> {
        let rows = support
            .iter()
            .map(|r| {
                let v = r.vector.as_ref().ok_or_else(|| TracError::MissingVector { id: r.id.clone() })?;
                Ok((r.id.as_str(), r.label.as_str(), v.iter().map(|&x| f64::from(x)).collect()))
            })
            .collect::<Result<Vec<_>, TracError>>()?;
        Self::from_rows(rows)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// `(label, normalized centroid)` in lexicographic label order.
    pub fn centroids(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.centroids.iter().map(|c| (c.label.as_str(), c.vector.as_slice()))
    }

    fn unit_query(&self, query: &Vector) -> Result<Vec<f64>, TracError> {
        if query.dim() != self.dim {
            return Err(TracError::DimensionMismatch { id: "<query>".into(), expected: self.dim, found: query.dim() });
        }
        Ok(query.normalized().into_components())
    }

    fn check_k(&self, k: usize) -> Result<(), TracError> {
        if k == 0 || k > self.len() {
            return Err(TracError::KOutOfRange { k, max: self.len() });
        }
        Ok(())
    }

    fn neighbor(&self, row: usize, sim: f64) -> Neighbor {
        Neighbor { id: self.ids[row].clone(), sim, row }
    }

    /// The `k` most similar rows for a unit query, in rank order.
    fn nearest(&self, unit: &[f64], k: usize) -> Vec<(usize, f64)> {
        let mut scored: Vec<(usize, f64)> = (0..self.len()).map(|i| (i, dot(unit, self.row(i)))).collect();
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(rank_order);
        scored
    }

    fn vote(&self, ranked: &[(usize, f64)]) -> String {
        let mut tally: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for &(row, sim) in ranked {
            let e = tally.entry(self.labels[row].as_str()).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += sim;
        }
        let nearest = self.labels[ranked[0].0].as_str();
        // BTreeMap iterates labels in ascending order, so `min_by` keeps the
        // lexicographically first label among full ties.
        let (label, _) = tally
            .iter()
            .min_by(|(la, (ca, sa)), (lb, (cb, sb))| {
                cb.cmp(ca).then(sb.total_cmp(sa)).then((**lb == nearest).cmp(&(**la == nearest))).then(la.cmp(lb))
            })
            .expect("k >= 1");
        label.to_string()
    }

    pub fn classify_top1(&self, query: &Vector) -> Result<Prediction, TracError> {
        let unit = self.unit_query(query)?;
        Ok(self.topk_prediction(&unit, 1, false))
    }

    pub fn classify_topk(&self, query: &Vector, k: usize) -> Result<Prediction, TracError> {
        self.check_k(k)?;
        let unit = self.unit_query(query)?;
        Ok(self.topk_prediction(&unit, k, true))
    }

    fn topk_prediction(&self, unit: &[f64], k: usize, vote: bool) -> Prediction {
        let ranked = self.nearest(unit, k);
        if vote {
            self.topk_from_ranked(&ranked)
        } else {
            let (row, sim) = ranked[0];
            Prediction { label: self.labels[row].clone(), neighbors: vec![self.neighbor(row, sim)] }
        }
    }

    fn topk_from_ranked(&self, ranked: &[(usize, f64)]) -> Prediction {
        Prediction { label: self.vote(ranked), neighbors: ranked.iter().map(|&(r, s)| self.neighbor(r, s)).collect() }
    }

    pub fn classify_centroid(&self, query: &Vector) -> Result<Prediction, TracError> {
        let unit = self.unit_query(query)?;
        Ok(self.centroid_prediction(&unit))
    }

    fn centroid_prediction(&self, unit: &[f64]) -> Prediction {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.centroids.iter().enumerate() {
            let sim = dot(unit, &c.vector);
            // strict > keeps the earliest (lexicographically first) label on ties
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((i, sim));
            }
        }
        let (i, sim) = best.expect("index has at least one class");
        let label = self.centroids[i].label.clone();
        Prediction { neighbors: vec![Neighbor { id: label.clone(), sim, row: i }], label }
    }

    pub fn classify(&self, query: &Vector, method: Method) -> Result<Prediction, TracError> {
        match method {
            Method::Top1 => self.classify_top1(query),
            Method::TopK(k) => self.classify_topk(query, k),
            Method::Centroid => self.classify_centroid(query),
        }
    }
}

/// Per-test-item evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemOutcome {
    pub id: String,
    pub y: String,
    pub y_hat: String,
    pub neighbors: Vec<Neighbor>,
}

impl ItemOutcome {
    pub fn is_correct(&self) -> bool {
        self.y == self.y_hat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationOutcome {
    pub method: Method,
    pub items: Vec<ItemOutcome>,
    pub correct: usize,
    pub accuracy: f64,
}

impl ClassificationOutcome {
    fn from_items(method: Method, items: Vec<ItemOutcome>) -> Self {
        let correct = items.iter().filter(|i| i.is_correct()).count();
        let accuracy = correct as f64 / items.len() as f64;
        Self { method, items, correct, accuracy }
    }

    pub fn total(&self) -> usize {
        self.items.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outcome serializes")
    }
}

impl Serialize for ClassificationOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ClassificationOutcome", 4)?;
        st.serialize_field("method", self.method.name())?;
        st.serialize_field("k", &self.method.k())?;
        st.serialize_field("accuracy", &self.accuracy)?;
        st.serialize_field("items", &self.items)?;
        st.end()
    }
}

/// A labelled test vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TestQuery {
    pub id: String,
    pub label: String,
    pub vector: Vector,
}

impl TestQuery {
    pub fn from_records(tests: &[CorpusRecord]) -> Result<Vec<TestQuery>, TracError> {
        tests
            .iter()
            .map(|r| {
                let v = r.vector.as_ref().ok_or_else(|| TracError::MissingVector { id: r.id.clone() })?;
                Ok(TestQuery { id: r.id.clone(), label: r.label.clone(), vector: Vector::from_f32(v) })
            })
            .collect()
    }
}

fn unit_queries(index: &SupportIndex, tests: &[TestQuery]) -> Result<Vec<Vec<f64>>, TracError> {
    if tests.is_empty() {
        return Err(TracError::EmptyTests);
    }
    tests
        .iter()
        .map(|q| {
            if q.vector.dim() != index.dim {
                return Err(TracError::DimensionMismatch {
                    id: q.id.clone(),
                    expected: index.dim,
                    found: q.vector.dim(),
                });
            }
            Ok(q.vector.normalized().into_components())
        })
        .collect()
}

fn item(q: &TestQuery, pred: Prediction) -> ItemOutcome {
    ItemOutcome { id: q.id.clone(), y: q.label.clone(), y_hat: pred.label, neighbors: pred.neighbors }
}

/// Classifies every test vector with `method` and reports accuracy.
///
/// Queries are spread over the current rayon pool; results are collected in
/// input order, so the outcome does not depend on the worker count.
pub fn evaluate_queries(
    index: &SupportIndex,
    tests: &[TestQuery],
    method: Method,
) -> Result<ClassificationOutcome, TracError> {
    if let Method::TopK(k) = method {
        index.check_k(k)?;
    }
    let units = unit_queries(index, tests)?;
    let items = tests
        .par_iter()
        .zip(&units)
        .map(|(q, unit)| {
            let pred = match method {
                Method::Top1 => index.topk_prediction(unit, 1, false),
                Method::TopK(k) => index.topk_prediction(unit, k, true),
                Method::Centroid => index.centroid_prediction(unit),
            };
            item(q, pred)
        })
        .collect();
    Ok(ClassificationOutcome::from_items(method, items))
}

/// [`evaluate_queries`] over corpus records; every record needs a vector.
pub fn evaluate(
    index: &SupportIndex,
    tests: &[CorpusRecord],
    method: Method,
) -> Result<ClassificationOutcome, TracError> {
    if tests.is_empty() {
        return Err(TracError::EmptyTests);
    }
    evaluate_queries(index, &TestQuery::from_records(tests)?, method)
}

/// Top-k outcomes for several `k`, ranking each query's neighbours once.
pub fn k_sweep_queries(
    index: &SupportIndex,
    tests: &[TestQuery],
    k_values: &[usize],
) -> Result<Vec<ClassificationOutcome>, TracError> {
    for &k in k_values {
        index.check_k(k)?;
    }
    let units = unit_queries(index, tests)?;
    let Some(&k_max) = k_values.iter().max() else {
        return Ok(Vec::new());
    };
    let ranked: Vec<Vec<(usize, f64)>> = units.par_iter().map(|u| index.nearest(u, k_max)).collect();
    Ok(k_values
        .iter()
        .map(|&k| {
            let items = tests.iter().zip(&ranked).map(|(q, r)| item(q, index.topk_from_ranked(&r[..k]))).collect();
            ClassificationOutcome::from_items(Method::TopK(k), items)
        })
        .collect())
}

pub fn k_sweep_outcomes(
    index: &SupportIndex,
    tests: &[CorpusRecord],
    k_values: &[usize],
) -> Result<Vec<ClassificationOutcome>, TracError> {
    if tests.is_empty() {
        return Err(TracError::EmptyTests);
    }
    k_sweep_queries(index, &TestQuery::from_records(tests)?, k_values)
}

/// `(k, accuracy)` for each requested `k`.
pub fn k_sweep(
    index: &SupportIndex,
    tests: &[CorpusRecord],
    k_values: &[usize],
) -> Result<Vec<(usize, f64)>, TracError> {
    Ok(k_sweep_outcomes(index, tests, k_values)?
        .into_iter()
        .map(|o| (o.method.k().expect("sweep is top-k"), o.accuracy))
        .collect())
}
