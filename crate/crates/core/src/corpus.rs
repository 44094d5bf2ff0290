//! Corpus data model and on-disk formats.
//!
//! A corpus file (`*.fgvd.jsonl`) is JSON Lines: line 1 is the manifest
//! object `{name, dimension, class_list, support_count, test_count}`, every
//! following line is one record `{id, label, split, text, vector?,
//! source_image?}`. Vectors are 32-bit floats written as shortest
//! round-trip decimals. A dimension of 0 marks a text-only corpus.
//!
//! Two sibling formats live here as well: image-pair manifests
//! (`{id, original_path, reconstructed_path}` per line) and feature
//! populations (`{id, vector}` per line).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("line {line}: unparseable JSON: {message}")]
    Unparseable { line: usize, message: String },
    #[error("line {line}: missing manifest object")]
    MissingManifest { line: usize },
    #[error("line {line}: record {id:?} has vector length {found}, manifest dimension is {expected}")]
    DimensionMismatch { line: usize, id: String, expected: usize, found: usize },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first})")]
    DuplicateId { line: usize, id: String, first: usize },
    #[error("line {line}: unknown split {value:?} (expected \"support\" or \"test\")")]
    UnknownSplit { line: usize, value: String },
    #[error("line {line}: label {label:?} is not in the manifest class_list")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: record {id:?} has neither text nor vector")]
    EmptyRecord { line: usize, id: String },
    #[error("line {line}: manifest declares {declared} {split} records, file has {actual}")]
    CountMismatch { line: usize, split: Split, declared: usize, actual: usize },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

impl Violation {
    pub fn line(&self) -> usize {
        match self {
            Violation::Unparseable { line, .. }
            | Violation::MissingManifest { line }
            | Violation::DimensionMismatch { line, .. }
            | Violation::DuplicateId { line, .. }
            | Violation::UnknownSplit { line, .. }
            | Violation::UnknownLabel { line, .. }
            | Violation::EmptyRecord { line, .. }
            | Violation::CountMismatch { line, .. }
            | Violation::Invalid { line, .. } => *line,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: path not found")]
    NotFound { path: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {violation}")]
    Invalid { path: String, violation: Violation },
    #[error("ids missing from the joined corpus: {missing:?}")]
    MissingIds { missing: Vec<String> },
    #[error("duplicate id {id:?} in the joined corpus")]
    DuplicateJoinId { id: String },
}

impl CorpusError {
    /// True for schema or content violations, false for I/O problems.
    pub fn is_data_violation(&self) -> bool {
        !matches!(self, CorpusError::NotFound { .. } | CorpusError::Io { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Support,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Support => "support",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "support" => Ok(Split::Support),
            "test" => Ok(Split::Test),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub label: String,
    pub split: Split,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub dimension: usize,
    pub class_list: Vec<String>,
    pub support_count: usize,
    pub test_count: usize,
}

impl CorpusManifest {
    /// Manifest describing `records`, with classes in first-seen order.
    pub fn describe(name: &str, dimension: usize, records: &[CorpusRecord]) -> Self {
        let mut seen = HashSet::new();
        let class_list = records.iter().filter(|r| seen.insert(r.label.as_str())).map(|r| r.label.clone()).collect();
        Self {
            name: name.to_string(),
            dimension,
            class_list,
            support_count: records.iter().filter(|r| r.split == Split::Support).count(),
            test_count: records.iter().filter(|r| r.split == Split::Test).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub records: Vec<CorpusRecord>,
}

// Split is kept as a raw string here so an unknown value gets its own violation.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    label: String,
    split: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    vector: Option<Vec<f32>>,
    #[serde(default)]
    source_image: Option<String>,
}

fn read_text(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CorpusError::NotFound { path: path.display().to_string() }
        } else {
            CorpusError::Io { path: path.display().to_string(), source }
        }
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CorpusError> {
    fs::write(path, text).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

/// Parses corpus text and returns every violation found, in line order.
pub fn check_corpus(text: &str) -> (Option<Corpus>, Vec<Violation>) {
    let mut violations = Vec::new();
    let mut lines = numbered_lines(text);
    let manifest = match lines.next() {
        None => {
            violations.push(Violation::MissingManifest { line: 1 });
            return (None, violations);
        }
        Some((line, l)) => match serde_json::from_str::<CorpusManifest>(l) {
            Ok(m) => m,
            Err(e) => {
                violations.push(Violation::Unparseable { line, message: format!("manifest: {e}") });
                return (None, violations);
            }
        },
    };
    let classes: HashSet<&str> = manifest.class_list.iter().map(String::as_str).collect();
    let mut first_seen: HashMap<String, usize> = HashMap::new();
    let mut records = Vec::new();
    for (line, l) in lines {
        let raw: RawRecord = match serde_json::from_str(l) {
            Ok(r) => r,
            Err(e) => {
                violations.push(Violation::Unparseable { line, message: e.to_string() });
                continue;
            }
        };
        let split = match raw.split.parse::<Split>() {
            Ok(s) => s,
            Err(value) => {
                violations.push(Violation::UnknownSplit { line, value });
                continue;
            }
        };
        if let Some(&first) = first_seen.get(&raw.id) {
            violations.push(Violation::DuplicateId { line, id: raw.id.clone(), first });
        } else {
            first_seen.insert(raw.id.clone(), line);
        }
        if !classes.contains(raw.label.as_str()) {
            violations.push(Violation::UnknownLabel { line, label: raw.label.clone() });
        }
        match &raw.vector {
            Some(v) if v.len() != manifest.dimension => violations.push(Violation::DimensionMismatch {
                line,
                id: raw.id.clone(),
                expected: manifest.dimension,
                found: v.len(),
            }),
            Some(v) if v.iter().any(|x| !x.is_finite()) => violations
                .push(Violation::Invalid { line, message: format!("record {:?} has a non-finite component", raw.id) }),
            None if raw.text.is_empty() => violations.push(Violation::EmptyRecord { line, id: raw.id.clone() }),
            _ => {}
        }
        records.push(CorpusRecord {
            id: raw.id,
            label: raw.label,
            split,
            text: raw.text,
            vector: raw.vector,
            source_image: raw.source_image,
        });
    }
    for (split, declared) in [(Split::Support, manifest.support_count), (Split::Test, manifest.test_count)] {
        let actual = records.iter().filter(|r| r.split == split).count();
        if actual != declared {
            violations.push(Violation::CountMismatch { line: 1, split, declared, actual });
        }
    }
    (Some(Corpus { manifest, records }), violations)
}

/// Parses corpus text, failing on the first violation.
pub fn parse_corpus(text: &str) -> Result<Corpus, Violation> {
    let (corpus, violations) = check_corpus(text);
    match violations.into_iter().min_by_key(Violation::line) {
        Some(v) => Err(v),
        None => Ok(corpus.expect("no violations implies a corpus")),
    }
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = read_text(path)?;
    parse_corpus(&text).map_err(|violation| CorpusError::Invalid { path: path.display().to_string(), violation })
}

pub fn serialize_corpus(corpus: &Corpus) -> String {
    let mut out = serde_json::to_string(&corpus.manifest).expect("manifest serializes");
    out.push('\n');
    for r in &corpus.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    write_text(path, &serialize_corpus(corpus))
}

/// Records of one split, in their original order.
pub fn split_view(records: &[CorpusRecord], split: Split) -> Vec<CorpusRecord> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}

/// Pairs each record of `a` with the record of `b` that has the same id.
///
/// The result follows `a`'s order. Every id of `a` must exist in `b`.
pub fn join_on_id<'a, 'b>(
    a: &'a [CorpusRecord],
    b: &'b [CorpusRecord],
) -> Result<Vec<(&'a CorpusRecord, &'b CorpusRecord)>, CorpusError> {
    let mut by_id: HashMap<&str, &CorpusRecord> = HashMap::with_capacity(b.len());
    for r in b {
        if by_id.insert(r.id.as_str(), r).is_some() {
            return Err(CorpusError::DuplicateJoinId { id: r.id.clone() });
        }
    }
    let missing: Vec<String> = a.iter().filter(|r| !by_id.contains_key(r.id.as_str())).map(|r| r.id.clone()).collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingIds { missing });
    }
    Ok(a.iter().map(|r| (r, by_id[r.id.as_str()])).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePairRecord {
    pub id: String,
    pub original_path: String,
    pub reconstructed_path: String,
}

impl ImagePairRecord {
    /// Paths resolved against `base` when relative.
    pub fn resolve(&self, base: &Path) -> (PathBuf, PathBuf) {
        (base.join(&self.original_path), base.join(&self.reconstructed_path))
    }
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>, Violation> {
    numbered_lines(text)
        .map(|(line, l)| {
            serde_json::from_str(l)
                .map(|v| (line, v))
                .map_err(|e| Violation::Unparseable { line, message: e.to_string() })
        })
        .collect()
}

fn check_unique<'a>(ids: impl Iterator<Item = (usize, &'a str)>) -> Result<(), Violation> {
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for (line, id) in ids {
        if let Some(&first) = first_seen.get(id) {
            return Err(Violation::DuplicateId { line, id: id.to_string(), first });
        }
        first_seen.insert(id, line);
    }
    Ok(())
}

pub fn parse_pairs(text: &str) -> Result<Vec<ImagePairRecord>, Violation> {
    let rows: Vec<(usize, ImagePairRecord)> = parse_lines(text)?;
    check_unique(rows.iter().map(|(l, r)| (*l, r.id.as_str())))?;
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

/// Loads an image-pair manifest. Image readability is not checked here.
pub fn load_pairs(path: &Path) -> Result<Vec<ImagePairRecord>, CorpusError> {
    let text = read_text(path)?;
    parse_pairs(&text).map_err(|violation| CorpusError::Invalid { path: path.display().to_string(), violation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    pub vector: Vec<f32>,
}

/// Parses a feature-population file. All vectors must share one length.
pub fn parse_features(text: &str) -> Result<Vec<FeatureRecord>, Violation> {
    let rows: Vec<(usize, FeatureRecord)> = parse_lines(text)?;
    check_unique(rows.iter().map(|(l, r)| (*l, r.id.as_str())))?;
    if let Some((_, first)) = rows.first() {
        let dim = first.vector.len();
        for (line, r) in &rows {
            if r.vector.len() != dim {
                return Err(Violation::DimensionMismatch {
                    line: *line,
                    id: r.id.clone(),
                    expected: dim,
                    found: r.vector.len(),
                });
            }
            if r.vector.iter().any(|x| !x.is_finite()) {
                return Err(Violation::Invalid {
                    line: *line,
                    message: format!("record {:?} has a non-finite component", r.id),
                });
            }
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn load_features(path: &Path) -> Result<Vec<FeatureRecord>, CorpusError> {
    let text = read_text(path)?;
    parse_features(&text).map_err(|violation| CorpusError::Invalid { path: path.display().to_string(), violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const MANIFEST4: &str = r#"{"name":"toy","dimension":4,"class_list":["A","B"],"support_count":1,"test_count":1}"#;

    fn record(id: &str, label: &str, split: Split) -> CorpusRecord {
        CorpusRecord {
            id: id.into(),
            label: label.into(),
            split,
            text: format!("description of {id}"),
            vector: None,
            source_image: None,
        }
    }

    #[test]
    fn minimal_file_loads() {
        let text = format!(
            "{MANIFEST4}\n{}\n{}\n",
            r#"{"id":"s1","label":"A","split":"support","text":"red wings","vector":[1,0,0,0]}"#,
            r#"{"id":"t1","label":"B","split":"test","text":"blue beak","vector":[0,1,0.5,0]}"#
        );
        let c = parse_corpus(&text).unwrap();
        assert_eq!(c.manifest.dimension, 4);
        assert_eq!(c.records.len(), 2);
        assert_eq!(c.records[0].id, "s1");
        assert_eq!(c.records[1].vector.as_deref(), Some(&[0.0, 1.0, 0.5, 0.0][..]));
    }

    #[test]
    fn short_vector_names_line_two() {
        let text = format!(
            "{MANIFEST4}\n{}\n{}\n",
            r#"{"id":"s1","label":"A","split":"support","text":"x","vector":[1,0,0]}"#,
            r#"{"id":"t1","label":"B","split":"test","text":"y","vector":[0,1,0,0]}"#
        );
        let err = parse_corpus(&text).unwrap_err();
        assert_eq!(err, Violation::DimensionMismatch { line: 2, id: "s1".into(), expected: 4, found: 3 });
        assert!(err.to_string().starts_with("line 2:"));
    }

    #[test]
    fn each_violation_kind_reports_its_line() {
        let text = [
            r#"{"name":"toy","dimension":0,"class_list":["A"],"support_count":2,"test_count":2}"#,
            r#"{"id":"a","label":"A","split":"support","text":"ok"}"#,
            r#"{"id":"a","label":"A","split":"support","text":"dup"}"#,
            r#"{"id":"b","label":"A","split":"train","text":"bad split"}"#,
            r#"{"id":"c","label":"Z","split":"test","text":"bad label"}"#,
            r#"{"id":"d","label":"A","split":"test","text":""}"#,
            r#"{not json"#,
        ]
        .join("\n");
        let (_, v) = check_corpus(&text);
        let lines: Vec<usize> = v.iter().map(Violation::line).collect();
        assert_eq!(lines, vec![3, 4, 5, 6, 7]);
        assert!(matches!(v[0], Violation::DuplicateId { first: 2, .. }));
        assert!(matches!(v[1], Violation::UnknownSplit { .. }));
        assert!(matches!(v[2], Violation::UnknownLabel { .. }));
        assert!(matches!(v[3], Violation::EmptyRecord { .. }));
        assert!(matches!(v[4], Violation::Unparseable { .. }));
        // counts are fine: 2 support ("a" twice) and 2 test
        let text = [
            r#"{"name":"toy","dimension":0,"class_list":["A"],"support_count":5,"test_count":0}"#,
            r#"{"id":"a","label":"A","split":"support","text":"ok"}"#,
        ]
        .join("\n");
        let err = parse_corpus(&text).unwrap_err();
        assert_eq!(err, Violation::CountMismatch { line: 1, split: Split::Support, declared: 5, actual: 1 });
    }

    #[test]
    fn empty_text_allowed_with_vector() {
        let text = [
            r#"{"name":"v","dimension":2,"class_list":["A"],"support_count":1,"test_count":0}"#,
            r#"{"id":"a","label":"A","split":"support","vector":[1.5,-2]}"#,
        ]
        .join("\n");
        let c = parse_corpus(&text).unwrap();
        assert_eq!(c.records[0].text, "");
    }

    #[test]
    fn cub_scale_counts() {
        let classes: Vec<String> = (0..200).map(|i| format!("class_{i:03}")).collect();
        let mut records = Vec::new();
        for i in 0..5994 {
            records.push(record(&format!("s{i}"), &classes[i % 200], Split::Support));
        }
        for i in 0..5794 {
            records.push(record(&format!("t{i}"), &classes[i % 200], Split::Test));
        }
        let manifest = CorpusManifest::describe("CUB200", 0, &records);
        let text = serialize_corpus(&Corpus { manifest, records });
        let c = parse_corpus(&text).unwrap();
        assert_eq!((c.manifest.support_count, c.manifest.test_count), (5994, 5794));
        assert_eq!(c.manifest.class_list.len(), 200);
    }

    #[test]
    fn split_view_examples() {
        let rs =
            vec![record("a", "A", Split::Support), record("b", "A", Split::Test), record("c", "B", Split::Support)];
        let ids: Vec<_> = split_view(&rs, Split::Support).into_iter().map(|r| r.id).collect();
        assert_eq!(ids, vec!["a", "c"]);
        assert!(split_view(&[], Split::Test).is_empty());

        // hand-tagged fixture: S T S S T S T S T S → 6 support
        let tags = "STSSTSTSTS";
        let rs: Vec<_> = tags
            .chars()
            .enumerate()
            .map(|(i, c)| record(&i.to_string(), "A", if c == 'S' { Split::Support } else { Split::Test }))
            .collect();
        let support = split_view(&rs, Split::Support);
        assert_eq!(support.len(), 6);
        let ids: Vec<_> = support.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["0", "2", "3", "5", "7", "9"]);
    }

    #[test]
    fn join_examples() {
        let a = vec![record("1", "A", Split::Support), record("2", "A", Split::Support), record("3", "B", Split::Test)];
        let pairs = join_on_id(&a, &a).unwrap();
        assert_eq!(pairs.len(), 3);

        let b = vec![record("1", "A", Split::Support)];
        let a = vec![record("1", "A", Split::Support), record("x", "A", Split::Support)];
        match join_on_id(&a, &b) {
            Err(CorpusError::MissingIds { missing }) => assert_eq!(missing, vec!["x".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn join_shuffled_is_bijection_in_a_order() {
        let a: Vec<_> = (0..100).map(|i| record(&format!("r{i}"), "A", Split::Support)).collect();
        let mut b = a.clone();
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(11));
        assert_ne!(a, b);
        let pairs = join_on_id(&a, &b).unwrap();
        let mut seen = HashSet::new();
        for (i, (x, y)) in pairs.iter().enumerate() {
            assert_eq!(x.id, a[i].id);
            assert_eq!(x.id, y.id);
            assert!(seen.insert(y.id.clone()));
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn pairs_and_features() {
        let text = "{\"id\":\"1\",\"original_path\":\"o.png\",\"reconstructed_path\":\"r.png\"}\n";
        let p = parse_pairs(text).unwrap();
        assert_eq!(p[0].resolve(Path::new("/data")).0, PathBuf::from("/data/o.png"));
        let text = "{\"id\":\"1\",\"vector\":[1,2]}\n{\"id\":\"2\",\"vector\":[1]}\n";
        assert!(matches!(parse_features(text), Err(Violation::DimensionMismatch { line: 2, .. })));
        let text = "{\"id\":\"1\",\"vector\":[1,2]}\n{\"id\":\"1\",\"vector\":[3,4]}\n";
        assert!(matches!(parse_features(text), Err(Violation::DuplicateId { line: 2, .. })));
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = load_corpus(Path::new("/nonexistent/x.fgvd.jsonl")).unwrap_err();
        assert!(matches!(err, CorpusError::NotFound { .. }));
        assert!(!err.is_data_violation());
        assert!(err.to_string().contains("path not found"));
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        let rec = (
            "[a-z]{1,3}",
            prop::bool::ANY,
            "[ -~]{0,20}",
            prop::collection::vec(prop::num::f32::NORMAL | prop::num::f32::ZERO, 3),
            prop::option::of("[a-z/]{1,8}\\.png"),
        );
        prop::collection::vec(rec, 0..12).prop_map(|rows| {
            let mut ids = HashSet::new();
            let records: Vec<CorpusRecord> = rows
                .into_iter()
                .enumerate()
                .filter(|(i, _)| ids.insert(*i))
                .map(|(i, (label, test, text, vector, img))| CorpusRecord {
                    id: format!("id{i}"),
                    label,
                    split: if test { Split::Test } else { Split::Support },
                    text,
                    vector: Some(vector),
                    source_image: img,
                })
                .collect();
            let manifest = CorpusManifest::describe("prop", 3, &records);
            Corpus { manifest, records }
        })
    }

    proptest! {
        #[test]
        fn serialize_load_is_fixed_point(c in arb_corpus()) {
            let first = serialize_corpus(&c);
            let loaded = parse_corpus(&first).unwrap();
            prop_assert_eq!(&loaded, &c);
            let second = serialize_corpus(&loaded);
            prop_assert_eq!(first, second);
        }

        #[test]
        fn split_views_partition(c in arb_corpus()) {
            let s = split_view(&c.records, Split::Support);
            let t = split_view(&c.records, Split::Test);
            prop_assert_eq!(s.len() + t.len(), c.records.len());
            let mut ids: Vec<_> = s.iter().chain(&t).map(|r| r.id.clone()).collect();
            ids.sort();
            let mut all: Vec<_> = c.records.iter().map(|r| r.id.clone()).collect();
            all.sort();
            prop_assert_eq!(ids, all);
        }
    }
}
