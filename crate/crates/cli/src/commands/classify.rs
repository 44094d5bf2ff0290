use std::collections::HashSet;
use std::fmt::Write as _;

use fgvd_core::corpus::{load_corpus, split_view, Split};
use fgvd_core::trac::{evaluate_queries, k_sweep_queries, TestQuery};
use fgvd_core::{ClassificationOutcome, Method, SupportIndex, TfidfModel};

use crate::args::ClassifyRun;
use crate::{thread_pool, write_output, CliError};

struct Backend {
    name: String,
    index: SupportIndex,
    tests: Vec<TestQuery>,
}

fn file_safe(name: &str) -> String {
    let s: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect();
    if s.is_empty() || s.starts_with('.') {
        format!("backend{s}")
    } else {
        s
    }
}

fn unique_name(taken: &mut HashSet<String>, base: String) -> String {
    let mut name = base.clone();
    let mut n = 2;
    while !taken.insert(name.clone()) {
        name = format!("{base}-{n}");
        n += 1;
    }
    name
}

fn load_backends(cfg: &ClassifyRun) -> Result<Vec<Backend>, CliError> {
    let mut taken = HashSet::new();
    let mut out = Vec::new();
    for path in &cfg.vectors {
        let corpus = load_corpus(path)?;
        let support = split_view(&corpus.records, Split::Support);
        let tests = split_view(&corpus.records, Split::Test);
        let index = SupportIndex::build(&support)?;
        let tests = TestQuery::from_records(&tests)?;
        out.push(Backend { name: unique_name(&mut taken, file_safe(&corpus.manifest.name)), index, tests });
    }
    if cfg.tfidf {
        let path = cfg.text.as_ref().expect("checked at merge");
        let corpus = load_corpus(path)?;
        let support = split_view(&corpus.records, Split::Support);
        let tests = split_view(&corpus.records, Split::Test);
        let texts: Vec<&str> = support.iter().map(|r| r.text.as_str()).collect();
        let model = TfidfModel::fit(&texts)?;
        std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
        model.save(&cfg.out.join("tfidf.json"))?;
        let index = SupportIndex::from_rows(
            support.iter().map(|r| (r.id.as_str(), r.label.as_str(), model.transform(&r.text).into_components())),
        )?;
        let tests = tests
            .iter()
            .map(|r| TestQuery { id: r.id.clone(), label: r.label.clone(), vector: model.transform(&r.text) })
            .collect();
        out.push(Backend { name: unique_name(&mut taken, "tfidf".into()), index, tests });
    }
    Ok(out)
}

fn number(v: f64, scaled: bool) -> String {
    if scaled {
        format!("{:.2}", v * 100.0)
    } else {
        format!("{v}")
    }
}

pub fn run(cfg: &ClassifyRun) -> Result<String, CliError> {
    thread_pool()?.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ClassifyRun) -> Result<String, CliError> {
    let backends = load_backends(cfg)?;
    let mut table = String::from("dataset,backend,top1,topk,centroid\n");
    let mut reports = 0;
    for b in &backends {
        let mut row: [Option<f64>; 3] = [None; 3];
        for &method in &cfg.methods {
            let outcome: ClassificationOutcome = evaluate_queries(&b.index, &b.tests, method)?;
            write_output(&cfg.out, &format!("{}.{}.json", b.name, method.name()), &(outcome.to_json() + "\n"))?;
            reports += 1;
            let col = match method {
                Method::Top1 => 0,
                Method::TopK(_) => 1,
                Method::Centroid => 2,
            };
            row[col] = Some(outcome.accuracy);
        }
        let cells: Vec<String> = row.iter().map(|v| v.map(|v| number(v, cfg.scaled)).unwrap_or_default()).collect();
        writeln!(table, "{},{},{}", cfg.dataset, b.name, cells.join(",")).expect("string write");
        if let Some(ks) = &cfg.k_range {
            let mut sweep = String::from("k,accuracy\n");
            for o in k_sweep_queries(&b.index, &b.tests, ks)? {
                let k = o.method.k().expect("sweep is top-k");
                writeln!(sweep, "{k},{}", number(o.accuracy, cfg.scaled)).expect("string write");
            }
            write_output(&cfg.out, &format!("{}.sweep.csv", b.name), &sweep)?;
            reports += 1;
        }
    }
    write_output(&cfg.out, "classify.csv", &table)?;
    let names: Vec<&str> = backends.iter().map(|b| b.name.as_str()).collect();
    Ok(format!(
        "classify {}: {} backends ({}), {reports} reports written to {}",
        cfg.dataset,
        backends.len(),
        names.join(", "),
        cfg.out.display()
    ))
}
