mod common;

use std::fs;

use common::*;
use fgvd_core::corpus::Split;
use serde_json::Value;

fn small_corpus(dir: &std::path::Path) -> std::path::PathBuf {
    let records = vec![
        record("s0", "A", Split::Support, "red wings short beak", Some(vec![1.0, 0.1])),
        record("s1", "B", Split::Support, "blue crown long tail", Some(vec![0.1, 1.0])),
        record("s2", "A", Split::Support, "red breast short beak", Some(vec![0.9, 0.2])),
        record("t0", "A", Split::Test, "red wings", Some(vec![1.0, 0.1])),
        record("t1", "B", Split::Test, "blue crown", Some(vec![0.1, 1.0])),
    ];
    write_corpus(&dir.join("small.fgvd.jsonl"), "small", 2, records)
}

#[test]
fn validate_valid_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let o = run(&["validate", p(&corpus)], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 violations"));
}

#[test]
fn validate_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let text = fs::read_to_string(&corpus).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replace("\"vector\":[0.9,0.2]", "\"vector\":[0.9,0.2,0.3]");
    fs::write(&corpus, lines.join("\n") + "\n").unwrap();
    let o = run(&["validate", p(&corpus)], None);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("small.fgvd.jsonl: line 4"), "{err}");
    assert!(err.contains("vector length 3"), "{err}");
}

#[test]
fn validate_missing_file() {
    let o = run(&["validate", "/nonexistent/x.fgvd.jsonl"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("path not found"));
}

#[test]
fn validate_pairs_and_features() {
    let dir = tempfile::tempdir().unwrap();
    write_png(&dir.path().join("a.png"), 16, 16, |x, y| [x as u8, y as u8, 0]);
    fs::write(
        dir.path().join("pairs.jsonl"),
        "{\"id\":\"1\",\"original_path\":\"a.png\",\"reconstructed_path\":\"a.png\"}\n{\"id\":\"2\",\"original_path\":\"a.png\",\"reconstructed_path\":\"gone.png\"}\n",
    )
    .unwrap();
    fs::write(dir.path().join("f.jsonl"), "{\"id\":\"1\",\"vector\":[1,2]}\n{\"id\":\"2\",\"vector\":[1]}\n").unwrap();
    let pairs = dir.path().join("pairs.jsonl");
    let feats = dir.path().join("f.jsonl");
    let o = run(&["validate", "--pairs", p(&pairs), "--features", p(&feats)], None);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("gone.png"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn classify_test_subset_of_support_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = clustered(4, 5, 0, 8, 1.0, 3);
    let copies: Vec<_> =
        records.iter().map(|r| record(&format!("q-{}", r.id), &r.label, Split::Test, "", r.vector.clone())).collect();
    records.extend(copies);
    let corpus = write_corpus(&dir.path().join("v.fgvd.jsonl"), "emb", 8, records);
    let out = dir.path().join("out");
    let o = run(&["classify", "--vectors", p(&corpus), "--k", "1", "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for m in ["top1", "topk", "centroid"] {
        let r: Value = serde_json::from_str(&fs::read_to_string(out.join(format!("emb.{m}.json"))).unwrap()).unwrap();
        assert_eq!(r["method"], m);
        assert_eq!(r["accuracy"], 1.0, "{m}");
    }
}

#[test]
fn classify_sweep_and_three_backend_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, name) in ["clip", "blip", "minilm"].iter().enumerate() {
        let recs = clustered(3, 12, 4, 6, 2.0 + i as f64, 10 + i as u64);
        paths.push(write_corpus(&dir.path().join(format!("{name}.fgvd.jsonl")), name, 6, recs));
    }
    let out = dir.path().join("out");
    let mut args = vec!["classify", "--dataset", "toy", "--k-range", "3:10", "--scale-presentation", "--out", p(&out)];
    for path in &paths {
        args.push("--vectors");
        args.push(p(path));
    }
    let o = run(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let sweep = fs::read_to_string(out.join("clip.sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows[0], "k,accuracy");
    assert_eq!(rows.len(), 9);
    assert!(rows[1].starts_with("3,"));
    assert!(rows[8].starts_with("10,"));
    let table = fs::read_to_string(out.join("classify.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "dataset,backend,top1,topk,centroid");
    assert_eq!(rows.len(), 4);
    let backends: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(backends, ["clip", "blip", "minilm"]);
    for r in &rows[1..] {
        for cell in r.split(',').skip(2) {
            let (_, frac) = cell.split_once('.').unwrap();
            assert_eq!(frac.len(), 2, "{r}");
        }
    }
}

#[test]
fn classify_tfidf_backend() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let out = dir.path().join("out");
    let o = run(&["classify", "--text", p(&corpus), "--tfidf", "--method", "top1", "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("tfidf.top1.json")).unwrap()).unwrap();
    assert_eq!(r["accuracy"], 1.0);
    assert_eq!(r["items"][0]["neighbors"][0]["id"], "s0");
    assert!(out.join("tfidf.json").exists());
}

#[test]
fn classify_k_outside_support_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path());
    let out = dir.path().join("out");
    let o = run(&["classify", "--vectors", p(&corpus), "--method", "topk", "--k", "4", "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k = 4"));
    let o = run(&["classify", "--vectors", p(&corpus), "--k-range", "2:9", "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_from_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "dataset = \"cfg\"\nout = \"reports\"\n[classify]\nvectors = [\"small.fgvd.jsonl\"]\nmethod = \"centroid\"\n",
    )
    .unwrap();
    let o = run(&["classify", "--config", p(&cfg), "--method", "top1"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("reports/small.top1.json").exists());
    assert!(!dir.path().join("reports/small.centroid.json").exists());
    let table = fs::read_to_string(dir.path().join("reports/classify.csv")).unwrap();
    assert_eq!(table.lines().nth(1).unwrap(), "cfg,small,1,,");
}

#[test]
fn missing_config_and_bad_flags() {
    let o = run(&["classify", "--config", "/nonexistent/run.toml"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("path not found"));
    let o = run(&["classify", "--method", "knn"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["classify", "--vectors", "x"], None);
    assert_eq!(o.status.code(), Some(2), "missing --out");
}

fn diagonal_population(mean: &[f64], spread: &[f64]) -> String {
    // mean ± spread_i along axis i: sample mean is `mean`, sample covariance is
    // diag(2·spread_i² / (n − 1)) with n = 2·dim
    let mut out = String::new();
    let mut n = 0;
    for (i, s) in spread.iter().enumerate() {
        for sign in [1.0, -1.0] {
            let v: Vec<f64> = mean.iter().enumerate().map(|(j, m)| if i == j { m + sign * s } else { *m }).collect();
            out.push_str(&serde_json::json!({"id": format!("r{n}"), "vector": v}).to_string());
            out.push('\n');
            n += 1;
        }
    }
    out
}

#[test]
fn fidelity_identical_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    for i in 0..3u32 {
        let name = format!("img{i}.png");
        write_png(&dir.path().join(&name), 24, 20, |x, y| {
            [(x * 7 + i * 20) as u8, (y * 11) as u8, ((x + y) * 3) as u8]
        });
        manifest
            .push_str(&format!("{{\"id\":\"{i}\",\"original_path\":\"{name}\",\"reconstructed_path\":\"{name}\"}}\n"));
    }
    fs::write(dir.path().join("pairs.jsonl"), manifest).unwrap();
    let pop = diagonal_population(&[1.0, 2.0, 3.0], &[1.0, 0.5, 2.0]);
    fs::write(dir.path().join("orig.jsonl"), &pop).unwrap();
    fs::write(dir.path().join("recon.jsonl"), &pop).unwrap();
    let out = dir.path().join("out");
    let o = run(
        &[
            "fidelity",
            "--dataset",
            "toy",
            "--pairs",
            p(&dir.path().join("pairs.jsonl")),
            "--features-original",
            p(&dir.path().join("orig.jsonl")),
            "--features-reconstructed",
            p(&dir.path().join("recon.jsonl")),
            "--scale-presentation",
            "--out",
            p(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("fidelity.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "dataset,ssim,fid,clip_s_i");
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[1], "100.00");
    assert_eq!(cells[2], "0.00");
    let raw = fs::read_to_string(out.join("fidelity.json")).unwrap();
    assert!(raw.contains("\"ssim\":100.00,"), "{raw}");
    let r: Value = serde_json::from_str(&raw).unwrap();
    assert_eq!(r["items"].as_array().unwrap().len(), 3);
}

#[test]
fn fidelity_fid_matches_diagonal_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let (mp, sp) = ([0.0, 0.0, 0.0], [1.0, 2.0, 0.5]);
    let (mq, sq) = ([3.0, -1.0, 0.0], [2.0, 1.0, 1.5]);
    fs::write(dir.path().join("p.jsonl"), diagonal_population(&mp, &sp)).unwrap();
    fs::write(dir.path().join("q.jsonl"), diagonal_population(&mq, &sq)).unwrap();
    let n = 6.0;
    let var = |s: f64| 2.0 * s * s / (n - 1.0);
    let expected: f64 = mp.iter().zip(&mq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        + sp.iter().zip(&sq).map(|(a, b)| (var(*a).sqrt() - var(*b).sqrt()).powi(2)).sum::<f64>();
    let out = dir.path().join("out");
    let o = run(
        &[
            "fidelity",
            "--features-original",
            p(&dir.path().join("p.jsonl")),
            "--features-reconstructed",
            p(&dir.path().join("q.jsonl")),
            "--out",
            p(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("fidelity.json")).unwrap()).unwrap();
    let fid = r["metrics"]["fid"].as_f64().unwrap();
    assert!((fid - expected).abs() < 1e-8, "{fid} vs {expected}");
}

#[test]
fn fidelity_clip_scores_and_human_ratings() {
    let dir = tempfile::tempdir().unwrap();
    let img = write_corpus(
        &dir.path().join("img.fgvd.jsonl"),
        "img",
        3,
        vec![
            record("a", "A", Split::Test, "", Some(vec![1.0, 2.0, 2.0])),
            record("b", "B", Split::Test, "", Some(vec![1.0, 0.0, 0.0])),
        ],
    );
    let txt = write_corpus(
        &dir.path().join("txt.fgvd.jsonl"),
        "txt",
        3,
        vec![
            record("b", "B", Split::Test, "", Some(vec![0.0, 1.0, 0.0])),
            record("a", "A", Split::Test, "", Some(vec![2.0, 1.0, 2.0])),
        ],
    );
    fs::write(dir.path().join("h.csv"), "model,id,score\nm1,a,5\nm1,b,4\nm0,a,1\n").unwrap();
    let out = dir.path().join("out");
    let o = run(
        &[
            "fidelity",
            "--image-vectors",
            p(&img),
            "--text-vectors",
            p(&txt),
            "--reconstructed-image-vectors",
            p(&txt),
            "--human-scores",
            p(&dir.path().join("h.csv")),
            "--out",
            p(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("fidelity.json")).unwrap()).unwrap();
    let mean = r["metrics"]["clip_s"].as_f64().unwrap();
    assert!((mean - 400.0 / 9.0).abs() < 1e-9, "{mean}");
    assert_eq!(
        fs::read_to_string(out.join("fidelity.csv")).unwrap().lines().next().unwrap(),
        "dataset,ssim,fid,clip_s_i,clip_s"
    );
    let h: Value = serde_json::from_str(&fs::read_to_string(out.join("human_scores.json")).unwrap()).unwrap();
    assert_eq!(h[0]["model"], "m0");
    assert_eq!(h[1]["mean"], 4.5);
}

#[test]
fn fidelity_empty_pair_list_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pairs.jsonl"), "").unwrap();
    let out = dir.path().join("out");
    let o = run(&["fidelity", "--pairs", p(&dir.path().join("pairs.jsonl")), "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty pair list"));
}

fn prompt_corpus(dir: &std::path::Path) -> std::path::PathBuf {
    let mut records = Vec::new();
    for i in 0..6 {
        records.push(record(&format!("s{i}"), "A", Split::Support, &format!("support description {i}"), None));
    }
    for i in 0..4 {
        records.push(record(&format!("t{i}"), "A", Split::Test, &format!("test description {i}"), None));
    }
    write_corpus(&dir.join("text.fgvd.jsonl"), "text", 0, records)
}

fn bundles(path: &std::path::Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn prompts_zero_shot_equals_template() {
    let dir = tempfile::tempdir().unwrap();
    let text = prompt_corpus(dir.path());
    let out = dir.path().join("out");
    let o = run(
        &["prompts", "--text", p(&text), "--category", "bird", "--answer-prefix", "It has", "--out", p(&out)],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("strategy=RS, n_shots=0, seed=0"));
    let b = bundles(&out.join("prompts.jsonl"));
    assert_eq!(b.len(), 4);
    for x in &b {
        assert_eq!(x["prompt"], "What are the main visual features for bird in this image? It has");
        assert_eq!(x["shot_ids"].as_array().unwrap().len(), 0);
    }
}

#[test]
fn prompts_rs_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = prompt_corpus(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(
            &[
                "prompts",
                "--text",
                p(&text),
                "--template",
                "global",
                "--strategy",
                "RS",
                "--n-shots",
                "3",
                "--seed",
                "7",
                "--out",
                p(out),
            ],
            None,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let fa = fs::read(a.join("prompts.jsonl")).unwrap();
    assert_eq!(fa, fs::read(b.join("prompts.jsonl")).unwrap());
    for x in bundles(&a.join("prompts.jsonl")) {
        let ids = x["shot_ids"].as_array().unwrap();
        assert_eq!(ids.len(), 3);
        let prompt = x["prompt"].as_str().unwrap();
        assert_eq!(prompt.lines().count(), 7);
    }
}

#[test]
fn prompts_sttr_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let text = prompt_corpus(dir.path());
    let pool_vecs: Vec<Vec<f32>> = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.8, 0.6, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.6, 0.0, 0.8],
        vec![0.0, 0.0, 1.0],
        vec![0.5, 0.5, 0.7],
    ];
    let tv = write_corpus(
        &dir.path().join("tv.fgvd.jsonl"),
        "tv",
        3,
        pool_vecs
            .iter()
            .enumerate()
            .map(|(i, v)| record(&format!("s{i}"), "A", Split::Support, "", Some(v.clone())))
            .collect(),
    );
    let drafts: Vec<Vec<f32>> =
        vec![vec![1.0, 0.1, 0.0], vec![0.0, 0.2, 1.0], vec![0.3, 1.0, 0.1], vec![1.0, 1.0, 1.0]];
    let dv = write_corpus(
        &dir.path().join("dv.fgvd.jsonl"),
        "dv",
        3,
        drafts
            .iter()
            .enumerate()
            .map(|(i, v)| record(&format!("t{i}"), "A", Split::Test, "", Some(v.clone())))
            .collect(),
    );
    let out = dir.path().join("out");
    let o = run(
        &[
            "prompts",
            "--text",
            p(&text),
            "--category",
            "bird",
            "--strategy",
            "STTR",
            "--n-shots",
            "2",
            "--text-vectors",
            p(&tv),
            "--draft-vectors",
            p(&dv),
            "--out",
            p(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cos = |a: &[f32], b: &[f32]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
        let n = |v: &[f32]| v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
        d / (n(a) * n(b))
    };
    for (q, x) in drafts.iter().zip(bundles(&out.join("prompts.jsonl"))) {
        let mut order: Vec<usize> = (0..pool_vecs.len()).collect();
        order.sort_by(|&i, &j| cos(q, &pool_vecs[j]).partial_cmp(&cos(q, &pool_vecs[i])).unwrap().then(i.cmp(&j)));
        let expected: Vec<String> = order[..2].iter().rev().map(|i| format!("s{i}")).collect();
        let got: Vec<String> =
            x["shot_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
        assert_eq!(got, expected);
        let prompt = x["prompt"].as_str().unwrap();
        let first = expected[0].trim_start_matches('s');
        assert!(prompt.starts_with(&format!(
            "What are the main visual features for bird in this image?\nsupport description {first}\n"
        )));
    }
}

#[test]
fn prompts_strategy_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = prompt_corpus(dir.path());
    let out = dir.path().join("out");
    let o = run(&["prompts", "--text", p(&text), "--strategy", "NN", "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["prompts", "--text", p(&text), "--n-shots", "5", "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["prompts", "--text", p(&text), "--strategy", "SIIR", "--n-shots", "1", "--out", p(&out)], None);
    assert_eq!(o.status.code(), Some(2));
}
