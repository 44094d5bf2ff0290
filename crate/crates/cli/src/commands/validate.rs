use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use fgvd_core::corpus::{check_corpus, parse_features, parse_pairs};
use fgvd_core::fidelity::LumaImage;
use serde::Serialize;

use crate::args::ValidateRun;
use crate::config::FileKind;
use crate::{write_output, CliError};

#[derive(Serialize)]
struct FileReport {
    path: String,
    kind: &'static str,
    violations: Vec<String>,
}

fn check_file(kind: FileKind, path: &Path, text: &str) -> Vec<String> {
    match kind {
        FileKind::Corpus => check_corpus(text).1.iter().map(ToString::to_string).collect(),
        FileKind::Features => parse_features(text).err().map(|v| v.to_string()).into_iter().collect(),
        FileKind::Pairs => match parse_pairs(text) {
            Err(v) => vec![v.to_string()],
            Ok(pairs) => {
                let base = path.parent().unwrap_or(Path::new(""));
                let mut out = Vec::new();
                for p in &pairs {
                    let (a, b) = p.resolve(base);
                    for img in [a, b] {
                        if let Err(e) = LumaImage::open(&img) {
                            out.push(format!("pair {:?}: {}: {e}", p.id, img.display()));
                        }
                    }
                }
                out
            }
        },
    }
}

pub fn run(cfg: &ValidateRun) -> Result<String, CliError> {
    if cfg.files.is_empty() {
        return Err(CliError::Usage("validate: no files given".into()));
    }
    let mut reports = Vec::with_capacity(cfg.files.len());
    for (kind, path) in &cfg.files {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            ErrorKind::NotFound => CliError::Io(format!("{}: path not found", path.display())),
            _ => CliError::Io(format!("{}: {e}", path.display())),
        })?;
        let violations = check_file(*kind, path, &text);
        for v in &violations {
            eprintln!("{}: {v}", path.display());
        }
        reports.push(FileReport { path: path.display().to_string(), kind: kind.as_str(), violations });
    }
    let total: usize = reports.iter().map(|r| r.violations.len()).sum();
    if let Some(out) = &cfg.out {
        let json = serde_json::to_string(&reports).expect("report serializes");
        write_output(out, "validate.json", &(json + "\n"))?;
    }
    let summary = format!("validated {} files, {total} violations", reports.len());
    if total > 0 {
        return Err(CliError::Data(summary));
    }
    Ok(summary)
}
