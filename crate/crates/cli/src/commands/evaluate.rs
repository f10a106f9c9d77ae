//! `evaluate`: weighted chord symbol recall of prediction .lab files against
//! annotation .lab files, matched by file stem.

use std::path::Path;

use chordrec::data::parse_lab;
use chordrec::eval::{corpus_wcsr, segments_from_annotations, wcsr, WcsrScore};

use crate::config::PipelineConfig;

use super::{EXIT_DATA, EXIT_OK};

pub fn cmd_evaluate(_config: &PipelineConfig, predictions: &Path, annotations: &Path, report: Option<&Path>) -> i32 {
    let annotation_files = match lab_files(annotations) {
        Ok(files) if !files.is_empty() => files,
        Ok(_) => {
            eprintln!("error: no .lab files under {}", annotations.display());
            return EXIT_DATA;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
    };

    let mut rows = Vec::new();
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for ann_path in &annotation_files {
        let id = ann_path.file_stem().unwrap().to_string_lossy().to_string();
        let pred_path = predictions.join(format!("{id}.lab"));
        let outcome = (|| -> chordrec::Result<WcsrScore> {
            let ann = segments_from_annotations(&parse_lab(ann_path)?)?;
            let pred = segments_from_annotations(&parse_lab(&pred_path)?)?;
            Ok(wcsr(&pred, &ann))
        })();
        match outcome {
            Ok(score) => {
                rows.push(format!(
                    "{id},{:.6},{:.6},{}",
                    score.t_a,
                    score.t_c,
                    score.recall().map_or("undefined".to_string(), |r| format!("{r:.6}"))
                ));
                scores.push(score);
            }
            Err(e) => {
                eprintln!("error: song {id}: {e}");
                failures.push(id);
            }
        }
    }

    let corpus = corpus_wcsr(&scores);
    let mut report_text = String::from("id,t_a,t_c,score\n");
    for row in &rows {
        report_text.push_str(row);
        report_text.push('\n');
    }
    match &corpus {
        Ok(score) => report_text.push_str(&format!("CORPUS,,,{score:.6}\n")),
        Err(_) => report_text.push_str("CORPUS,,,undefined\n"),
    }
    print!("{report_text}");
    if let Some(path) = report {
        if let Err(e) = std::fs::write(path, &report_text) {
            eprintln!("error: cannot write report {}: {e}", path.display());
            return EXIT_DATA;
        }
    }
    if !failures.is_empty() {
        eprintln!("{} song(s) could not be evaluated: {}", failures.len(), failures.join(", "));
        return EXIT_DATA;
    }
    EXIT_OK
}

fn lab_files(dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "lab"))
        .collect();
    files.sort();
    Ok(files)
}
