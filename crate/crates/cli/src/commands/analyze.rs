//! `analyze`: emit the classification-head analyses (correlation matrix,
//! quality-selective maps, pitch-class profiles) for a trained checkpoint.

use std::path::Path;

use chordrec::analysis::emit_analysis;
use chordrec::model::ChordNet;

use super::{exit_code_for, EXIT_OK};

pub fn cmd_analyze(model_path: &Path, out_dir: &Path) -> i32 {
    let model: ChordNet<f32> = match ChordNet::load(model_path) {
        Ok(model) => model,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    match emit_analysis(&model, out_dir) {
        Ok(files) => {
            for file in files {
                println!("wrote {}", file.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
