//! `train`: stage 1 trains the acoustic model on cached spectrograms, stage
//! 2 freezes it, extracts feature sequences and trains the CRF decoder.

use std::io::Write;
use std::path::Path;

use chordrec::container;
use chordrec::crf;
use chordrec::data::{ChordLabel, FrameDataset, SongFrames};
use chordrec::dsp::Spectrogram;
use chordrec::model::{extract_feature_sequences, train_auditory, ChordNet};

use crate::config::PipelineConfig;
use crate::manifest::read_manifest;

use super::{cache_paths, exit_code_for, EXIT_DATA, EXIT_OK};

pub(super) fn load_cached_song(out_dir: &Path, id: &str) -> chordrec::Result<SongFrames<f32>> {
    let (spec_path, labels_path) = cache_paths(out_dir, id);
    let (tensors, meta) = container::load_tensors::<f32>(&spec_path)?;
    let spectrogram = tensors
        .into_iter()
        .find(|(name, _)| name == "spectrogram")
        .map(|(_, t)| t)
        .ok_or_else(|| chordrec::Error::Container {
            path: spec_path.display().to_string(),
            reason: "missing spectrogram tensor".into(),
        })?;
    let frame_rate: f64 = meta
        .get("frame_rate")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| chordrec::Error::Container {
            path: spec_path.display().to_string(),
            reason: "missing frame_rate".into(),
        })?;
    let labels_text = std::fs::read_to_string(&labels_path).map_err(|e| chordrec::Error::Io {
        path: labels_path.display().to_string(),
        source: e,
    })?;
    let labels = labels_text
        .lines()
        .map(|line| {
            line.trim()
                .parse::<usize>()
                .map_err(|_| chordrec::Error::InvalidParam(format!("bad label line {line:?}")))
                .and_then(ChordLabel::from_index)
        })
        .collect::<chordrec::Result<Vec<_>>>()?;
    SongFrames::new(id.to_string(), Spectrogram::new(spectrogram, frame_rate), labels)
}

fn write_jsonl<R: serde::Serialize>(path: &Path, records: &[R]) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    for record in records {
        writeln!(file, "{}", serde_json::to_string(record).expect("record serialises"))?;
    }
    Ok(())
}

pub fn cmd_train(config: &PipelineConfig, manifest_path: &Path, out_dir: &Path, test_folds: &[u32]) -> i32 {
    let entries = match read_manifest(manifest_path) {
        Ok(entries) => entries,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
    };

    // training pool: everything outside the held-out test folds
    let mut songs = Vec::new();
    for entry in entries.iter().filter(|e| !test_folds.contains(&e.fold)) {
        match load_cached_song(out_dir, &entry.id) {
            Ok(song) => songs.push(song),
            Err(e) => {
                eprintln!("error: song {}: {e} (run `chordrec extract` first)", entry.id);
                return EXIT_DATA;
            }
        }
    }
    if songs.len() < 2 {
        eprintln!("error: need at least two training songs, got {}", songs.len());
        return EXIT_DATA;
    }

    let dataset = FrameDataset::new(songs, config.dsp.context);
    let (train, val) = dataset.split_validation(config.acoustic_training.validation_fraction, config.seed);
    println!(
        "stage 1: {} training songs ({} frames), {} validation songs",
        train.songs().len(),
        train.num_frames(),
        val.songs().len()
    );

    let mut model: ChordNet<f32> = ChordNet::standard(config.seed);
    let train_config = config.acoustic_training.train_config(config.seed);
    let policy = config.acoustic_training.augment_policy();
    let log = match train_auditory(&mut model, &train, &val, policy, &train_config) {
        Ok(log) => log,
        Err(e) => {
            eprintln!("error: acoustic training failed: {e}");
            return exit_code_for(&e);
        }
    };
    println!(
        "stage 1 done: best validation accuracy {:.4} at epoch {} ({} epochs run)",
        log.best_val_accuracy,
        log.best_epoch,
        log.epochs.len()
    );
    let model_path = out_dir.join("acoustic.ntc");
    if let Err(e) = model.save(&model_path).and_then(|_| {
        write_jsonl(&out_dir.join("acoustic_log.jsonl"), &log.epochs).map_err(|e| chordrec::Error::Io {
            path: "acoustic_log.jsonl".into(),
            source: e,
        })
    }) {
        eprintln!("error: {e}");
        return EXIT_DATA;
    }

    // stage 2: frozen features → CRF
    let feats_train = match extract_feature_sequences(&model, &train, config.acoustic_training.batch_size) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let feats_val = match extract_feature_sequences(&model, &val, config.acoustic_training.batch_size) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let crf_config = config.crf_training.train_config(config.seed);
    let (crf_params, crf_log) = match crf::train_crf(&feats_train, &feats_val, &crf_config) {
        Ok(result) => result,
        Err(e) => {
            eprintln!("error: CRF training failed: {e}");
            return exit_code_for(&e);
        }
    };
    println!(
        "stage 2 done: best validation accuracy {:.4} at epoch {} ({} epochs run)",
        crf_log.best_val_accuracy,
        crf_log.best_epoch,
        crf_log.epochs.len()
    );
    if let Err(e) = crf_params.save(&out_dir.join("crf.ntc")).and_then(|_| {
        write_jsonl(&out_dir.join("crf_log.jsonl"), &crf_log.epochs).map_err(|e| chordrec::Error::Io {
            path: "crf_log.jsonl".into(),
            source: e,
        })
    }) {
        eprintln!("error: {e}");
        return EXIT_DATA;
    }
    println!("checkpoints: {} and {}", model_path.display(), out_dir.join("crf.ntc").display());
    EXIT_OK
}
