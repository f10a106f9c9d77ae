//! `extract`: cache per-song spectrograms and frame targets.
//!
//! The cache is keyed by a content hash over the audio bytes and the DSP
//! configuration, so re-running after any change recomputes exactly the
//! affected songs and a clean re-run touches nothing.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use chordrec::container;
use chordrec::data::{frames_from_annotations, parse_lab};
use chordrec::dsp::{build_log_filterbank, decode_audio, log_filtered_spectrogram};

use crate::config::PipelineConfig;
use crate::manifest::{read_manifest, ManifestEntry};

use super::{EXIT_DATA, EXIT_OK};

pub fn content_hash(audio_bytes: &[u8], config: &PipelineConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(audio_bytes);
    hasher.update(toml::to_string(&config.dsp).expect("dsp section serialises"));
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cache_paths(out_dir: &Path, id: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    let cache = out_dir.join("cache");
    (cache.join(format!("{id}.spec.ntc")), cache.join(format!("{id}.labels.txt")))
}

fn extract_song(entry: &ManifestEntry, config: &PipelineConfig, out_dir: &Path) -> chordrec::Result<bool> {
    let (spec_path, labels_path) = cache_paths(out_dir, &entry.id);
    let audio_bytes = std::fs::read(&entry.audio)
        .map_err(|e| chordrec::Error::AudioDecode {
            path: entry.audio.display().to_string(),
            reason: e.to_string(),
        })?;
    let hash = content_hash(&audio_bytes, config);

    if spec_path.exists() && labels_path.exists() {
        if let Ok((_, meta)) = container::load_tensor_map::<f32>(&spec_path) {
            if meta.get("content_hash") == Some(&hash) {
                return Ok(false); // cache hit
            }
            eprintln!("note: {} changed on disk, re-extracting", entry.id);
        }
    }

    let params = config.dsp.frame_params();
    let audio = decode_audio::<f32>(&entry.audio, params.sample_rate)?;
    let fb = build_log_filterbank(
        params.sample_rate,
        params.frame_size,
        config.dsp.bands_per_octave,
        config.dsp.fmin_hz,
        config.dsp.fmax_hz,
    )?;
    let spectrogram = log_filtered_spectrogram(&audio, &params, &fb)?;
    let annotations = parse_lab(&entry.annotation)?;
    let labels = frames_from_annotations(&annotations, spectrogram.frame_rate(), spectrogram.num_frames())?;

    let mut meta = BTreeMap::new();
    meta.insert("kind".to_string(), "spectrogram".to_string());
    meta.insert("id".to_string(), entry.id.clone());
    meta.insert("frame_rate".to_string(), spectrogram.frame_rate().to_string());
    meta.insert("content_hash".to_string(), hash);
    container::save_tensors(&spec_path, &[("spectrogram".to_string(), spectrogram.values())], &meta)?;

    let label_text: String = labels.iter().map(|l| format!("{}\n", l.index())).collect();
    std::fs::write(&labels_path, label_text).map_err(|e| chordrec::Error::Io {
        path: labels_path.display().to_string(),
        source: e,
    })?;
    Ok(true)
}

pub fn cmd_extract(config: &PipelineConfig, manifest_path: &Path, out_dir: &Path) -> i32 {
    let entries = match read_manifest(manifest_path) {
        Ok(entries) => entries,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
    };
    if let Err(e) = std::fs::create_dir_all(out_dir.join("cache")) {
        eprintln!("error: cannot create cache dir: {e}");
        return EXIT_DATA;
    }

    let mut computed = 0usize;
    let mut cached = 0usize;
    let mut failures = Vec::new();
    for entry in &entries {
        match extract_song(entry, config, out_dir) {
            Ok(true) => computed += 1,
            Ok(false) => cached += 1,
            Err(e) => {
                eprintln!("error: song {}: {e}", entry.id);
                failures.push(entry.id.clone());
            }
        }
    }
    println!(
        "extract: {computed} computed, {cached} cached, {} failed of {} songs",
        failures.len(),
        entries.len()
    );
    if failures.is_empty() {
        EXIT_OK
    } else {
        eprintln!("failed songs: {}", failures.join(", "));
        EXIT_DATA
    }
}
