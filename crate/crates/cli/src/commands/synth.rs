//! `synth-corpus`: generate the demo corpus (WAV + .lab + manifest).

use std::path::Path;

use chordrec::data::synth::synth_corpus;
use chordrec::data::write_lab;
use chordrec::dsp::write_wav;

use crate::config::PipelineConfig;
use crate::manifest::write_manifest;

use super::{EXIT_DATA, EXIT_OK};

pub fn cmd_synth_corpus(config: &PipelineConfig, out_dir: &Path, songs: Option<usize>) -> i32 {
    let mut synth_config = config.synth.synth_config(config.dsp.sample_rate, config.seed);
    if let Some(n) = songs {
        synth_config.num_songs = n;
    }
    let audio_dir = out_dir.join("audio");
    let ann_dir = out_dir.join("annotations");
    if let Err(e) = std::fs::create_dir_all(&audio_dir).and_then(|_| std::fs::create_dir_all(&ann_dir)) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_DATA;
    }

    let corpus = synth_corpus::<f32>(&synth_config);
    let mut rows = Vec::with_capacity(corpus.len());
    for (idx, song) in corpus.iter().enumerate() {
        let wav_rel = format!("audio/{}.wav", song.id);
        let lab_rel = format!("annotations/{}.lab", song.id);
        if let Err(e) = write_wav(&out_dir.join(&wav_rel), &song.audio) {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
        let rows_lab: Vec<(f64, f64, String)> = song
            .annotations
            .segments()
            .iter()
            .map(|s| (s.start, s.end, s.raw_label.clone()))
            .collect();
        if let Err(e) = write_lab(&out_dir.join(&lab_rel), &rows_lab) {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
        // fixed 8-way fold assignment
        rows.push((song.id.clone(), wav_rel, lab_rel, (idx % 8) as u32));
    }
    if let Err(e) = write_manifest(&out_dir.join("manifest.csv"), &rows) {
        eprintln!("error: {e}");
        return EXIT_DATA;
    }
    println!("wrote {} songs under {}", corpus.len(), out_dir.display());
    EXIT_OK
}
