//! `predict`: audio in, Viterbi-decoded chord segments out (optionally also
//! the frame-wise argmax for comparison).

use std::path::Path;

use chordrec::crf::{self, CrfParams, FeatureSequence};
use chordrec::data::{write_lab, ChordLabel};
use chordrec::dsp::{build_log_filterbank, copy_context_window, decode_audio, log_filtered_spectrogram};
use chordrec::eval::segments_from_frames;
use chordrec::model::ChordNet;
use chordrec::nn::Tensor;

use crate::config::PipelineConfig;

use super::{exit_code_for, EXIT_OK};

pub fn cmd_predict(
    config: &PipelineConfig,
    audio_path: &Path,
    model_path: &Path,
    crf_path: &Path,
    out_path: &Path,
    frame_argmax_path: Option<&Path>,
) -> i32 {
    match predict(config, audio_path, model_path, crf_path, out_path, frame_argmax_path) {
        Ok(segments) => {
            println!("wrote {} segments to {}", segments, out_path.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn predict(
    config: &PipelineConfig,
    audio_path: &Path,
    model_path: &Path,
    crf_path: &Path,
    out_path: &Path,
    frame_argmax_path: Option<&Path>,
) -> chordrec::Result<usize> {
    let model: ChordNet<f32> = ChordNet::load(model_path)?;
    let crf_params: CrfParams<f32> = CrfParams::load(crf_path)?;

    let params = config.dsp.frame_params();
    let audio = decode_audio::<f32>(audio_path, params.sample_rate)?;
    let fb = build_log_filterbank(
        params.sample_rate,
        params.frame_size,
        config.dsp.bands_per_octave,
        config.dsp.fmin_hz,
        config.dsp.fmax_hz,
    )?;
    let spectrogram = log_filtered_spectrogram(&audio, &params, &fb)?;

    // batched feature extraction over all context windows
    let context = config.dsp.context;
    let (bands, cols) = (spectrogram.num_bands(), 2 * context + 1);
    let frames = spectrogram.num_frames();
    let batch = config.acoustic_training.batch_size.max(1);
    let mut features = Tensor::zeros(&[frames, chordrec::model::FEATURE_DIM]);
    let mut frame_argmax = Vec::with_capacity(frames);
    for start in (0..frames).step_by(batch) {
        let end = (start + batch).min(frames);
        let mut inputs = Tensor::zeros(&[end - start, 1, bands, cols]);
        for (slot, frame) in (start..end).enumerate() {
            copy_context_window(
                &spectrogram,
                frame,
                context,
                &mut inputs.data_mut()[slot * bands * cols..(slot + 1) * bands * cols],
            );
        }
        let batch_features = model.features_infer(&inputs)?;
        let dim = batch_features.shape()[1];
        features.data_mut()[start * dim..end * dim].copy_from_slice(batch_features.data());
        if frame_argmax_path.is_some() {
            let probs = model.forward_infer(&inputs)?;
            for slot in 0..end - start {
                let row = probs.row(slot);
                frame_argmax.push(
                    row.iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0,
                );
            }
        }
    }

    let seq = FeatureSequence::new(features, None)?;
    let path = crf::viterbi(&crf_params, &seq);
    let labels: Vec<ChordLabel> = path
        .into_iter()
        .map(ChordLabel::from_index)
        .collect::<chordrec::Result<_>>()?;
    let segments = segments_from_frames(&labels, spectrogram.frame_rate())?;
    write_lab(out_path, &segments.to_lab_rows())?;

    if let Some(fw_path) = frame_argmax_path {
        let fw_labels: Vec<ChordLabel> = frame_argmax
            .into_iter()
            .map(ChordLabel::from_index)
            .collect::<chordrec::Result<_>>()?;
        let fw_segments = segments_from_frames(&fw_labels, spectrogram.frame_rate())?;
        write_lab(fw_path, &fw_segments.to_lab_rows())?;
    }
    Ok(segments.segments().len())
}
