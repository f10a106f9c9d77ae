//! Pipeline configuration: a TOML file with sections whose defaults
//! reproduce the reference hyperparameters, so an empty file (or no file)
//! runs the standard setup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use chordrec::crf::CrfTrainConfig;
use chordrec::data::synth::SynthConfig;
use chordrec::data::AugmentPolicy;
use chordrec::dsp::FrameParams;
use chordrec::model::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub dsp: DspSection,
    pub acoustic_training: AcousticSection,
    pub crf_training: CrfSection,
    pub synth: SynthSection,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DspSection {
    pub sample_rate: u32,
    pub frame_size: usize,
    pub hop_size: usize,
    pub bands_per_octave: u32,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub context: usize,
}

impl Default for DspSection {
    fn default() -> Self {
        DspSection {
            sample_rate: 44100,
            frame_size: 8192,
            hop_size: 4410,
            bands_per_octave: 24,
            fmin_hz: 65.0,
            fmax_hz: 2100.0,
            context: 7,
        }
    }
}

impl DspSection {
    pub fn frame_params(&self) -> FrameParams {
        FrameParams {
            frame_size: self.frame_size,
            hop_size: self.hop_size,
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcousticSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
    pub frame_stride: usize,
    pub semitone_shift: bool,
    pub detune: bool,
}

impl Default for AcousticSection {
    fn default() -> Self {
        let train = TrainConfig::default();
        AcousticSection {
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            l2_weight: train.l2_weight,
            patience: train.patience,
            max_epochs: train.max_epochs,
            validation_fraction: train.validation_fraction,
            frame_stride: train.frame_stride,
            semitone_shift: true,
            detune: true,
        }
    }
}

impl AcousticSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            patience: self.patience,
            max_epochs: self.max_epochs,
            l2_weight: self.l2_weight,
            learning_rate: self.learning_rate,
            validation_fraction: self.validation_fraction,
            seed,
            frame_stride: self.frame_stride,
        }
    }

    pub fn augment_policy(&self) -> AugmentPolicy {
        AugmentPolicy {
            semitone_shift: self.semitone_shift,
            detune: self.detune,
            ..AugmentPolicy::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrfSection {
    pub learning_rate: f64,
    pub l1_weight: f64,
    pub batch_sequences: usize,
    pub sequence_length: usize,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for CrfSection {
    fn default() -> Self {
        let train = CrfTrainConfig::default();
        CrfSection {
            learning_rate: train.learning_rate,
            l1_weight: train.l1_weight,
            batch_sequences: train.batch_sequences,
            sequence_length: train.sequence_length,
            patience: train.patience,
            max_epochs: train.max_epochs,
        }
    }
}

impl CrfSection {
    pub fn train_config(&self, seed: u64) -> CrfTrainConfig {
        CrfTrainConfig {
            learning_rate: self.learning_rate,
            l1_weight: self.l1_weight,
            batch_sequences: self.batch_sequences,
            sequence_length: self.sequence_length,
            patience: self.patience,
            max_epochs: self.max_epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub num_songs: usize,
    pub song_secs: f64,
    pub min_segment_secs: f64,
    pub max_segment_secs: f64,
    pub noise_low: f64,
    pub noise_high: f64,
    pub no_chord_prob: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let synth = SynthConfig::default();
        SynthSection {
            num_songs: synth.num_songs,
            song_secs: synth.song_secs,
            min_segment_secs: synth.min_segment_secs,
            max_segment_secs: synth.max_segment_secs,
            noise_low: synth.noise_range.0,
            noise_high: synth.noise_range.1,
            no_chord_prob: synth.no_chord_prob,
        }
    }
}

impl SynthSection {
    pub fn synth_config(&self, sample_rate: u32, seed: u64) -> SynthConfig {
        SynthConfig {
            num_songs: self.num_songs,
            seed,
            sample_rate,
            song_secs: self.song_secs,
            min_segment_secs: self.min_segment_secs,
            max_segment_secs: self.max_segment_secs,
            noise_range: (self.noise_low, self.noise_high),
            no_chord_prob: self.no_chord_prob,
        }
    }
}

impl PipelineConfig {
    /// Loads and validates a config file; unknown keys are rejected.
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, String> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}
