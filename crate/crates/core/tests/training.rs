//! Training behaviour of the acoustic model on small synthetic sets:
//! overfitting capacity, loss descent, early-stopping bookkeeping and run
//! determinism.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chordrec::data::synth::{synth_song_with_vocab, SynthConfig};
use chordrec::data::{song_frames_from_audio, AugmentPolicy, ChordLabel, FrameDataset};
use chordrec::dsp::{build_log_filterbank, FrameParams};
use chordrec::model::{evaluate_frame_accuracy, train_auditory, ChordNet, TrainConfig};

fn three_chord_dataset(songs: usize, secs: f64, seed: u64) -> FrameDataset<f32> {
    let config = SynthConfig {
        num_songs: songs,
        song_secs: secs,
        noise_range: (0.01, 0.02),
        seed,
        ..SynthConfig::default()
    };
    let vocab = [ChordLabel::major(0), ChordLabel::major(7), ChordLabel::minor(9)];
    let params = FrameParams::default();
    let fb = build_log_filterbank(params.sample_rate, params.frame_size, 24, 65.0, 2100.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let songs: Vec<_> = (0..songs)
        .map(|i| {
            let song = synth_song_with_vocab::<f32>(&config, format!("toy_{i}"), &vocab, &mut rng);
            song_frames_from_audio(song.id.clone(), &song.audio, &song.annotations, &params, &fb).unwrap()
        })
        .collect();
    FrameDataset::new(songs, 7)
}

#[test]
fn overfits_a_three_chord_toy_set() {
    let start = Instant::now();
    let train = three_chord_dataset(2, 4.0, 5);
    // capacity test: validate on the training frames themselves, so the
    // restored best epoch is the best-fitting one
    let val = train.clone();
    let mut model: ChordNet<f32> = ChordNet::standard(1);
    let config = TrainConfig {
        batch_size: 16,
        max_epochs: 12,
        patience: 12,
        learning_rate: 2e-3,
        ..TrainConfig::default()
    };
    let log = train_auditory(&mut model, &train, &val, AugmentPolicy::disabled(), &config).unwrap();

    // training loss decreases over the first epochs
    assert!(
        log.epochs[1].train_loss < log.epochs[0].train_loss
            || log.epochs[2].train_loss < log.epochs[0].train_loss,
        "loss sequence {:?}",
        log.epochs.iter().map(|e| e.train_loss).collect::<Vec<_>>()
    );

    // capacity: training frames classified almost perfectly
    let train_acc = evaluate_frame_accuracy(&model, &train, 64).unwrap();
    assert!(train_acc >= 0.95, "train accuracy {train_acc}");

    // early stopping bookkeeping holds by construction
    assert!(log.epochs.len() <= log.best_epoch + config.patience + 1);
    eprintln!(
        "overfit test: {} epochs, best val {:.3}, train acc {train_acc:.3}, {:?}",
        log.epochs.len(),
        log.best_val_accuracy,
        start.elapsed()
    );
}

#[test]
fn training_is_deterministic_for_a_fixed_seed() {
    let train = three_chord_dataset(2, 2.0, 9);
    let val = three_chord_dataset(1, 2.0, 10);
    let config = TrainConfig {
        batch_size: 16,
        max_epochs: 2,
        patience: 2,
        ..TrainConfig::default()
    };
    let run = || {
        let mut model: ChordNet<f32> = ChordNet::standard(4);
        let log = train_auditory(&mut model, &train, &val, AugmentPolicy::default(), &config).unwrap();
        let params: Vec<f32> = model.trainable_params().iter().flat_map(|t| t.data().to_vec()).collect();
        (log, params)
    };
    let (log_a, params_a) = run();
    let (log_b, params_b) = run();
    assert_eq!(log_a.epochs.len(), log_b.epochs.len());
    for (a, b) in log_a.epochs.iter().zip(&log_b.epochs) {
        assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
        assert_eq!(a.val_accuracy.to_bits(), b.val_accuracy.to_bits());
    }
    for (a, b) in params_a.iter().zip(&params_b) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn empty_datasets_are_rejected() {
    let train = FrameDataset::<f32>::new(vec![], 7);
    let val = FrameDataset::<f32>::new(vec![], 7);
    let mut model: ChordNet<f32> = ChordNet::standard(0);
    assert!(train_auditory(&mut model, &train, &val, AugmentPolicy::disabled(), &TrainConfig::default()).is_err());
}
