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

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(2e-3);
    let batch: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(16);
    let epochs: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(20);

    let start = Instant::now();
    let train = three_chord_dataset(2, 4.0, 5);
    let val = train.clone();
    eprintln!("dataset built in {:?}, train frames {}", start.elapsed(), train.num_frames());

    let mut model: ChordNet<f32> = ChordNet::standard(1);
    let config = TrainConfig {
        batch_size: batch,
        max_epochs: epochs,
        patience: epochs,
        learning_rate: lr,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let log = train_auditory(&mut model, &train, &val, AugmentPolicy::disabled(), &config).unwrap();
    for e in &log.epochs {
        eprintln!("epoch {:2}  loss {:.4}  val {:.3}", e.epoch, e.train_loss, e.val_accuracy);
    }
    let train_acc = evaluate_frame_accuracy(&model, &train, 64).unwrap();
    eprintln!(
        "lr {lr} batch {batch}: train acc {train_acc:.4} after {} epochs in {:?}",
        log.epochs.len(),
        t.elapsed()
    );
}
