use std::time::Instant;

use chordrec::crf::{self, CrfTrainConfig};
use chordrec::data::synth::{synth_corpus, SynthConfig};
use chordrec::data::{song_frames_from_audio, AugmentPolicy, FrameDataset};
use chordrec::dsp::{build_log_filterbank, FrameParams};
use chordrec::eval::{corpus_wcsr, segments_from_frames, wcsr};
use chordrec::model::{extract_feature_sequences, train_auditory, ChordNet, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let songs: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(40);
    let stride: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(2);
    let epochs: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(8);
    let lr: f64 = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(2e-3);
    let noise_hi: f64 = args.get(5).and_then(|v| v.parse().ok()).unwrap_or(0.08);

    let total = Instant::now();
    let synth_cfg = SynthConfig {
        num_songs: songs,
        song_secs: 8.0,
        noise_range: (0.03, noise_hi),
        seed: 20,
        ..SynthConfig::default()
    };
    let corpus = synth_corpus::<f32>(&synth_cfg);
    let params = FrameParams::default();
    let fb = build_log_filterbank(params.sample_rate, params.frame_size, 24, 65.0, 2100.0).unwrap();

    let t = Instant::now();
    let mut train_songs = Vec::new();
    let mut test_songs = Vec::new();
    let mut test_annotations = Vec::new();
    for (i, song) in corpus.iter().enumerate() {
        let frames = song_frames_from_audio(song.id.clone(), &song.audio, &song.annotations, &params, &fb).unwrap();
        if i % 8 == 7 {
            test_songs.push(frames);
            test_annotations.push(song.annotations.clone());
        } else {
            train_songs.push(frames);
        }
    }
    eprintln!("extraction: {:?}", t.elapsed());

    let all_train = FrameDataset::new(train_songs, 7);
    let (train, val) = all_train.split_validation(0.1, 99);
    let test = FrameDataset::new(test_songs, 7);
    eprintln!(
        "train {} songs / {} frames, val {} songs, test {} songs",
        train.songs().len(),
        train.num_frames(),
        val.songs().len(),
        test.songs().len()
    );

    let mut model: ChordNet<f32> = ChordNet::standard(7);
    let cnn_cfg = TrainConfig {
        batch_size: 128,
        max_epochs: epochs,
        patience: 5,
        learning_rate: lr,
        frame_stride: stride,
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let log = train_auditory(&mut model, &train, &val, AugmentPolicy::default(), &cnn_cfg).unwrap();
    for e in &log.epochs {
        eprintln!("cnn epoch {:2}  loss {:.4}  val {:.3}", e.epoch, e.train_loss, e.val_accuracy);
    }
    eprintln!("cnn training: {:?}", t.elapsed());

    let t = Instant::now();
    let train_feats = extract_feature_sequences(&model, &train, 128).unwrap();
    let val_feats = extract_feature_sequences(&model, &val, 128).unwrap();
    eprintln!("feature extraction: {:?}", t.elapsed());

    let t = Instant::now();
    let crf_cfg = CrfTrainConfig {
        max_epochs: 100,
        ..CrfTrainConfig::default()
    };
    let (crf_params, crf_log) = crf::train_crf(&train_feats, &val_feats, &crf_cfg).unwrap();
    eprintln!(
        "crf training: {:?} ({} epochs, best val {:.3})",
        t.elapsed(),
        crf_log.epochs.len(),
        crf_log.best_val_accuracy
    );

    // evaluate on the held-out songs
    let t = Instant::now();
    let test_feats = extract_feature_sequences(&model, &test, 128).unwrap();
    let mut scores = Vec::new();
    let mut viterbi_switches = 0usize;
    let mut framewise_switches = 0usize;
    for (song_idx, feats) in test_feats.iter().enumerate() {
        let path = crf::viterbi(&crf_params, feats);
        let labels: Vec<chordrec::data::ChordLabel> = path
            .iter()
            .map(|&i| chordrec::data::ChordLabel::from_index(i).unwrap())
            .collect();
        let predicted = segments_from_frames(&labels, 10.0).unwrap();
        let annotated = chordrec::eval::segments_from_annotations(&test_annotations[song_idx]).unwrap();
        let score = wcsr(&predicted, &annotated);
        eprintln!(
            "  test song {song_idx}: recall {:?} (t_a {:.1})",
            score.recall(),
            score.t_a
        );
        scores.push(score);

        let framewise = chordrec::model::predict_song_frames(&model, &test, song_idx, 128).unwrap();
        viterbi_switches += path.windows(2).filter(|w| w[0] != w[1]).count();
        framewise_switches += framewise.windows(2).filter(|w| w[0] != w[1]).count();
    }
    eprintln!("prediction: {:?}", t.elapsed());
    eprintln!("corpus WCSR: {:.4}", corpus_wcsr(&scores).unwrap());
    eprintln!("switches: viterbi {viterbi_switches} vs framewise {framewise_switches}");
    eprintln!("total: {:?}", total.elapsed());
}
