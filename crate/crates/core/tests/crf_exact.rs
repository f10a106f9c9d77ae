//! Exactness of the CRF recursions against brute-force enumeration on small
//! instances, the logistic-regression degeneracy law, and decoding
//! invariances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chordrec::crf::{self, CrfParams, FeatureSequence};
use chordrec::nn::Tensor;

/// Test-local evaluation of the energy, summing the chain terms directly.
fn brute_energy(params: &CrfParams<f64>, seq: &FeatureSequence<f64>, labels: &[usize]) -> f64 {
    let dim = params.feature_dim();
    let mut total = params.initial.data()[labels[0]] + params.final_.data()[*labels.last().unwrap()];
    for (frame, &y) in labels.iter().enumerate() {
        total += params.bias.data()[y];
        for d in 0..dim {
            total += seq.features.at2(frame, d) * params.observation.at2(d, y);
        }
    }
    for pair in labels.windows(2) {
        total += params.transitions.at2(pair[0], pair[1]);
    }
    total
}

/// Iterates over every label sequence of length `n` over `k` labels.
fn all_sequences(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..k.pow(n as u32)).map(move |mut code| {
        (0..n)
            .map(|_| {
                let y = code % k;
                code /= k;
                y
            })
            .collect()
    })
}

fn random_instance(rng: &mut ChaCha8Rng) -> (CrfParams<f64>, FeatureSequence<f64>, usize, usize) {
    let n = rng.gen_range(1..=6);
    let k = rng.gen_range(2..=4);
    let dim = rng.gen_range(1..=3);
    let mut params = CrfParams::<f64>::zeros(dim, k);
    for tensor in params.tensors_mut() {
        for v in tensor.data_mut() {
            *v = rng.gen_range(-1.5..1.5);
        }
    }
    let features = Tensor::from_vec(
        &[n, dim],
        (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let seq = FeatureSequence::new(features, None).unwrap();
    (params, seq, n, k)
}

#[test]
fn energy_matches_term_by_term_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let (params, seq, n, k) = random_instance(&mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let fast = crf::energy(&params, &seq, &labels).unwrap();
        let brute = brute_energy(&params, &seq, &labels);
        assert!((fast - brute).abs() < 1e-10, "{fast} vs {brute}");
    }
}

#[test]
fn log_partition_marginals_and_viterbi_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for instance in 0..120 {
        let (params, seq, n, k) = random_instance(&mut rng);

        // enumeration oracle
        let mut log_weights = Vec::new();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for labels in all_sequences(n, k) {
            let e = brute_energy(&params, &seq, &labels);
            if e > best.0 {
                best = (e, labels.clone());
            }
            log_weights.push((e, labels));
        }
        let max = log_weights.iter().map(|(e, _)| *e).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = log_weights.iter().map(|(e, _)| (e - max).exp()).sum();
        let brute_log_z = max + z.ln();

        let log_z = crf::log_partition(&params, &seq);
        assert!(
            (log_z - brute_log_z).abs() < 1e-8,
            "instance {instance}: logZ {log_z} vs {brute_log_z}"
        );

        // unary and pairwise marginals
        let marginals = crf::forward_backward(&params, &seq);
        assert!((marginals.log_z - brute_log_z).abs() < 1e-8);
        let mut brute_unary = vec![0.0f64; n * k];
        let mut brute_pair = vec![0.0f64; n.saturating_sub(1) * k * k];
        for (e, labels) in &log_weights {
            let p = (e - brute_log_z).exp();
            for (frame, &y) in labels.iter().enumerate() {
                brute_unary[frame * k + y] += p;
            }
            for (frame, pair) in labels.windows(2).enumerate() {
                brute_pair[frame * k * k + pair[0] * k + pair[1]] += p;
            }
        }
        for (idx, &expect) in brute_unary.iter().enumerate() {
            let got = marginals.unary.data()[idx];
            assert!((got - expect).abs() < 1e-8, "instance {instance}: unary[{idx}] {got} vs {expect}");
        }
        for (idx, &expect) in brute_pair.iter().enumerate() {
            let got = marginals.pairwise.data()[idx];
            assert!((got - expect).abs() < 1e-8, "instance {instance}: pair[{idx}] {got} vs {expect}");
        }

        // total probability over all sequences is 1
        let total: f64 = log_weights.iter().map(|(e, _)| (e - brute_log_z).exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);

        // Viterbi matches the brute argmax (paths compare exactly)
        let path = crf::viterbi(&params, &seq);
        let path_energy = crf::energy(&params, &seq, &path).unwrap();
        assert!(
            (path_energy - best.0).abs() < 1e-9,
            "instance {instance}: viterbi energy {path_energy} vs brute {}",
            best.0
        );
        // continuous random potentials: the argmax is unique, so paths agree
        assert_eq!(path, best.1, "instance {instance}");
    }
}

#[test]
fn degenerate_crf_is_framewise_logistic_regression() {
    // with zero transitions and boundary potentials, Viterbi equals the
    // frame-wise argmax of Wᵀx + c and the marginals equal its softmax
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..40 {
        let n = rng.gen_range(1..=30);
        let (dim, k) = (5usize, 25usize);
        let mut params = CrfParams::<f64>::zeros(dim, k);
        for v in params.observation.data_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        for v in params.bias.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let features = Tensor::from_vec(&[n, dim], (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let seq = FeatureSequence::new(features.clone(), None).unwrap();

        let path = crf::viterbi(&params, &seq);
        let marginals = crf::forward_backward(&params, &seq);
        for frame in 0..n {
            let scores: Vec<f64> = (0..k)
                .map(|y| {
                    params.bias.data()[y]
                        + (0..dim).map(|d| features.at2(frame, d) * params.observation.at2(d, y)).sum::<f64>()
                })
                .collect();
            let argmax = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(path[frame], argmax, "frame {frame}");

            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
            for y in 0..k {
                let softmax = (scores[y] - max).exp() / z;
                assert!((marginals.unary.at2(frame, y) - softmax).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn single_frame_likelihood_is_log_softmax_at_the_gold_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let (dim, k) = (4usize, 25usize);
    let mut params = CrfParams::<f64>::zeros(dim, k);
    for v in params.observation.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    for v in params.bias.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let features = Tensor::from_vec(&[1, dim], (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let gold = 13 % k;
    let seq = FeatureSequence::new(features.clone(), Some(vec![gold])).unwrap();
    let ll = crf::sequence_log_likelihood(&params, &seq).unwrap();

    let scores: Vec<f64> = (0..k)
        .map(|y| params.bias.data()[y] + (0..dim).map(|d| features.at2(0, d) * params.observation.at2(d, y)).sum::<f64>())
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let log_softmax = scores[gold] - max - z.ln();
    assert!((ll - log_softmax).abs() < 1e-10);
}

#[test]
fn adding_a_constant_to_any_block_leaves_viterbi_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for block in 0..5usize {
        let (mut params, seq, _, _) = random_instance(&mut rng);
        let base_path = crf::viterbi(&params, &seq);
        let shift = rng.gen_range(-3.0..3.0);
        for v in params.tensors_mut()[block].data_mut() {
            *v += shift;
        }
        assert_eq!(crf::viterbi(&params, &seq), base_path, "block {block}");
    }
}

#[test]
fn negative_off_diagonal_transitions_smooth_noisy_decodes() {
    // noisy unaries flip the frame-wise argmax often; discouraging label
    // changes must produce strictly fewer transitions
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let (n, dim, k) = (120usize, 4usize, 6usize);
    let mut params = CrfParams::<f64>::zeros(dim, k);
    // observation picks feature d for label d
    for d in 0..dim.min(k) {
        params.observation.row_mut(d)[d] = 1.0;
    }
    let mut features = Tensor::zeros(&[n, dim]);
    for frame in 0..n {
        let latent = (frame / 30) % dim;
        for d in 0..dim {
            let signal: f64 = if d == latent { 0.6 } else { 0.0 };
            features.data_mut()[frame * dim + d] = signal + rng.gen_range(-0.5..0.5);
        }
    }
    let seq = FeatureSequence::new(features, None).unwrap();

    let framewise = crf::viterbi(&params, &seq); // zero transitions = argmax
    let framewise_switches = framewise.windows(2).filter(|w| w[0] != w[1]).count();

    for i in 0..k {
        for j in 0..k {
            if i != j {
                params.transitions.row_mut(i)[j] = -2.0;
            }
        }
    }
    let smoothed = crf::viterbi(&params, &seq);
    let smoothed_switches = smoothed.windows(2).filter(|w| w[0] != w[1]).count();
    assert!(
        smoothed_switches < framewise_switches,
        "smoothing must reduce transitions: {smoothed_switches} vs {framewise_switches}"
    );
}
