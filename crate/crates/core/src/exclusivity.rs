//! Exclusively-activated-neuron (ExAN) analysis.
//!
//! A neuron is an ExAN of a sample when it is activated by that sample and by
//! no other sample of the batch. The per-sample ExAN counts at each
//! activation layer decide which boundary a batch falls in:
//!
//! - insecure (sufficient exclusivity): every sample has ≥ 2 ExANs at the
//!   last activation layer and ≥ 1 at every other activation layer —
//!   reconstruction from the average gradient is deterministic;
//! - secure (lack of exclusivity): no sample has any first-layer ExAN and the
//!   batch is larger than the first layer — infinitely many gradient-identical
//!   batches exist;
//! - other: everything else.

use crate::model::{ActivationPattern, Batch, FcnParams, ModelError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExclusivityError {
    #[error("no insecure batch found within {trials} trials")]
    CurationFailed { trials: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-sample, per-layer ExAN counts and index lists.
#[derive(Debug, Clone)]
pub struct ExanTable {
    /// `counts[m][i]` = number of ExANs of sample `m` at activation layer `i+1`.
    pub counts: Vec<Vec<usize>>,
    /// `indices[m][i]` = sorted neuron indices backing `counts[m][i]`.
    pub indices: Vec<Vec<Vec<usize>>>,
}

impl ExanTable {
    pub fn batch_size(&self) -> usize {
        self.counts.len()
    }

    pub fn num_layers(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }
}

/// Boundary classification with per-sample evidence.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum BoundaryState {
    Insecure,
    Secure,
    Other,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SampleEvidence {
    /// ExAN counts per activation layer.
    pub counts: Vec<usize>,
    /// ≥ 2 ExANs at the last activation layer.
    pub last_layer_ok: bool,
    /// ≥ 1 ExAN at each inner activation layer.
    pub inner_layers_ok: bool,
    /// Zero ExANs at the first activation layer.
    pub first_layer_zero: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ExclusivityState {
    pub state: BoundaryState,
    pub batch_size: usize,
    pub first_layer_width: usize,
    pub samples: Vec<SampleEvidence>,
}

/// Counts the ExANs of every sample at every activation layer.
pub fn exan_counts(patterns: &ActivationPattern) -> ExanTable {
    let m = patterns.batch_size();
    assert!(m >= 1, "patterns must cover at least one sample");
    let layers = patterns.num_layers();
    let mut counts = vec![vec![0usize; layers]; m];
    let mut indices = vec![vec![Vec::new(); layers]; m];
    for layer in 0..layers {
        let width = patterns.masks[0][layer].len();
        for j in 0..width {
            let mut owner = None;
            let mut total = 0;
            for (s, sample) in patterns.masks.iter().enumerate() {
                if sample[layer][j] == 1 {
                    total += 1;
                    owner = Some(s);
                }
            }
            if total == 1 {
                let s = owner.unwrap();
                counts[s][layer] += 1;
                indices[s][layer].push(j);
            }
        }
    }
    ExanTable { counts, indices }
}

/// Classifies a batch against the boundary conditions.
///
/// The pure function of `(table, m, d1)`: reordering samples permutes the
/// evidence but never changes the state.
pub fn classify_batch(table: &ExanTable, m: usize, d1: usize) -> ExclusivityState {
    assert_eq!(table.batch_size(), m, "table does not cover the stated batch size");
    let layers = table.num_layers();
    let samples: Vec<SampleEvidence> = table
        .counts
        .iter()
        .map(|counts| {
            let last_layer_ok = layers > 0 && counts[layers - 1] >= 2;
            let inner_layers_ok = (0..layers.saturating_sub(1)).all(|i| counts[i] >= 1);
            let first_layer_zero = layers > 0 && counts[0] == 0;
            SampleEvidence {
                counts: counts.clone(),
                last_layer_ok,
                inner_layers_ok,
                first_layer_zero,
            }
        })
        .collect();
    let insecure = layers > 0 && samples.iter().all(|s| s.last_layer_ok && s.inner_layers_ok);
    let secure = layers > 0 && m > d1 && samples.iter().all(|s| s.first_layer_zero);
    let state = if insecure {
        BoundaryState::Insecure
    } else if secure {
        BoundaryState::Secure
    } else {
        BoundaryState::Other
    };
    ExclusivityState { state, batch_size: m, first_layer_width: d1, samples }
}

/// Classification straight from a model and batch.
pub fn classify_model_batch(
    params: &FcnParams,
    batch: &Batch,
) -> Result<ExclusivityState, ModelError> {
    let patterns = ActivationPattern::from_batch(params, batch)?;
    let table = exan_counts(&patterns);
    Ok(classify_batch(&table, batch.len(), params.dims()[1]))
}

/// Source of candidate batches for sampling experiments.
pub trait BatchSampler {
    fn sample(&self, rng: &mut ChaCha8Rng, batch_size: usize) -> Batch;
}

/// The default synthetic sampler: i.i.d. uniform inputs on `[-1, 1]^{d0}`
/// with uniform labels.
#[derive(Debug, Clone, Copy)]
pub struct UniformSampler {
    pub d0: usize,
    pub num_classes: usize,
}

impl BatchSampler for UniformSampler {
    fn sample(&self, rng: &mut ChaCha8Rng, batch_size: usize) -> Batch {
        Batch::uniform_random(batch_size, self.d0, self.num_classes, rng)
    }
}

fn trial_rng(rng_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(trial);
    rng
}

/// Fraction of sampled batches that classify as insecure.
///
/// Trials draw from per-trial derived streams, so the result is independent
/// of evaluation order.
pub fn insecure_proportion(
    params: &FcnParams,
    sampler: &dyn BatchSampler,
    trials: usize,
    batch_size: usize,
    rng_seed: u64,
) -> Result<f64, ModelError> {
    assert!(trials >= 1);
    let mut hits = 0usize;
    for trial in 0..trials {
        let mut rng = trial_rng(rng_seed, trial as u64);
        let batch = sampler.sample(&mut rng, batch_size);
        let state = classify_model_batch(params, &batch)?;
        if state.state == BoundaryState::Insecure {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// Rejection-samples batches until one classifies insecure.
///
/// Returns the batch and the number of trials spent.
pub fn curate_insecure_batch(
    params: &FcnParams,
    sampler: &dyn BatchSampler,
    batch_size: usize,
    max_trials: usize,
    rng_seed: u64,
) -> Result<(Batch, usize), ExclusivityError> {
    assert!(max_trials >= 1);
    for trial in 0..max_trials {
        let mut rng = trial_rng(rng_seed, trial as u64);
        let batch = sampler.sample(&mut rng, batch_size);
        let state = classify_model_batch(params, &batch)?;
        if state.state == BoundaryState::Insecure {
            return Ok((batch, trial + 1));
        }
    }
    Err(ExclusivityError::CurationFailed { trials: max_trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn pattern(masks: Vec<Vec<Vec<u8>>>) -> ActivationPattern {
        ActivationPattern::new(masks)
    }

    /// Literal double loop over neurons × samples.
    fn brute_force_counts(patterns: &ActivationPattern) -> Vec<Vec<usize>> {
        let m = patterns.batch_size();
        let layers = patterns.num_layers();
        let mut counts = vec![vec![0usize; layers]; m];
        for s in 0..m {
            for layer in 0..layers {
                for j in 0..patterns.masks[s][layer].len() {
                    let mine = patterns.masks[s][layer][j] == 1;
                    let others = (0..m)
                        .filter(|&o| o != s)
                        .all(|o| patterns.masks[o][layer][j] == 0);
                    if mine && others {
                        counts[s][layer] += 1;
                    }
                }
            }
        }
        counts
    }

    #[test]
    fn single_sample_every_active_neuron_is_exclusive() {
        let p = pattern(vec![vec![vec![1, 0, 1, 1, 0]]]);
        let table = exan_counts(&p);
        assert_eq!(table.counts, vec![vec![3]]);
        assert_eq!(table.indices[0][0], vec![0, 2, 3]);
    }

    #[test]
    fn two_sample_hand_example() {
        let p = pattern(vec![vec![vec![1, 0, 1, 0]], vec![vec![0, 1, 1, 0]]]);
        let table = exan_counts(&p);
        assert_eq!(table.counts, vec![vec![1], vec![1]]);
        assert_eq!(table.indices[0][0], vec![0]);
        assert_eq!(table.indices[1][0], vec![1]);
    }

    #[test]
    fn second_layer_pairs_split_as_expected() {
        let p = pattern(vec![
            vec![vec![1, 0], vec![1, 1, 1, 0, 0]],
            vec![vec![0, 1], vec![0, 0, 1, 1, 1]],
        ]);
        let table = exan_counts(&p);
        assert_eq!(table.indices[0][1], vec![0, 1]);
        assert_eq!(table.indices[1][1], vec![3, 4]);
        assert_eq!(table.counts[0][1], 2);
        assert_eq!(table.counts[1][1], 2);
    }

    #[test]
    fn counts_match_brute_force_on_random_batches() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..1000 {
            let m = rng.random_range(1..6);
            let layers = rng.random_range(1..4);
            let widths: Vec<usize> = (0..layers).map(|_| rng.random_range(1..9)).collect();
            let masks: Vec<Vec<Vec<u8>>> = (0..m)
                .map(|_| {
                    widths
                        .iter()
                        .map(|&w| (0..w).map(|_| u8::from(rng.random_bool(0.5))).collect())
                        .collect()
                })
                .collect();
            let p = pattern(masks);
            let table = exan_counts(&p);
            assert_eq!(table.counts, brute_force_counts(&p));
            // Index lists are disjoint across samples at every layer.
            for layer in 0..layers {
                let mut seen = std::collections::HashSet::new();
                for s in 0..m {
                    for &j in &table.indices[s][layer] {
                        assert!(seen.insert(j), "index {j} claimed twice at layer {layer}");
                    }
                }
            }
        }
    }

    #[test]
    fn classification_cases() {
        // All samples: 2 ExANs at the last layer, 1 at the inner layer.
        let insecure = ExanTable {
            counts: vec![vec![1, 2], vec![1, 3]],
            indices: vec![vec![vec![0], vec![0, 1]], vec![vec![1], vec![2, 3, 4]]],
        };
        assert_eq!(classify_batch(&insecure, 2, 4).state, BoundaryState::Insecure);

        // Zero first-layer ExANs everywhere and M > d1.
        let secure = ExanTable {
            counts: vec![vec![0, 2]; 8],
            indices: vec![vec![vec![], vec![0, 1]]; 8],
        };
        assert_eq!(classify_batch(&secure, 8, 7).state, BoundaryState::Secure);
        // Same counts but M ≤ d1 is not secure.
        assert_eq!(classify_batch(&secure, 8, 8).state, BoundaryState::Other);

        // One sample short at the last layer, nonzero first-layer counts.
        let other = ExanTable {
            counts: vec![vec![1, 1], vec![1, 2]],
            indices: vec![vec![vec![0], vec![0]], vec![vec![1], vec![1, 2]]],
        };
        assert_eq!(classify_batch(&other, 2, 4).state, BoundaryState::Other);
    }

    #[test]
    fn classification_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..50 {
            let m = rng.random_range(2..5);
            let counts: Vec<Vec<usize>> =
                (0..m).map(|_| (0..2).map(|_| rng.random_range(0..4)).collect()).collect();
            let indices = counts
                .iter()
                .map(|c| c.iter().map(|&n| (0..n).collect()).collect())
                .collect();
            let table = ExanTable { counts: counts.clone(), indices };
            let base = classify_batch(&table, m, 1).state;
            let rev_table = ExanTable {
                counts: counts.iter().rev().cloned().collect(),
                indices: counts
                    .iter()
                    .rev()
                    .map(|c| c.iter().map(|&n| (0..n).collect()).collect())
                    .collect(),
            };
            assert_eq!(classify_batch(&rev_table, m, 1).state, base);
        }
    }

    struct FixedSampler(Batch);

    impl BatchSampler for FixedSampler {
        fn sample(&self, _rng: &mut ChaCha8Rng, _m: usize) -> Batch {
            self.0.clone()
        }
    }

    /// A model plus batch where both samples activate disjoint neuron pairs,
    /// so the batch is insecure by construction.
    fn always_insecure_setup() -> (FcnParams, Batch) {
        // First-layer rows: +x0, -x0, +x1, -x1 → each sample owns two neurons.
        let w0 = crate::linalg::DenseMatrix::new(
            4,
            2,
            vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        );
        let w1 = crate::linalg::DenseMatrix::from_fn(3, 4, |r, c| {
            0.1 * (r as f64 + 1.0) + c as f64 * 0.01
        });
        let params =
            FcnParams::new(vec![w0, w1], vec![vec![0.0; 4], vec![0.0; 3]], true).unwrap();
        let batch = Batch::new(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![0, 1], 3);
        (params, batch)
    }

    #[test]
    fn insecure_proportion_of_constructed_source_is_one() {
        let (params, batch) = always_insecure_setup();
        let sampler = FixedSampler(batch);
        let p = insecure_proportion(&params, &sampler, 1, 2, 0).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn width_one_layer_cannot_be_insecure_for_two_samples() {
        let params = FcnParams::random(&[4, 1, 3], true, 5);
        let sampler = UniformSampler { d0: 4, num_classes: 3 };
        let p = insecure_proportion(&params, &sampler, 50, 2, 0).unwrap();
        assert_eq!(p, 0.0);
        let err = curate_insecure_batch(&params, &sampler, 2, 20, 0).unwrap_err();
        assert!(matches!(err, ExclusivityError::CurationFailed { trials: 20 }));
    }

    #[test]
    fn proportion_non_decreasing_in_width() {
        let sampler = UniformSampler { d0: 16, num_classes: 10 };
        let mut last = 0.0f64;
        for (i, width) in [300usize, 400, 500, 600, 700].into_iter().enumerate() {
            let params = FcnParams::random(&[16, width, 10], true, 100 + i as u64);
            let p = insecure_proportion(&params, &sampler, 200, 8, 42).unwrap();
            assert!(p >= last - 0.05, "width {width}: proportion {p} dropped below {last}");
            last = last.max(p);
        }
    }

    #[test]
    fn curation_succeeds_on_wide_model() {
        let params = FcnParams::random(&[24, 512, 10], true, 7);
        let sampler = UniformSampler { d0: 24, num_classes: 10 };
        let (batch, trials) = curate_insecure_batch(&params, &sampler, 8, 1000, 9).unwrap();
        assert!(trials <= 1000);
        let state = classify_model_batch(&params, &batch).unwrap();
        assert_eq!(state.state, BoundaryState::Insecure);
    }

    #[test]
    fn always_insecure_source_returns_on_first_trial() {
        let (params, batch) = always_insecure_setup();
        let sampler = FixedSampler(batch);
        let (_, trials) = curate_insecure_batch(&params, &sampler, 2, 10, 0).unwrap();
        assert_eq!(trials, 1);
    }
}
