use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::crypto::rng::seeded_rng;
use crate::model::{dirichlet_partition, generate_synthetic, Matrix};
use crate::privacy::MechanismKind;

fn pv(values: Vec<f64>) -> ParamVector {
    ParamVector::from_vec(values)
}

fn default_fed_config(seed: u64) -> FederationConfig {
    FederationConfig {
        model: ModelSpec::logistic(8, 3),
        optimizer: OptimizerKind::Adam,
        learning_rate: 0.01,
        local_epochs: 1,
        batch_size: 16,
        aggregation: AggregationMode::FedAvg,
        eta_p: 0.01,
        lambda: 0.1,
        privacy: PrivacyConfig::default(),
        master_seed: seed,
        weighted: false,
        parallel: false,
    }
}

fn small_federation(
    n_clients: usize,
    mechanism: MechanismKind,
    aggregation: AggregationMode,
    seed: u64,
) -> Federation {
    let data = generate_synthetic(40 * n_clients, 8, 3, seed).unwrap();
    let shards = dirichlet_partition(&data, n_clients, 10.0, seed).unwrap();
    let cfg = FederationConfig {
        aggregation,
        privacy: PrivacyConfig {
            mechanism,
            key_bits: 256,
            ..PrivacyConfig::default()
        },
        ..default_fed_config(seed)
    };
    Federation::new(cfg, shards).unwrap()
}

#[test]
fn fed_avg_single_model_is_identity() {
    let m = pv(vec![1.0, -2.0, 3.5]);
    assert_eq!(fed_avg(std::slice::from_ref(&m)).unwrap(), m);
}

#[test]
fn fed_avg_hand_example() {
    let mean = fed_avg(&[pv(vec![1.0, 2.0]), pv(vec![3.0, 4.0])]).unwrap();
    assert_eq!(mean.as_slice(), &[2.0, 3.0]);
}

#[test]
fn fed_avg_of_identical_models_is_that_model() {
    let m = pv(vec![0.25, -1.5, 7.0]);
    let mean = fed_avg(&[m.clone(), m.clone(), m.clone()]).unwrap();
    for (a, b) in mean.iter().zip(m.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn fed_avg_rejects_empty_and_ragged() {
    assert!(fed_avg(&[]).is_err());
    assert!(fed_avg(&[pv(vec![1.0]), pv(vec![1.0, 2.0])]).is_err());
}

#[test]
fn apple_personalize_one_hot_selects_own_model() {
    let cores = vec![pv(vec![1.0, 2.0]), pv(vec![3.0, 4.0]), pv(vec![5.0, 6.0])];
    let w = apple_personalize(&[0.0, 1.0, 0.0], &cores).unwrap();
    assert_eq!(w, cores[1]);
}

#[test]
fn apple_personalize_uniform_equals_fed_avg() {
    let mut rng = seeded_rng(1, 1);
    let cores: Vec<ParamVector> = (0..5)
        .map(|_| pv((0..7).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()))
        .collect();
    let uniform = vec![1.0 / 5.0; 5];
    let w = apple_personalize(&uniform, &cores).unwrap();
    let avg = fed_avg(&cores).unwrap();
    for (a, b) in w.iter().zip(avg.iter()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn apple_personalize_matches_brute_force() {
    let cores = vec![
        pv(vec![1.0, -2.0]),
        pv(vec![0.5, 3.0]),
        pv(vec![-1.0, 0.25]),
    ];
    let p = [0.3, -0.4, 1.1];
    let w = apple_personalize(&p, &cores).unwrap();
    for i in 0..2 {
        let expected: f64 = (0..3).map(|j| p[j] * cores[j].as_slice()[i]).sum();
        assert!((w.as_slice()[i] - expected).abs() < 1e-12);
    }
}

#[test]
fn apple_personalize_length_mismatch_is_config_error() {
    let cores = vec![pv(vec![1.0]), pv(vec![2.0])];
    assert!(matches!(
        apple_personalize(&[1.0], &cores),
        Err(crate::Error::Config(_))
    ));
}

fn random_apple_setup(seed: u64, n: usize) -> (ModelSpec, Vec<ParamVector>, Vec<f64>, Dataset) {
    let spec = ModelSpec::logistic(4, 3);
    let mut rng = seeded_rng(seed, 77);
    let cores: Vec<ParamVector> = (0..n)
        .map(|_| {
            pv((0..spec.param_count())
                .map(|_| rng.random::<f64>() - 0.5)
                .collect())
        })
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let data: Vec<f64> = (0..6 * 4)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    let labels: Vec<usize> = (0..6).map(|_| rng.random_range(0..3)).collect();
    let batch = Dataset::new(Matrix::from_vec(6, 4, data), labels, 3).unwrap();
    (spec, cores, weights, batch)
}

#[test]
fn apple_weight_gradient_zero_cores_zero_lambda_is_zero() {
    let spec = ModelSpec::logistic(4, 3);
    let cores = vec![ParamVector::zeros(spec.param_count()); 3];
    let (_, _, weights, batch) = random_apple_setup(5, 3);
    let grad = apple_weight_gradient(&spec, &weights, &cores, 0, &batch, 0.0).unwrap();
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn apple_weight_gradient_matches_finite_differences() {
    // Central finite differences on the full objective
    // L(sum_j p_j c_j) + lambda * sum_j (p_j - delta_ij)^2.
    for seed in [1u64, 2, 3] {
        let (spec, cores, weights, batch) = random_apple_setup(seed, 4);
        let self_index = 1;
        let lambda = 0.1;
        let analytic =
            apple_weight_gradient(&spec, &weights, &cores, self_index, &batch, lambda).unwrap();
        let h = 1e-6;
        let objective = |p: &[f64]| -> f64 {
            let w = apple_personalize(p, &cores).unwrap();
            let l = crate::model::loss(&spec, &w, &batch).unwrap();
            let penalty: f64 = p
                .iter()
                .enumerate()
                .map(|(j, &pj)| {
                    let d = pj - if j == self_index { 1.0 } else { 0.0 };
                    d * d
                })
                .sum();
            l + lambda * penalty
        };
        let mut max_rel = 0.0f64;
        for j in 0..weights.len() {
            let mut plus = weights.clone();
            plus[j] += h;
            let mut minus = weights.clone();
            minus[j] -= h;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
            let denom = analytic[j].abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max((analytic[j] - numeric).abs() / denom);
        }
        assert!(max_rel < 1e-5, "seed {seed}: rel err {max_rel}");
    }
}

#[test]
fn apple_weight_penalty_vanishes_at_one_hot() {
    // With p = one-hot at self, a huge lambda contributes nothing: the
    // penalty is at its minimizer.
    let (spec, cores, _, batch) = random_apple_setup(9, 3);
    let mut one_hot = vec![0.0; 3];
    one_hot[2] = 1.0;
    let with_penalty = apple_weight_gradient(&spec, &one_hot, &cores, 2, &batch, 1e9).unwrap();
    let without = apple_weight_gradient(&spec, &one_hot, &cores, 2, &batch, 0.0).unwrap();
    for (a, b) in with_penalty.iter().zip(&without) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

fn make_client(seed: u64, n: usize) -> ClientState {
    let data = generate_synthetic(60, 8, 3, seed).unwrap();
    let spec = ModelSpec::logistic(8, 3);
    ClientState {
        client_id: 0,
        shard: data.clone(),
        test_shard: data,
        core_model: ParamVector::zeros(spec.param_count()),
        personal_weights: vec![1.0 / n as f64; n],
        optimizer: OptimizerState::new(OptimizerKind::Adam, 0.01, spec.param_count()),
    }
}

#[test]
fn local_train_zero_epochs_returns_start_model() {
    let mut client = make_client(3, 1);
    let spec = ModelSpec::logistic(8, 3);
    let start = pv((0..spec.param_count()).map(|i| i as f64 * 0.01).collect());
    let out = local_train(&mut client, &start, &spec, 0, 16, 0, 42, None).unwrap();
    assert_eq!(out.update, start);
    assert!(!out.empty_shard);
    assert!(out.mean_loss.is_some());
}

#[test]
fn local_train_empty_shard_flags_and_passes_through() {
    let spec = ModelSpec::logistic(8, 3);
    let empty = Dataset::new(Matrix::zeros(0, 8), vec![], 3).unwrap();
    let mut client = ClientState {
        client_id: 0,
        shard: empty.clone(),
        test_shard: empty,
        core_model: ParamVector::zeros(spec.param_count()),
        personal_weights: vec![1.0],
        optimizer: OptimizerState::new(OptimizerKind::Adam, 0.01, spec.param_count()),
    };
    let start = pv(vec![0.5; spec.param_count()]);
    let out = local_train(&mut client, &start, &spec, 3, 16, 0, 42, None).unwrap();
    assert!(out.empty_shard);
    assert_eq!(out.update, start);
}

#[test]
fn local_train_is_deterministic() {
    let spec = ModelSpec::logistic(8, 3);
    let start = ParamVector::zeros(spec.param_count());
    let run = || {
        let mut client = make_client(4, 1);
        local_train(&mut client, &start, &spec, 2, 8, 5, 42, None)
            .unwrap()
            .update
    };
    let a = run();
    let b = run();
    assert_eq!(a, b); // bit-identical
}

#[test]
fn local_train_reaches_local_accuracy_on_separable_data() {
    let spec = ModelSpec::logistic(8, 3);
    let mut client = make_client(5, 1);
    let start = ParamVector::zeros(spec.param_count());
    let out = local_train(&mut client, &start, &spec, 30, 16, 0, 42, None).unwrap();
    let preds = predict(&spec, &out.update, client.test_shard.features()).unwrap();
    let correct = preds
        .iter()
        .zip(client.test_shard.labels())
        .filter(|(p, t)| p == t)
        .count();
    let acc = correct as f64 / client.test_shard.len() as f64;
    assert!(acc >= 0.9, "local accuracy {acc}");
}

#[test]
fn run_round_none_single_client_zero_epochs_keeps_global() {
    let data = generate_synthetic(50, 8, 3, 6).unwrap();
    let cfg = FederationConfig {
        local_epochs: 0,
        ..default_fed_config(6)
    };
    let mut fed = Federation::new(cfg, vec![data]).unwrap();
    let before = fed.server().global_model.clone();
    fed.run_round().unwrap();
    assert_eq!(fed.server().global_model, before);
    assert_eq!(fed.server().round_index, 1);
}

#[test]
fn protected_mechanisms_match_plaintext_pipeline() {
    // Same seeds, mechanism none vs sa/smpc/he: identical global model
    // within the codec tolerance.
    let baseline = {
        let mut fed = small_federation(4, MechanismKind::None, AggregationMode::FedAvg, 7);
        fed.run_round().unwrap();
        fed.server().global_model.clone()
    };
    for mechanism in [MechanismKind::Sa, MechanismKind::Smpc, MechanismKind::He] {
        let mut fed = small_federation(4, mechanism, AggregationMode::FedAvg, 7);
        fed.run_round().unwrap();
        let diff = fed
            .server()
            .global_model
            .iter()
            .zip(baseline.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff <= 1e-4, "{mechanism:?} differs by {diff}");
    }
}

#[test]
fn traces_are_seed_deterministic() {
    let run = |parallel: bool| {
        let data = generate_synthetic(120, 8, 3, 8).unwrap();
        let shards = dirichlet_partition(&data, 4, 0.5, 8).unwrap();
        let cfg = FederationConfig {
            parallel,
            aggregation: AggregationMode::Apple,
            ..default_fed_config(8)
        };
        let mut fed = Federation::new(cfg, shards).unwrap();
        fed.run(3, 1, |_| Ok(())).unwrap()
    };
    let a = run(false);
    let b = run(false);
    let c = run(true);
    let strip = |records: &[RoundRecord]| -> Vec<(u64, [u64; 7], u64, u64)> {
        records
            .iter()
            .map(|r| {
                (
                    r.round_index,
                    [
                        r.global_accuracy.to_bits(),
                        r.global_precision.to_bits(),
                        r.global_recall.to_bits(),
                        r.global_f1.to_bits(),
                        r.mean_personal_accuracy.to_bits(),
                        r.mean_loss.to_bits(),
                        0,
                    ],
                    r.bytes_up,
                    r.bytes_down,
                )
            })
            .collect()
    };
    assert_eq!(strip(&a), strip(&b), "serial reruns differ");
    assert_eq!(strip(&a), strip(&c), "parallel execution changes the trace");
}

#[test]
fn run_zero_rounds_is_empty_trace() {
    let data = generate_synthetic(60, 8, 3, 9).unwrap();
    let mut fed = Federation::new(default_fed_config(9), vec![data]).unwrap();
    let records = fed.run(0, 1, |_| Ok(())).unwrap();
    assert!(records.is_empty());
}

#[test]
fn eval_interval_thins_records() {
    let data = generate_synthetic(90, 8, 3, 10).unwrap();
    let shards = dirichlet_partition(&data, 3, 0.5, 10).unwrap();
    let mut fed = Federation::new(default_fed_config(10), shards).unwrap();
    let records = fed.run(5, 2, |_| Ok(())).unwrap();
    let indices: Vec<u64> = records.iter().map(|r| r.round_index).collect();
    assert_eq!(indices, vec![1, 3, 4]); // rounds 2, 4, and the final 5th
}

#[test]
fn weighted_aggregation_matches_hand_weighted_mean() {
    // Same seed with and without weighting; the weighted global model must
    // equal the shard-size-weighted mean of the clients' local updates.
    let data = generate_synthetic(150, 8, 3, 12).unwrap();
    let shards = dirichlet_partition(&data, 3, 0.3, 12).unwrap();
    let make = |weighted: bool| FederationConfig {
        weighted,
        ..default_fed_config(12)
    };
    let mut plain = Federation::new(make(false), shards.clone()).unwrap();
    plain.run_round().unwrap();
    let updates: Vec<ParamVector> = plain
        .clients()
        .iter()
        .map(|c| c.core_model.clone())
        .collect();
    let sizes: Vec<f64> = plain
        .clients()
        .iter()
        .map(|c| c.shard.len() as f64)
        .collect();
    let total: f64 = sizes.iter().sum();
    let mut expected = ParamVector::zeros(updates[0].len());
    for (u, &s) in updates.iter().zip(&sizes) {
        expected.add_scaled(u, s / total);
    }

    let mut weighted = Federation::new(make(true), shards).unwrap();
    weighted.run_round().unwrap();
    let diff = max_diff(&weighted.server().global_model, &expected);
    assert!(diff < 1e-12, "weighted mean off by {diff}");

    let plain_diff = max_diff(&plain.server().global_model, &expected);
    assert!(plain_diff > 1e-6, "shard sizes too uniform to distinguish");

    fn max_diff(a: &ParamVector, b: &ParamVector) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

#[test]
fn byte_accounting_scales_with_mode() {
    let mut fedavg = small_federation(3, MechanismKind::None, AggregationMode::FedAvg, 11);
    let mut apple = small_federation(3, MechanismKind::None, AggregationMode::Apple, 11);
    let r1 = fedavg.run_round().unwrap();
    let r2 = apple.run_round().unwrap();
    // cross-silo broadcast ships all cores to every client
    assert_eq!(r2.bytes_down, 3 * r1.bytes_down);
    assert!(r1.bytes_up > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn prop_fed_avg_is_permutation_invariant(
        seed in 0u64..100,
        n in 2usize..6,
        dim in 1usize..8,
    ) {
        let mut rng = seeded_rng(seed, 9);
        let models: Vec<ParamVector> = (0..n)
            .map(|_| pv((0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()))
            .collect();
        let mean = fed_avg(&models).unwrap();
        let mut reversed = models.clone();
        reversed.reverse();
        let mean_rev = fed_avg(&reversed).unwrap();
        for (a, b) in mean.iter().zip(mean_rev.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
