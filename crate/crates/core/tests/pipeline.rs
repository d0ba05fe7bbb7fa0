mod common;

use proptest::prelude::*;
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use tsp_core::benchmark::{run_benchmark, sweep_k, BenchConfig, Baseline};
use tsp_core::decoding::{decode, probability_matrix, score_matrix, DecodeConfig};
use tsp_core::encoding::encode_inference;
use tsp_core::exact::held_karp;
use tsp_core::geometry::{generate_instance, tour_length, validate_tour, Point, TspInstance};
use tsp_core::predictor::{PredictionSet, PredictorSpec};
use tsp_core::Tour;

fn shuffled(n: usize, seed: u64) -> Tour {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, (rng.next_u64() % (i as u64 + 1)) as usize);
    }
    Tour::new(order)
}

fn oracle_preds(inst: &TspInstance, reference: &Tour) -> PredictionSet {
    let table = encode_inference(inst, 1).unwrap();
    PredictorSpec::oracle()
        .unfitted(None)
        .predict(&table, Some(reference), inst.id())
        .unwrap()
}

#[test]
fn oracle_round_trip_on_random_n50() {
    let inst = generate_instance(50, 2024).unwrap();
    // a random permutation is reproducible once every pair is a candidate
    let reference = shuffled(50, 9);
    let cfg = DecodeConfig {
        m_spatial: 49,
        ..DecodeConfig::default()
    };
    let tour = decode(&inst, &oracle_preds(&inst, &reference), &cfg).unwrap();
    assert_eq!(tour.edge_set(), reference.edge_set());
}

#[test]
fn decode_is_deterministic() {
    let inst = generate_instance(60, 5).unwrap();
    let preds = PredictionSet::new(generate_instance(60, 6).unwrap().nodes().to_vec());
    let a = decode(&inst, &preds, &DecodeConfig::default()).unwrap();
    for _ in 0..3 {
        assert_eq!(decode(&inst, &preds, &DecodeConfig::default()).unwrap(), a);
    }
}

#[test]
fn decode_never_beats_the_exact_optimum() {
    for seed in 0..20 {
        let inst = generate_instance(8, seed).unwrap();
        let (_, opt) = held_karp(&inst).unwrap();
        let preds = PredictionSet::new(generate_instance(8, 1000 + seed).unwrap().nodes().to_vec());
        let t = decode(&inst, &preds, &DecodeConfig::default()).unwrap();
        assert!(tour_length(&inst, &t).unwrap() >= opt - 1e-9);
    }
}

#[test]
fn nearest_on_corners_is_a_valid_cycle() {
    let inst = TspInstance::new(
        "corners",
        vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ],
    )
    .unwrap();
    let table = encode_inference(&inst, 2).unwrap();
    let preds = PredictorSpec::nearest().unfitted(None).predict(&table, None, "c").unwrap();
    let t = decode(&inst, &preds, &DecodeConfig::default()).unwrap();
    assert!(validate_tour(&inst, &t).is_valid());
}

#[test]
fn oracle_benchmark_has_zero_gap() {
    let entries: Vec<_> = (0..30)
        .map(|s| {
            let inst = generate_instance(11, 40 + s).unwrap();
            let (t, _) = held_karp(&inst).unwrap();
            (inst, Some(t))
        })
        .collect();
    let report = run_benchmark(
        &entries,
        &PredictorSpec::oracle().unfitted(None),
        &BenchConfig::default(),
        Baseline::Reference,
    )
    .unwrap();
    assert_eq!(report.aggregates().count, 30);
    assert_eq!(report.aggregates().mean_gap_percent, 0.0);
}

#[test]
fn two_opt_weakly_lowers_the_mean_gap() {
    let entries = common::random_set(12, 30, 7000);
    let nearest = PredictorSpec::nearest().unfitted(None);
    let plain = run_benchmark(&entries, &nearest, &BenchConfig::default(), Baseline::HeldKarp).unwrap();
    let polished = BenchConfig {
        two_opt: true,
        ..BenchConfig::default()
    };
    let polished = run_benchmark(&entries, &nearest, &polished, Baseline::HeldKarp).unwrap();
    assert!(polished.aggregates().mean_gap_percent <= plain.aggregates().mean_gap_percent);
    for (a, b) in plain.records.iter().zip(&polished.records) {
        assert_eq!(a.instance_id, b.instance_id);
        assert!(b.length <= a.length);
        assert!(b.gap_percent >= 0.0);
    }
}

#[test]
fn nearest_sweep_ignores_k() {
    let train = generate_instance(12, 3).unwrap();
    let (train_tour, _) = held_karp(&train).unwrap();
    let eval = common::random_set(10, 6, 300);
    let pts = sweep_k(
        (&train, &train_tour),
        &eval,
        &PredictorSpec::nearest(),
        &[2, 5],
        &BenchConfig::default(),
        Baseline::HeldKarp,
    )
    .unwrap();
    assert_eq!(pts[0].mean_gap_percent, pts[1].mean_gap_percent);
}

#[test]
fn replaying_archived_predictions_reproduces_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("archive");
    let entries = common::random_set(14, 8, 90);
    let cfg = BenchConfig {
        k: 3,
        archive_dir: Some(archive.clone()),
        ..BenchConfig::default()
    };
    let first = run_benchmark(&entries, &PredictorSpec::nearest().unfitted(None), &cfg, Baseline::HeldKarp).unwrap();
    assert!(archive.join("config.json").is_file());

    let replay = PredictorSpec::parse(&format!("replay:{}", archive.display()), dir.path()).unwrap();
    let cfg = BenchConfig { k: 3, ..BenchConfig::default() };
    let second = run_benchmark(&entries, &replay.unfitted(None), &cfg, Baseline::HeldKarp).unwrap();
    assert_eq!(first.records.len(), second.records.len());
    for (a, b) in first.records.iter().zip(&second.records) {
        assert_eq!(a.length.to_bits(), b.length.to_bits());
        assert_eq!(a.tour, b.tour);
    }
}

#[test]
fn external_adapter_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let stub = common::write_stub(dir.path());
    let spec = PredictorSpec::parse(&format!("cmd:python3 {}", stub.display()), &dir.path().join("w")).unwrap();
    let train = generate_instance(12, 1).unwrap();
    let (train_tour, _) = held_karp(&train).unwrap();
    let pts = sweep_k(
        (&train, &train_tour),
        &common::random_set(9, 3, 10),
        &spec,
        &[1, 3],
        &BenchConfig::default(),
        Baseline::HeldKarp,
    )
    .unwrap();
    assert_eq!(pts.len(), 2);
    assert!(pts.iter().all(|p| p.instances == 3 && p.mean_gap_percent >= 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_normalise(n in 3usize..40, s1 in any::<u64>(), s2 in any::<u64>()) {
        let inst = generate_instance(n, s1).unwrap();
        let preds = PredictionSet::new(generate_instance(n, s2).unwrap().nodes().to_vec());
        let p = probability_matrix(&score_matrix(&inst, &preds).unwrap()).unwrap();
        let mut total = 0.0;
        for i in 0..n {
            prop_assert_eq!(p.get(i, i), 0.0);
            for j in 0..n {
                if i != j {
                    prop_assert!(p.get(i, j) > 0.0);
                    total += p.get(i, j);
                }
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn decode_always_yields_a_valid_tour(n in 3usize..60, s1 in any::<u64>(), s2 in any::<u64>(), m in 1usize..12) {
        let inst = generate_instance(n, s1).unwrap();
        let preds = PredictionSet::new(generate_instance(n, s2).unwrap().nodes().to_vec());
        let cfg = DecodeConfig { m_spatial: m, ..DecodeConfig::default() };
        let t = decode(&inst, &preds, &cfg).unwrap();
        prop_assert!(validate_tour(&inst, &t).is_valid());
        prop_assert_eq!(t.order()[0], 0);
    }
}
