use nbprune::dataset::{compute_confidence, compute_small_loss_scores};
use nbprune::selectors::{select_indices, SelectionInputs};
use nbprune::verify::{
    check_class_balance, check_degenerate, check_lazy_matches_eager, check_monotone_submodular,
    generate_synthetic, measure_expansion_separation, NoiseModel, SynthConfig,
};
use nbprune::{
    build_graph, AuxScoreKind, AuxScores, Budget, ConfidenceMetric, Method, SelectorConfig,
};
use proptest::prelude::*;
use proptest::test_runner::Config as ProptestConfig;

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        num_classes: 4,
        points_per_class: 30,
        embedding_dim: 8,
        within_class_concentration: 5.0,
        seed,
        ..Default::default()
    }
}

#[test]
fn every_method_returns_distinct_in_range_indices() {
    let ds = generate_synthetic(&small_synth(3)).unwrap();
    let m = ds.len();
    let graph = build_graph(ds.embeddings(), 0.7).unwrap();
    let conf = compute_confidence(ds.probabilities().unwrap(), ConfidenceMetric::MaxProb).unwrap();
    let loss = compute_small_loss_scores(ds.probabilities().unwrap(), ds.noisy_labels().unwrap()).unwrap();
    let other = AuxScores::new((0..m).map(|i| ((i * 37) % 11) as f64).collect(), AuxScoreKind::GradNorm).unwrap();
    for method in Method::ALL {
        let scores = if method == Method::SmallLoss { &loss } else { &other };
        let inputs = SelectionInputs::new(&ds).graph(&graph).confidence(&conf).scores(scores);
        for s in [1, 7, 40, m] {
            let mut cfg = SelectorConfig::new(method, Budget::Size(s));
            cfg.tau = Some(0.7);
            cfg.seed = 11;
            let sel = select_indices(&cfg, &inputs).unwrap();
            assert_eq!(sel.len(), s, "{method}");
            let mut sorted = sel.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), s, "{method} repeated an index");
            assert!(sorted.iter().all(|&i| i < m));
            assert_eq!(select_indices(&cfg, &inputs).unwrap(), sel, "{method} not deterministic");
        }
    }
}

#[test]
fn full_ratio_uniform_keeps_everything() {
    let ds = generate_synthetic(&small_synth(0)).unwrap();
    let cfg = SelectorConfig::new(Method::Uniform, Budget::Ratio(1.0));
    let mut sel = select_indices(&cfg, &SelectionInputs::new(&ds)).unwrap();
    sel.sort_unstable();
    assert_eq!(sel, (0..ds.len()).collect::<Vec<_>>());
}

#[test]
fn separation_lowers_cross_class_neighbors() {
    let mut last = f64::INFINITY;
    for sep in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let cfg = SynthConfig {
            num_classes: 5,
            points_per_class: 80,
            embedding_dim: 16,
            between_class_separation: sep,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let g = build_graph(ds.embeddings(), 0.8).unwrap();
        let (_, beta) = measure_expansion_separation(&ds, &g).unwrap();
        assert!(beta <= last + 1e-12, "beta {beta} rose above {last} at separation {sep}");
        last = beta;
    }
    assert!(last < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, .. ProptestConfig::default() })]

    #[test]
    fn synth_flip_counts_are_exact(
        classes in 2usize..6,
        per_class in 1usize..60,
        rate in 0.0f64..0.95,
        symmetric in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let cfg = SynthConfig {
            num_classes: classes,
            points_per_class: per_class,
            embedding_dim: classes + 2,
            noise_rate: rate,
            noise_model: if symmetric { NoiseModel::Symmetric } else { NoiseModel::AsymmetricNextClass },
            seed,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let noisy = ds.noisy_labels().unwrap();
        let truth = ds.ground_truth_labels().unwrap();
        let expected = (rate * per_class as f64).floor() as usize;
        for j in 0..classes {
            let flips = (0..ds.len()).filter(|&i| truth[i] == j && noisy[i] != j).count();
            prop_assert_eq!(flips, expected);
        }
        if !symmetric {
            for i in 0..ds.len() {
                prop_assert!(noisy[i] == truth[i] || noisy[i] == (truth[i] + 1) % classes);
            }
        }
    }
}

#[test]
fn property_drivers_pass_at_small_scale() {
    let (mono, sub) = check_monotone_submodular(100, 5).unwrap();
    assert!(mono.passed(), "{mono:?}");
    assert!(sub.passed(), "{sub:?}");
    let lazy = check_lazy_matches_eager(10, 300, 5).unwrap();
    assert!(lazy.passed(), "{lazy:?}");
    let degenerate = check_degenerate(20, 5).unwrap();
    assert!(degenerate.passed(), "{degenerate:?}");
    let balance = check_class_balance(20, 5).unwrap();
    assert!(balance.passed(), "{balance:?}");
}
