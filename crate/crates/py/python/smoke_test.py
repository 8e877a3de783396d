"""Exercise the bindings end to end. Run after `maturin develop` (or
`pip install crates/py`)."""

import math

import nbprune


def main():
    # worked instance: two identical points and one orthogonal point
    g = nbprune.NeighborGraph.build([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 0.5)
    assert len(g) == 3 and g.num_edges == 5, g
    assert g.weight(0, 1) == 1.0 and g.weight(0, 2) is None
    run = nbprune.greedy(g, [0.9, 0.8, 0.7], 2)
    assert run["selected"] == [0, 2], run
    assert abs(run["objective"] - (2 * math.tanh(0.9) + math.tanh(0.7))) < 1e-9
    assert nbprune.brute_force_optimum(g, [0.9, 0.8, 0.7], 2)[0] == [0, 2]

    ds = nbprune.generate_synthetic(classes=5, per_class=60, dim=16, concentration=50.0, seed=1)
    assert len(ds) == 300 and ds.num_classes == 5
    assert len(ds.noisy_indices()) == 5 * 12
    conf = ds.confidence("max_prob")
    graph = nbprune.NeighborGraph.from_dataset(ds, 0.99)
    alpha, beta = nbprune.measure_expansion_separation(ds, graph)
    assert alpha > 0 and 0 <= beta <= 1

    report = nbprune.select(ds, "prune4rel", ratio=0.2, graph=graph, confidence=conf)
    assert report["selected_count"] == 60 and len(report["selected"]) == 60
    assert report["noise_ratio"] < 0.2, report["noise_ratio"]

    balanced = nbprune.greedy_balanced(graph, conf, ds.noisy_labels, ds.num_classes, 50)
    counts = [0] * ds.num_classes
    for i in balanced["selected"]:
        counts[ds.noisy_labels[i]] += 1
    assert max(counts) - min(counts) <= 1, counts

    kc = nbprune.select(ds, "kcenter_greedy", size=30, seed=4)
    assert kc["objective_value"] is None and len(set(kc["selected"])) == 30

    sel = report["selected"]
    full = nbprune.greedy(graph, conf, 60)
    corrected = nbprune.relabel_proxy(ds, graph, conf, sel)
    table = nbprune.correlation_report(full["nbr_conf"], corrected)
    assert len(table["bins"]) == 15

    assert nbprune.tau_preset("cifar10n") == 0.975
    try:
        nbprune.select(ds, "prune4rel", size=0, graph=graph, confidence=conf)
    except ValueError as e:
        assert str(e).startswith("E_ARG"), e
    else:
        raise AssertionError("empty budget accepted")
    try:
        nbprune.NeighborGraph.build([[1.0, 0.0]] * 200, 0.5, max_edges=100)
    except RuntimeError as e:
        assert str(e).startswith("E_GUARD"), e
    else:
        raise AssertionError("edge cap ignored")
    print("smoke test passed:", nbprune.__version__)


if __name__ == "__main__":
    main()
