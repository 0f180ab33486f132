import numpy as np
import pytest

from gtflow.engine import SolverConfig
from gtflow.graph import SwitchingSchedule, SwitchMode, make_khop_ring
from gtflow.svmlab import (Classifier, LabeledDataset, centralized_oracle,
                           dataset_from_csv, dataset_to_csv, dsvm_experiment,
                           evaluate, feature_map, generate_ellipse_data,
                           partition)


def test_kernel_identity():
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, size=(50, 2))
    b = rng.uniform(-1, 1, size=(50, 2))
    lhs = np.sum(feature_map(a) * feature_map(b), axis=1)
    rhs = np.sum(a * b, axis=1) ** 2
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_generate_labels_follow_radius_rule():
    data = generate_ellipse_data(300, seed=3, radius=0.6, margin_gap=0.0)
    dist = np.hypot(data.points[:, 0], data.points[:, 1])
    # ties and interior points go negative
    assert np.all(data.labels[dist <= 0.6] == -1.0)
    assert np.all(data.labels[dist > 0.6] == 1.0)


def test_generate_respects_margin_gap_and_determinism():
    data = generate_ellipse_data(200, seed=7, radius=0.6, margin_gap=0.05)
    dist = np.hypot(data.points[:, 0], data.points[:, 1])
    assert np.all(np.abs(dist - 0.6) >= 0.05)
    again = generate_ellipse_data(200, seed=7, radius=0.6, margin_gap=0.05)
    assert (data.points == again.points).all()
    assert (data.labels == again.labels).all()


def test_generate_margin_budget_exhausts():
    with pytest.raises(ValueError, match="budget"):
        generate_ellipse_data(50, seed=1, radius=0.6, margin_gap=2.0,
                              resample_budget=10)


def test_generated_data_separable_in_feature_space():
    # the large-margin baseline classifies a gapped dataset perfectly
    data = generate_ellipse_data(200, seed=7, radius=0.6, margin_gap=0.05)
    result = centralized_oracle(data, C=50.0, mu=4.0, eps_nu=1e-6, tol=2e-4,
                                max_iter=400000)
    accuracy, confusion = evaluate(result.classifier, data)
    assert accuracy == 1.0
    margins = data.labels * result.classifier.decision_values(data.points)
    assert margins.min() > 0


def test_partition_single_agent_and_stratified_counts():
    data = generate_ellipse_data(200, seed=11, radius=0.8, margin_gap=0.05)
    single = partition(data, 1)
    assert single.counts == [200]
    part = partition(data, 5, "stratified", seed=2)
    assert part.counts == [40] * 5
    global_pos = int(np.sum(data.labels > 0))
    for agents in part.agents:
        pos = int(np.sum(data.labels[list(agents)] > 0))
        assert abs(pos - global_pos / 5) <= 1


def test_partition_contiguous_gives_single_label_shards():
    order = np.argsort(np.concatenate([np.full(30, -1.0), np.full(30, 1.0)]))
    pts = np.random.default_rng(0).uniform(-1, 1, size=(60, 2))
    labels = np.concatenate([np.full(30, -1.0), np.full(30, 1.0)])[order]
    data = LabeledDataset(pts, np.sort(labels))
    part = partition(data, 2, "contiguous")
    for agents in part.agents:
        assert len(set(data.labels[list(agents)])) == 1


def test_partition_disjoint_exhaustive_all_modes():
    data = generate_ellipse_data(101, seed=5, radius=0.7, margin_gap=0.0)
    for mode in ("stratified", "contiguous"):
        for seed in (0, 1, 2):
            part = partition(data, 7, mode, seed)
            flat = sorted(i for grp in part.agents for i in grp)
            assert flat == list(range(101))


def test_partition_rejects_too_many_agents():
    data = generate_ellipse_data(10, seed=5, radius=0.7, margin_gap=0.0)
    with pytest.raises(ValueError):
        partition(data, 11)


def test_oracle_reaches_stationarity():
    data = generate_ellipse_data(120, seed=13, radius=0.8, margin_gap=0.1)
    result = centralized_oracle(data, C=1.0, mu=2.0, tol=1e-7)
    assert result.gradient_norm <= 1e-7


def test_oracle_doubling_c_does_not_increase_hinge_term():
    from gtflow.cost import smoothed_hinge

    data = generate_ellipse_data(120, seed=17, radius=0.8, margin_gap=0.1)
    feats = feature_map(data.points)

    def hinge_sum(clf):
        z = 1.0 - data.labels * (feats @ clf.omega - clf.nu)
        val, _, _ = smoothed_hinge(z, 2.0)
        return float(np.sum(val))

    low = centralized_oracle(data, C=1.0, mu=2.0, tol=1e-6)
    high = centralized_oracle(data, C=2.0, mu=2.0, tol=1e-6)
    assert hinge_sum(high.classifier) <= hinge_sum(low.classifier) + 1e-9


def test_oracle_label_flip_negates_classifier():
    data = generate_ellipse_data(100, seed=19, radius=0.8, margin_gap=0.1)
    flipped = LabeledDataset(data.points, -data.labels)
    a = centralized_oracle(data, C=1.0, mu=2.0, eps_nu=1e-6, tol=2e-6)
    b = centralized_oracle(flipped, C=1.0, mu=2.0, eps_nu=1e-6, tol=2e-6)
    assert np.allclose(a.classifier.stacked, -b.classifier.stacked, atol=2e-5)


def test_evaluate_tie_rule():
    data = LabeledDataset(np.array([[0.5, 0.0], [0.0, 0.5]]),
                          np.array([1.0, -1.0]))
    zero_clf = Classifier(np.zeros(3), 0.0)
    accuracy, confusion = evaluate(zero_clf, data)
    assert accuracy == 0.0
    assert confusion["ties"] == 2


def test_evaluate_negation_flips_non_ties():
    data = generate_ellipse_data(80, seed=23, radius=0.7, margin_gap=0.05)
    clf = Classifier(np.array([1.0, 1.0, 0.0]), 0.49)
    acc, _ = evaluate(clf, data)
    neg_acc, _ = evaluate(Classifier(-clf.omega, -clf.nu), data)
    values = clf.decision_values(data.points)
    non_tie = np.mean(values != 0)
    assert acc + neg_acc == pytest.approx(non_tie)


def test_dataset_csv_round_trip():
    data = generate_ellipse_data(40, seed=29, radius=0.6, margin_gap=0.0)
    back = dataset_from_csv(dataset_to_csv(data))
    assert (back.points == data.points).all()
    assert (back.labels == data.labels).all()


def test_dsvm_experiment_smoke():
    # small fixture: identity links, short horizon; field sanity only
    data = generate_ellipse_data(45, seed=31, radius=0.8, margin_gap=0.1)
    part = partition(data, 3, "stratified", seed=1)
    sched = SwitchingSchedule(make_khop_ring(3, 1, 0.8), 0.01,
                              rng_seed=2, mode=SwitchMode.PERMUTE)
    solver = SolverConfig(alpha=1.0, eta=0.01, t_end=5.0, schedule_x=sched,
                          sample_stride=50)
    report = dsvm_experiment(data, part, solver, C=1.0, mu=2.0,
                             regularizer_mode="matched", x0_seed=3)
    assert report.status == "completed"
    assert len(report.agent_classifiers) == 3
    assert report.consensus_spread >= 0
    assert 0 <= report.consensus_accuracy <= 1
    assert report.trace.lyapunov is not None
    text = "\n".join(report.summary_lines())
    assert "distance_to_oracle" in text


def test_dsvm_regularizer_mode_validation():
    data = generate_ellipse_data(30, seed=37, radius=0.8, margin_gap=0.1)
    part = partition(data, 3)
    sched = SwitchingSchedule(make_khop_ring(3, 1, 0.8), 0.01)
    solver = SolverConfig(alpha=1.0, eta=0.01, t_end=0.1, schedule_x=sched)
    with pytest.raises(ValueError, match="regularizer"):
        dsvm_experiment(data, part, solver, regularizer_mode="averaged")
