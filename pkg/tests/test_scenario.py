import numpy as np
import pytest

from cpsdetect.balance import imbalance_degree
from cpsdetect.errors import InvalidConfigError
from cpsdetect.scenario import (
    STATES,
    ScenarioConfig,
    class_counts,
    generate,
    generate_arrays,
    state_means,
)

SKEWED = (0.3016, 0.24, 0.2, 0.1784, 0.08)  # max/min = 3.77


def nearest_centroid_accuracy(config, train_frac=0.7):
    X, y = generate_arrays(config)
    cut = int(train_frac * len(y))
    cents = np.array([X[:cut][y[:cut] == k].mean(axis=0) for k in range(len(STATES))])
    d = ((X[cut:, None, :] - cents[None]) ** 2).sum(-1)
    return float(np.mean(np.argmin(d, axis=1) == y[cut:]))


def test_class_counts_match_proportions():
    counts = class_counts(5000, (0.35, 0.29, 0.25, 0.08, 0.03))
    assert counts.tolist() == [1750, 1450, 1250, 400, 150]
    assert imbalance_degree(counts) == pytest.approx(11.6667, abs=1e-4)
    c = class_counts(5000, SKEWED)
    assert c.tolist() == [1508, 1200, 1000, 892, 400]
    assert imbalance_degree(c) == pytest.approx(3.77)
    _, y = generate_arrays(ScenarioConfig(n_records=997, proportions=SKEWED))
    assert np.all(np.abs(np.bincount(y) - np.array(SKEWED) * 997) <= 1)


def test_generate_is_deterministic_and_labeled():
    a = generate(ScenarioConfig(n_records=200, seed=3))
    b = generate(ScenarioConfig(n_records=200, seed=3))
    assert a == b
    assert a.width == 56
    assert set(a.labels()) == set(STATES)
    assert a.feature_names[-3:] == ("r_dr", "r_pr", "w_th")


def test_state_signatures():
    M = state_means(56, 8.0, 0.0)
    d = np.linalg.norm(M[:, None] - M[None], axis=-1)
    assert d[np.triu_indices(5, 1)].min() == pytest.approx(8.0)
    assert np.all(M[0] == 0)
    assert np.all(M[1, :53] == 0) and np.all(M[1, 53:] > 0)  # S2: cyber indicators only
    assert np.all(M[3, 53:] == 0)
    M_half = state_means(56, 8.0, 0.5)
    assert np.linalg.norm(M_half[4] - M_half[2]) == pytest.approx(0.5 * d[2, 4])
    M_full = state_means(56, 8.0, 1.0)
    assert np.allclose(M_full[4], M_full[2])


def test_zero_overlap_nearest_centroid_floor():
    assert nearest_centroid_accuracy(ScenarioConfig(overlap=0.0)) >= 0.99


def test_overlap_lowers_oracle_accuracy():
    accs = [nearest_centroid_accuracy(ScenarioConfig(n_records=3000, overlap=o, seed=11))
            for o in (0.0, 0.5, 0.8, 0.95)]
    assert all(b < a for a, b in zip(accs, accs[1:]))


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        ScenarioConfig(proportions=(0.5, 0.5, 0.1, 0.0, 0.0))
    with pytest.raises(InvalidConfigError):
        ScenarioConfig(n_records=20)
    with pytest.raises(InvalidConfigError):
        ScenarioConfig(separation=0.0)
    with pytest.raises(InvalidConfigError):
        ScenarioConfig(n_features=10, signature_width=3)
