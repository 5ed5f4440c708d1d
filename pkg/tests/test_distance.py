import logging

import numpy as np
import pytest

from clipsum import autodiff as ad
from clipsum.autodiff import Parameter
from clipsum.distance import (
    SubVideoConfig,
    clip_contrastive_distance,
    effective_n,
    mean_feature_distance,
    window_gram,
)
from oracles import triple_sum, window_oracle


def exact(n):
    return SubVideoConfig(n=n, mode="exact")


def test_mean_distance_unit_vector():
    x = np.array([[1.0], [0.0]])
    assert mean_feature_distance(x, x).item() == 1.0


def test_mean_distance_zero_mean():
    x = np.array([[1.0, -1.0], [0.0, 0.0]])
    y = np.random.default_rng(0).standard_normal((2, 5))
    assert mean_feature_distance(x, y).item() == 0.0


def test_mean_distance_matches_triple_loop():
    rng = np.random.default_rng(1)
    X, Y = rng.standard_normal((4, 3)), rng.standard_normal((4, 5))
    assert abs(mean_feature_distance(X, Y).item() - triple_sum(X, Y)) < 1e-12


def test_mean_distance_dimension_mismatch():
    with pytest.raises(ad.ShapeError):
        mean_feature_distance(np.ones((3, 2)), np.ones((4, 2)))


def test_n1_degenerates_to_mean_distance():
    rng = np.random.default_rng(2)
    for _ in range(100):
        d = int(rng.integers(1, 6))
        X = rng.standard_normal((d, int(rng.integers(1, 10))))
        Y = rng.standard_normal((d, int(rng.integers(1, 10))))
        diff = clip_contrastive_distance(X, Y, exact(1)).item() - mean_feature_distance(X, Y).item()
        assert abs(diff) < 1e-12


def test_single_window_is_squared_frobenius():
    X = np.random.default_rng(3).standard_normal((3, 4))
    assert abs(clip_contrastive_distance(X, X, exact(4)).item() - np.sum(X**2)) < 1e-12


def test_exact_matches_window_enumeration():
    rng = np.random.default_rng(4)
    X, Y = rng.standard_normal((3, 8)), rng.standard_normal((3, 12))
    ref, _ = window_oracle(X, Y, 4)
    assert abs(clip_contrastive_distance(X, Y, exact(4)).item() - ref) < 1e-12


def test_window_gram_entries():
    rng = np.random.default_rng(5)
    X, Y = rng.standard_normal((2, 6)), rng.standard_normal((2, 5))
    g = window_gram(X, Y, 3).data
    for a in range(4):
        for b in range(3):
            assert abs(g[a, b] - np.sum(X[:, a : a + 3] * Y[:, b : b + 3])) < 1e-12


def test_symmetry_and_bilinear_scaling():
    rng = np.random.default_rng(6)
    for _ in range(50):
        d, n = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        X = rng.standard_normal((d, int(rng.integers(n, 12))))
        Y = rng.standard_normal((d, int(rng.integers(n, 12))))
        c = rng.uniform(-3, 3)
        xy = clip_contrastive_distance(X, Y, exact(n)).item()
        assert xy == clip_contrastive_distance(Y, X, exact(n)).item()
        assert abs(clip_contrastive_distance(c * X, Y, exact(n)).item() - c * xy) < 1e-12


def test_monte_carlo_within_three_standard_errors():
    rng = np.random.default_rng(7)
    samples = 10**5
    for seed in range(20):
        d, n = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        X = rng.standard_normal((d, int(rng.integers(n, 10))))
        Y = rng.standard_normal((d, int(rng.integers(n, 10))))
        ref, var = window_oracle(X, Y, n)
        est = clip_contrastive_distance(X, Y, SubVideoConfig(n=n, mode="monte-carlo", samples=samples, seed=seed)).item()
        assert abs(est - ref) <= 3 * np.sqrt(var / samples) + 1e-12


def test_monte_carlo_is_seeded():
    rng = np.random.default_rng(8)
    X, Y = rng.standard_normal((2, 9)), rng.standard_normal((2, 7))
    cfg = SubVideoConfig(n=2, mode="monte-carlo", samples=50, seed=3)
    assert clip_contrastive_distance(X, Y, cfg).item() == clip_contrastive_distance(X, Y, cfg).item()


def test_monte_carlo_rejects_zero_samples():
    with pytest.raises(ValueError):
        clip_contrastive_distance(np.ones((1, 3)), np.ones((1, 3)), SubVideoConfig(n=1, mode="monte-carlo", samples=0))


def test_n_too_large_rejected():
    with pytest.raises(ValueError):
        clip_contrastive_distance(np.ones((2, 3)), np.ones((2, 9)), exact(4))


def test_effective_n_clamps_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        assert effective_n(10, [15, 4, 100]) == 4
    assert "clamping" in caplog.text
    assert effective_n(3, [15, 4]) == 3


def test_diversity_sensitivity():
    # two summaries with equal column means but different spread
    tight = np.array([[1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0]])
    spread = np.array([[1.0, 1.0, 1.0, 1.0], [2.0, -2.0, 2.0, -2.0]])
    video = np.array([[1.0, 0.5, 1.5, 1.0, 0.0, 2.0], [1.0, -1.0, 3.0, -2.0, 0.5, 4.0]])
    d1 = [clip_contrastive_distance(s, video, exact(1)).item() for s in (tight, spread)]
    d2 = [clip_contrastive_distance(s, video, exact(2)).item() for s in (tight, spread)]
    assert abs(d1[0] - d1[1]) < 1e-12
    assert abs(d2[0] - d2[1]) > 1e-6


@pytest.mark.parametrize("mode", ["exact", "monte-carlo"])
def test_distance_gradient_matches_finite_differences(mode):
    rng = np.random.default_rng(9)
    X = Parameter(rng.standard_normal((3, 6)))
    Y = Parameter(rng.standard_normal((3, 8)))
    cfg = SubVideoConfig(n=3, mode=mode, samples=200, seed=1)
    assert ad.check_gradients(lambda: clip_contrastive_distance(X, Y, cfg), [X, Y]) < 1e-4


def test_auto_mode_falls_back_to_monte_carlo():
    rng = np.random.default_rng(10)
    X, Y = rng.standard_normal((1, 1200)), rng.standard_normal((1, 1200))
    auto = clip_contrastive_distance(X, Y, SubVideoConfig(n=1, seed=5)).item()
    mc = clip_contrastive_distance(X, Y, SubVideoConfig(n=1, mode="monte-carlo", samples=4096, seed=5)).item()
    assert auto == mc
