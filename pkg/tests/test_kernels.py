import subprocess
import sys

import numpy as np
import pytest

from evtsim import _kernels as kernels


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(7)
    paths = rng.random((500, 37))
    paths[rng.random((500, 37)) < 0.05] = 0.0
    weights = rng.random(37) * 3.0
    return paths, weights


def test_backends_agree_on_weighted_extremes(data):
    paths, weights = data
    assert np.allclose(kernels.weighted_sup(paths, weights),
                       kernels.weighted_sup_numpy(paths, weights))
    assert np.allclose(kernels.weighted_inf(paths, weights),
                       kernels.weighted_inf_numpy(paths, weights))


def test_backends_agree_on_counts(data):
    paths, weights = data
    bound = np.full(paths.shape[1], 0.5)
    for strict in (False, True):
        assert kernels.count_below(paths, bound, strict) == \
            kernels.count_below_numpy(paths, bound, strict)
        assert kernels.count_above(paths, bound, strict) == \
            kernels.count_above_numpy(paths, bound, strict)


def test_zero_times_infinity_contributes_zero():
    paths = np.array([[0.0, 2.0], [0.0, 0.0]])
    weights = np.array([np.inf, 1.0])
    for fn in (kernels.weighted_sup, kernels.weighted_sup_numpy):
        out = fn(paths, weights)
        assert out[0] == 2.0
        assert out[1] == 0.0
    # a positive path value against an infinite weight is infinite
    paths2 = np.array([[1.0, 2.0]])
    for fn in (kernels.weighted_sup, kernels.weighted_sup_numpy):
        assert fn(paths2, weights)[0] == np.inf


def test_scaled_max_update_matches_numpy(data):
    paths, _ = data
    scale = np.linspace(0.5, 2.0, paths.shape[0])
    acc1 = np.zeros_like(paths)
    acc2 = np.zeros_like(paths)
    kernels.scaled_max_update(acc1, paths, scale)
    kernels.scaled_max_update_numpy(acc2, paths, scale)
    assert np.array_equal(acc1, acc2)


def test_env_flag_selects_numpy_backend():
    code = "import evtsim._kernels as k; print(k.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={"PATH": "/usr/bin:/bin", "EVTSIM_NO_NUMBA": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
