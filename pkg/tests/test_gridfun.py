import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import evtsim as es
from evtsim.gridfun import NONPOSITIVE, EFunction, make_grid, sup_norm


def test_make_grid_examples():
    assert np.array_equal(make_grid(2).points, [0.0, 1.0])
    assert np.array_equal(make_grid(3).points, [0.0, 0.5, 1.0])
    assert np.array_equal(make_grid(5).points, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_make_grid_rejects_degenerate():
    with pytest.raises(ValueError):
        make_grid(1)
    with pytest.raises(ValueError):
        es.Grid(np.array([0.0, 0.5, 0.4, 1.0]))
    with pytest.raises(ValueError):
        es.Grid(np.array([0.1, 1.0]))


def test_value_at_prefers_overrides():
    grid = make_grid(5)
    f = EFunction(grid, np.full(5, -1.0), ((2, -4.0),))
    assert f.value_at(0) == -1.0
    assert f.value_at(2) == -4.0
    assert f.value_at(3) == -1.0
    with pytest.raises(IndexError):
        f.value_at(5)


def test_construction_round_trips_values():
    grid = make_grid(9)
    base = np.linspace(-2.0, -0.5, 9)
    overrides = ((0, -3.5), (4, -0.25))
    f = EFunction(grid, base, overrides)
    for i in range(9):
        expected = dict(overrides).get(i, base[i])
        assert f.value_at(i) == expected


def test_invalid_functions_rejected():
    grid = make_grid(5)
    with pytest.raises(ValueError):
        EFunction(grid, np.array([0.0, 0.0, np.nan, 0.0, 0.0]))
    with pytest.raises(ValueError):
        EFunction(grid, np.full(5, -1.0), ((1, -2.0), (1, -3.0)))
    with pytest.raises(ValueError):
        EFunction(grid, np.full(5, 0.5), sign=NONPOSITIVE)
    with pytest.raises(IndexError):
        EFunction(grid, np.full(5, -1.0), ((9, -2.0),))


def test_sup_norm_examples():
    grid = make_grid(11)
    assert sup_norm(es.constant_function(grid, -1.0)) == 1.0
    assert sup_norm(EFunction(grid, -grid.points)) == 1.0
    f = EFunction(grid, np.full(11, -0.5), ((3, -3.0),))
    assert sup_norm(f) == 3.0


@st.composite
def functions_on_shared_grid(draw):
    size = draw(st.integers(min_value=2, max_value=12))
    values = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)
    a = draw(st.lists(values, min_size=size, max_size=size))
    b = draw(st.lists(values, min_size=size, max_size=size))
    grid = make_grid(size)
    return EFunction(grid, np.array(a)), EFunction(grid, np.array(b))


@settings(max_examples=100, deadline=None)
@given(functions_on_shared_grid(), st.sampled_from([0.25, 0.5, 2.0, -4.0, -0.5]))
def test_sup_norm_absolute_homogeneity(pair, c):
    f, _ = pair
    # powers of two scale exactly in floating point
    assert sup_norm(f.scaled(c)) == abs(c) * sup_norm(f)


@settings(max_examples=100, deadline=None)
@given(functions_on_shared_grid())
def test_sup_norm_triangle_inequality(pair):
    f, g = pair
    both = EFunction(f.grid, f.values + g.values)
    assert sup_norm(both) <= sup_norm(f) + sup_norm(g) + 1e-9


def test_default_bank_shape(grid, bank):
    assert len(bank) == 20
    assert len({f.fid for f in bank}) == 20
    for f in bank:
        assert f.sign == NONPOSITIVE
        assert np.all(f.values <= 0)
        assert f.grid.matches(grid)
    assert any(f.overrides for f in bank)


def test_bank_file_round_trip(tmp_path, bank):
    table = tmp_path / "bank.tsv"
    sidecar = tmp_path / "bank_overrides.tsv"
    es.save_bank(bank, table, sidecar)
    loaded = es.load_bank(table, sidecar)
    assert [f.fid for f in loaded] == [f.fid for f in bank]
    for original, copy in zip(bank, loaded):
        assert np.array_equal(original.values, copy.values)
        assert original.overrides == copy.overrides
        assert copy.sign == NONPOSITIVE


def test_packaged_bank_matches_builder(grid, bank):
    from importlib import resources

    data = resources.files("evtsim") / "data"
    loaded = es.load_bank(data / "default_bank.tsv", data / "default_bank_overrides.tsv")
    assert [f.fid for f in loaded] == [f.fid for f in bank]
    for original, copy in zip(bank, loaded):
        assert np.array_equal(original.values, copy.values)
