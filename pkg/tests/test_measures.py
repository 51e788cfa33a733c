import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from toricquant import MAGeodesicToric, ProbabilityMeasure, ks_distance, limit_measure, moment, wasserstein1
from toricquant.errors import PreconditionError

atoms = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=30)


def _measure(locs, rng=None):
    w = np.ones(len(locs)) if rng is None else rng.uniform(0.1, 1.0, len(locs))
    return ProbabilityMeasure.from_atoms(locs, w)


def test_validation():
    with pytest.raises(PreconditionError):
        ProbabilityMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.4]))
    with pytest.raises(PreconditionError):
        ProbabilityMeasure(np.array([0.0]), np.array([-1.0]))
    with pytest.raises(PreconditionError):
        ProbabilityMeasure.from_atoms([])


def test_merge_and_sort():
    m = ProbabilityMeasure.from_atoms([1.0, 0.0, 1.0 + 1e-14])
    assert np.allclose(m.locations, [0.0, 1.0])
    assert np.allclose(m.weights, [1 / 3, 2 / 3])


def test_moment_examples():
    assert moment(ProbabilityMeasure.dirac(0.3), 2) == pytest.approx(0.09, abs=1e-15)
    k = 17
    assert moment(ProbabilityMeasure.uniform(np.arange(k + 1) / k), 1) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(PreconditionError):
        moment(ProbabilityMeasure.dirac(1.0), 9)


def test_limit_measure_second_moment(uG):
    mu = limit_measure(MAGeodesicToric.from_difference(uG, [0, 0, 0.5]), 100000)
    assert moment(mu, 2) == pytest.approx(1 / 20, abs=1e-8)


def test_w1_and_ks_examples():
    a, b = ProbabilityMeasure.dirac(0.2), ProbabilityMeasure.dirac(-1.3)
    assert wasserstein1(a, a) == 0.0
    assert wasserstein1(a, b) == pytest.approx(1.5, abs=1e-15)
    assert ks_distance(a, a) == 0.0
    assert ks_distance(a, b) == 1.0


@pytest.mark.parametrize("k", [4, 16, 64])
def test_grid_against_uniform(k):
    n = 200000
    fine = ProbabilityMeasure.uniform((np.arange(n) + 0.5) / n)
    grid = ProbabilityMeasure.uniform(np.arange(k + 1) / k)
    assert wasserstein1(grid, fine) <= 1 / (2 * k) + 1 / n
    assert ks_distance(grid, fine) == pytest.approx(1 / (k + 1), abs=2 / n)


@given(atoms, atoms)
def test_w1_matches_scipy(a, b):
    ma, mb = _measure(a), _measure(b)
    ref = stats.wasserstein_distance(ma.locations, mb.locations, ma.weights, mb.weights)
    assert wasserstein1(ma, mb) == pytest.approx(ref, abs=1e-12)
    assert wasserstein1(ma, mb) == pytest.approx(wasserstein1(mb, ma), abs=1e-14)


def test_triangle_inequality(rng):
    for _ in range(100):
        ms = [_measure(rng.normal(size=rng.integers(1, 20)), rng) for _ in range(3)]
        assert wasserstein1(ms[0], ms[2]) <= wasserstein1(ms[0], ms[1]) + wasserstein1(ms[1], ms[2]) + 1e-12


@given(atoms, atoms, st.floats(-3, 3).filter(lambda a: abs(a) > 1e-3), st.floats(-2, 2))
def test_affine_pushforward(a, b, scale, shift):
    ma, mb = _measure(a), _measure(b)
    f = lambda x: scale * x + shift  # noqa: E731
    assert wasserstein1(ma.map(f), mb.map(f)) == pytest.approx(abs(scale) * wasserstein1(ma, mb), rel=1e-9, abs=1e-9)


@given(atoms, atoms, st.integers(1, 4))
def test_moment_continuity(a, b, p):
    ma, mb = _measure(a), _measure(b)
    R = max(np.max(np.abs(ma.locations)), np.max(np.abs(mb.locations)))
    bound = p * R ** (p - 1) * wasserstein1(ma, mb)
    assert abs(moment(ma, p) - moment(mb, p)) <= bound + 1e-9


def test_roundtrips(rng):
    m = _measure(rng.normal(size=12), rng)
    for back in (ProbabilityMeasure.from_csv(m.to_csv()), ProbabilityMeasure.from_json(m.to_json())):
        assert np.array_equal(back.locations, m.locations)
        assert np.allclose(back.weights, m.weights, rtol=0, atol=1e-16)
    assert m.to_csv().splitlines()[0] == "location,weight"
