import numpy as np
import pytest
from hypothesis import given, strategies as st

from universality_lab.conjugacy import (abel_chart, abel_phi, boettcher_chart, boettcher_phi,
                                        chart_value_and_residual, inverse_branch, koenigs_chart,
                                        koenigs_derivative, koenigs_inverse, koenigs_phi,
                                        petal_membership)
from universality_lab.dynamics import HolomorphicMap
from universality_lab.errors import (NotInBasin, NotInChart, NotInPetal, OutOfRange,
                                     PreconditionError)

MOBIUS = HolomorphicMap.rational([0, 1], [1, 1])       # z / (1 + z)
PARABOLIC = HolomorphicMap.polynomial([0, 1, 1])        # z + z^2
CUBIC = HolomorphicMap.polynomial([0, 1, 0, 1])         # z + z^3


def disk_samples(rng, center, radius, n):
    r = radius * np.sqrt(rng.random(n))
    return center + r * np.exp(2j * np.pi * rng.random(n))


def test_koenigs_linear_map_is_identity():
    lam = 0.5 * np.exp(0.3j)
    chart = koenigs_chart(HolomorphicMap.polynomial([0, lam]), 0j, local_radius=0.9, allow_linear=True)
    z = disk_samples(np.random.default_rng(0), 0, 0.8, 50)
    assert np.allclose(koenigs_phi(chart, z), z, atol=1e-14)


def test_koenigs_examples(blaschke, blaschke_chart):
    assert koenigs_phi(blaschke_chart, 0j) == 0
    assert koenigs_derivative(blaschke_chart, 0j) == pytest.approx(1, abs=1e-12)
    v = koenigs_phi(blaschke_chart, 0.2)
    assert abs(koenigs_phi(blaschke_chart, blaschke(0.2)) - blaschke_chart.lam * v) <= 1e-9
    with pytest.raises(NotInBasin):
        koenigs_phi(blaschke_chart, 1.5)  # |B| > 1 outside the closed disk
    with pytest.raises(PreconditionError):
        koenigs_chart(HolomorphicMap.polynomial([0, 0, 1]), 0j)


def test_koenigs_residual_on_basin(blaschke, blaschke_chart):
    z = disk_samples(np.random.default_rng(1), 0, 0.95, 1000)
    phi = koenigs_phi(blaschke_chart, z)
    assert np.abs(koenigs_phi(blaschke_chart, blaschke(z)) - blaschke_chart.lam * phi).max() <= 1e-9


def test_koenigs_depth_stability(blaschke_chart):
    z = disk_samples(np.random.default_rng(2), 0, 0.9, 300)
    a = koenigs_phi(blaschke_chart, z)
    b = koenigs_phi(blaschke_chart.with_depth(2 * blaschke_chart.depth), z)
    assert np.abs(a - b).max() <= 1e-10


def test_koenigs_unique_up_to_normalisation(blaschke, blaschke_chart):
    small = koenigs_chart(blaschke, 0j, local_radius=0.5 * blaschke_chart.local_radius)
    z = disk_samples(np.random.default_rng(3), 0, 0.9, 300)
    assert np.abs(koenigs_phi(small, z) - koenigs_phi(blaschke_chart, z)).max() <= 1e-8


def test_koenigs_injective_on_chart_disk(blaschke_chart):
    rng = np.random.default_rng(4)
    z = disk_samples(rng, 0, blaschke_chart.local_radius * 0.999, 400)
    phi = koenigs_phi(blaschke_chart, z)
    gap = np.abs(phi[:, None] - phi[None, :])
    close = gap <= 1e-10
    assert np.all(np.abs(z[:, None] - z[None, :])[close] <= 1e-8)


def test_koenigs_inverse(blaschke_chart):
    assert koenigs_inverse(blaschke_chart, 0) == blaschke_chart.z0
    w = koenigs_phi(blaschke_chart, 0.2)
    assert abs(koenigs_inverse(blaschke_chart, w) - 0.2) <= 1e-9
    with pytest.raises(OutOfRange):
        koenigs_inverse(blaschke_chart, 2 * blaschke_chart.range_radius)


@given(t=st.floats(0, 0.95), theta=st.floats(0, 2 * np.pi))
def test_koenigs_inverse_round_trip(t, theta, blaschke_chart):
    w = t * blaschke_chart.range_radius * np.exp(1j * theta)
    z = koenigs_inverse(blaschke_chart, w)
    assert abs(koenigs_phi(blaschke_chart, z) - w) <= 1e-10


def test_inverse_branch(blaschke, blaschke_chart):
    assert inverse_branch(blaschke_chart, 0, 0.7 + 0.1j) == 0.7 + 0.1j
    w = blaschke(blaschke(blaschke(0.1)))
    assert abs(inverse_branch(blaschke_chart, 3, w) - 0.1) <= 1e-8
    with pytest.raises(OutOfRange):
        inverse_branch(blaschke_chart, 5, 0.3)


def test_boettcher_closed_forms():
    assert boettcher_phi(boettcher_chart(HolomorphicMap.polynomial([0, 0, 1]), 0j), 0.3 - 0.1j) \
        == pytest.approx(0.3 - 0.1j, abs=1e-15)
    f = HolomorphicMap.polynomial([0, 0, 2])
    chart = boettcher_chart(f, 0j)
    z = disk_samples(np.random.default_rng(5), 0, 0.95 * chart.local_radius, 200)
    for x in z:
        phi = boettcher_phi(chart, x)
        assert abs(phi - 2 * x) <= 1e-12
        assert abs(2 * f(x) - (2 * x) ** 2) <= 1e-12
    with pytest.raises(NotInChart):
        boettcher_phi(chart, 2.0)


def test_boettcher_residual_and_depth():
    f = HolomorphicMap.polynomial([0, 0, 1, 0.1])
    chart = boettcher_chart(f, 0j)
    v, res = chart_value_and_residual(chart, 0.05)
    assert res <= 1e-9
    z = disk_samples(np.random.default_rng(6), 0, 0.9 * chart.local_radius, 200)
    deeper = chart.with_depth(2 * chart.depth)
    for x in z:
        assert abs(boettcher_phi(chart, complex(f(x))) - boettcher_phi(chart, x) ** 2) <= 1e-9
        assert abs(boettcher_phi(deeper, x) - boettcher_phi(chart, x)) <= 1e-10


def test_abel_mobius_closed_form():
    chart = abel_chart(MOBIUS, 0j, allow_linear=True)
    _, res = chart_value_and_residual(chart, 0.5)
    assert res <= 1e-12
    z = np.array([0.5, 0.3 + 0.1j, 1.2 - 0.3j, 0.9])
    phi = abel_phi(chart, z)
    # Phi = 1/z + const, so differences are exact
    assert np.abs((phi - phi[0]) - (1 / z - 1 / z[0])).max() <= 1e-12


def test_abel_residuals():
    chart = abel_chart(PARABOLIC, 0j)
    assert chart.abel_log != 0
    assert chart_value_and_residual(chart, -0.2)[1] <= 1e-6
    for k in (1, 2):
        chart = abel_chart(CUBIC, 0j, petal=k)
        axis = chart.z0 + 0.5 * chart.petal_radius * np.exp(1j * chart.directions[k - 1])
        assert chart_value_and_residual(chart, axis)[1] <= 1e-6


def test_abel_outside_petal():
    chart = abel_chart(PARABOLIC, 0j)
    with pytest.raises(NotInPetal):
        abel_phi(chart, 0.1)
    with pytest.raises(PreconditionError):
        abel_chart(PARABOLIC, 0j, petal=2)


def test_petal_membership():
    chart = abel_chart(PARABOLIC, 0j)
    assert petal_membership(chart, -0.1) == 1
    assert petal_membership(chart, 0.1) is None
    cubic = abel_chart(CUBIC, 0j)
    a, b = petal_membership(cubic, 0.1j), petal_membership(cubic, -0.1j)
    assert a is not None and b is not None and a != b
    with pytest.raises(PreconditionError):
        petal_membership(koenigs_chart(HolomorphicMap.blaschke(0.6), 0j), 0.1)


def test_petals_forward_invariant():
    chart = abel_chart(CUBIC, 0j)
    rng = np.random.default_rng(7)
    for k, theta in enumerate(chart.directions, start=1):
        c = chart.z0 + chart.petal_radius * np.exp(1j * theta)
        z = disk_samples(rng, c, chart.petal_radius * 0.999, 200)
        assert all(petal_membership(chart, complex(CUBIC(x))) == k for x in z)
