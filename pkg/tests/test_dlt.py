import numpy as np
import pytest

from laseremit.dlt import (
    DltAccuracyError,
    DltDomainError,
    classify_slope,
    dlt,
    dlt_inverse,
    growth_rate,
    period_samples,
    singularity_probe,
)

T = 2.0


def test_geometric_sequence_closed_form():
    q = 0.8 * np.exp(0.3j)
    K = 60
    f = q ** np.arange(K)
    s = dlt(f, 0.9, 64)
    want = (1 - (q * s.z) ** K) / (1 - q * s.z)
    assert np.max(np.abs(s.values[:, 0] - want)) < 1e-12


def test_constant_sequence_and_tail_bound():
    K = 30
    s = dlt(np.ones(K), 0.5, 64)
    want = (1 - s.z**K) / (1 - s.z)
    assert np.max(np.abs(s.values[:, 0] - want)) < 1e-12
    # the neglected tail of 1/(1 - z) is covered by the reported bound
    assert np.max(np.abs(1 / (1 - s.z) - s.values[:, 0])) <= (1 + 1e-6) * s.tail_bound
    assert s.tail_bound == pytest.approx(0.5**K / 0.5, rel=1e-12)


def test_round_trip():
    rng = np.random.default_rng(4)
    f = rng.normal(size=(40, 3)) + 1j * rng.normal(size=(40, 3))
    s = dlt(f, 0.8, 64, tau_grid=[0.0, 0.5, 1.0])
    back = dlt_inverse(s, np.arange(40))
    assert np.max(np.abs(back - f)) < 1e-10
    assert dlt_inverse(s, 7) == pytest.approx(f[7], abs=1e-10)
    assert s.K == 40 and s.J == 64


def test_aliasing_is_refused():
    s = dlt(np.ones(40), 0.8, 16)
    with pytest.raises(DltAccuracyError):
        dlt_inverse(s, 3)


def test_linearity():
    rng = np.random.default_rng(9)
    f, g = rng.normal(size=30), rng.normal(size=30)
    a = dlt(2 * f - 3j * g, 0.7, 32).values
    b = 2 * dlt(f, 0.7, 32).values - 3j * dlt(g, 0.7, 32).values
    assert np.max(np.abs(a - b)) < 1e-12


def test_domain_errors():
    with pytest.raises(DltDomainError):
        dlt(np.ones(10), 1.0, 8)
    with pytest.raises(DltDomainError):
        dlt(1.2 ** np.arange(50), 0.9, 64)
    with pytest.raises(ValueError):
        dlt(np.ones(10), 0.5, 0)
    with pytest.raises(ValueError):
        dlt_inverse(dlt(np.ones(10), 0.5, 16), -1)


def test_growth_rate():
    assert growth_rate(0.9 ** np.arange(100)) == pytest.approx(0.9, rel=1e-12)
    assert growth_rate(np.ones(3)) == 1.0


def test_period_samples():
    v = np.arange(3 * 4 + 1)
    rows, tau = period_samples(v, 4)
    assert rows.shape == (3, 4)
    assert np.all(rows[:, 1] == [1, 5, 9])
    rows, tau = period_samples(v, 4, [0])
    assert np.all(rows[:, 0] == [0, 4, 8, 12])


def test_classify_slope():
    assert classify_slope(-1.0) == "pole"
    assert classify_slope(-0.5) == "branch"
    assert classify_slope(0.0) == "regular"
    assert classify_slope(-0.8) == "indeterminate"
    assert classify_slope(-1.0, fit_err=0.5) == "indeterminate"


def test_probe_finds_oscillating_pole():
    # e^{-i sigma t} sampled once per period: pole at z = exp(i sigma T)
    sigma = 1.3
    k = np.arange(64)
    f = np.exp(-1j * sigma * T * k) * 0.7 + (k + 1.0) ** -1.5
    rep = singularity_probe(f, T)
    assert len(rep.poles) == 1
    assert rep.poles[0].arg == pytest.approx(sigma * T % (2 * np.pi), abs=1e-8)
    assert rep.poles[0].sigma * T == pytest.approx(sigma * T % (2 * np.pi), abs=1e-8)
    assert rep.poles[0].slope == pytest.approx(-1.0, abs=0.1)


def test_probe_branch_and_decay():
    k = np.arange(64)
    rep = singularity_probe((k + 1.0) ** -0.5, T, branch_sigmas=(0.0,))
    assert rep.poles == ()
    assert rep.branch[0.0] == "branch"
    rep = singularity_probe(np.exp(-0.3 * k) * (1 + 0.5j), T, branch_sigmas=(0.0,))
    assert rep.poles == ()
    assert rep.branch[0.0] == "regular"


def test_probe_needs_samples():
    with pytest.raises(ValueError):
        singularity_probe(np.ones(8), T)
    with pytest.raises(ValueError):
        singularity_probe(np.ones(40), T, radii=(0.9, 0.95))
