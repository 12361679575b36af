import warnings

import numpy as np
import pytest

from laseremit.floquet import (
    MarginalResonanceError,
    TruncationWarning,
    build_system,
    compare_asymptotic,
    flux_balance,
    omega_critical,
    solve_floquet,
)
from laseremit.params import HARTREE_EV, PhysParams, default_k, plane_wave_ic, to_atomic

K = default_k()


def test_field_free_is_the_static_state():
    p = to_atomic(10.2, 0.0, 4.5, K)
    ic = plane_wave_ic(p)
    sol = solve_floquet(p, N=8)
    assert sol.C[0] == pytest.approx(ic.R0, abs=1e-12)
    assert sol.D[0] == pytest.approx(ic.T0, abs=1e-12)
    assert max(abs(c) for n, c in sol.C.items() if n) < 1e-12
    assert max(abs(d) for n, d in sol.D.items() if n) < 1e-12
    assert sol.flux < 1e-12


@pytest.mark.parametrize("E,w", [(3.0, 4.5), (3.0, 4.0), (10.0, 4.5), (10.0, 5.0)])
def test_flux_and_truncation(E, w):
    p = to_atomic(10.2, E, w, K)
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        sol = solve_floquet(p)
    assert sol.flux < 1e-8
    assert sol.truncation_change < 1e-6
    assert flux_balance(sol, x_probe=2.0) < 1e-8


def test_right_state_solves_driven_equation():
    p = to_atomic(10.2, 10.0, 4.5, K)
    sol = solve_floquet(p)
    lam = sol.lam
    x, t, h = 0.7, 3.3, 1e-3

    def u(x, t):
        return complex(sol.right_state(x, np.array([t]))[0][0]) * np.exp(1j * lam * t)

    ut = (u(x, t + h) - u(x, t - h)) / (2 * h)
    uxx = (u(x + h, t) - 2 * u(x, t) + u(x - h, t)) / h**2
    rhs = -0.5 * uxx + (p.U - x * p.E * np.cos(p.omega * t)) * u(x, t)
    assert abs(1j * ut - rhs) < 1e-5 * abs(ut)
    # the analytic derivative agrees with a difference quotient
    v, d = sol.right_state(x, np.array([t]))
    dd = (sol.right_state(x + h, np.array([t]))[0] - sol.right_state(x - h, np.array([t]))[0]) / (2 * h)
    assert d[0] == pytest.approx(dd[0], rel=1e-6)


def test_matching_at_origin():
    p = to_atomic(10.2, 10.0, 4.5, K)
    sol = solve_floquet(p)
    t = np.linspace(0, p.period, 97)
    v, d = sol.right_state(0.0, t)
    left_d = 1j * p.k * np.ones_like(t, dtype=complex)
    for n, c in sol.C.items():
        left_d -= 1j * sol.p_left[n] * c * np.exp(-1j * n * p.omega * t)
    assert np.max(np.abs(v - sol.boundary_value(t))) < 1e-9
    assert np.max(np.abs(d - left_d)) < 1e-9


def test_sidebands_linear_in_field():
    a = solve_floquet(to_atomic(10.2, 1e-3, 4.5, K), N=6, check_truncation=False)
    b = solve_floquet(to_atomic(10.2, 2e-3, 4.5, K), N=6, check_truncation=False)
    for n in (-1, 1):
        assert abs(b.C[n]) / abs(a.C[n]) == pytest.approx(2.0, rel=1e-3)
    assert abs(b.C[2]) / abs(a.C[2]) == pytest.approx(4.0, rel=1e-2)


def test_coarse_truncation_is_detected():
    p = to_atomic(10.2, 25.0, 1.55, K)
    with pytest.warns(TruncationWarning):
        sol = solve_floquet(p, N=1)
    assert sol.truncation_change > 1e-6


def test_channel_bookkeeping():
    p = to_atomic(10.2, 3.0, 4.5, K)
    sol = solve_floquet(p, N=6, check_truncation=False)
    # 5.5 eV + n 4.5 eV is above zero for n >= -1 and above 10.2 eV (+ shift) for n >= 2
    assert sol.open_left == tuple(range(-1, 7))
    assert sol.open_right == tuple(range(2, 7))


def test_marginal_channels_rejected():
    k = K
    with pytest.raises(MarginalResonanceError) as err:
        build_system(PhysParams(0.5, 0.0, 0.5 * k * k, k), 2)
    assert err.value.channel == -1
    U, w = 0.5, 0.2
    with pytest.raises(MarginalResonanceError) as err:
        build_system(PhysParams(U, 0.0, w, np.sqrt(2 * (U - w))), 2)
    assert err.value.channel == 1
    # a photon of exactly the Fermi energy closes channel -1
    with pytest.raises(MarginalResonanceError):
        solve_floquet(to_atomic(10.2, 10.0, 5.5, K))


def test_system_size_checks():
    p = to_atomic(10.2, 3.0, 4.5, K)
    with pytest.raises(ValueError):
        build_system(p, 0)
    with pytest.raises(ValueError):
        build_system(p, 16, 32)
    A, b, _ = build_system(p, 3, 64)
    assert A.shape == (14, 14) and b.shape == (14,)


@pytest.mark.parametrize("E", [0.0, 1.0, 3.0, 10.0, 25.0])
def test_critical_frequency(E):
    p = to_atomic(10.2, E, 4.0, K)
    w = omega_critical(p)
    b = p.U - 0.5 * p.k**2
    assert abs(w - b - p.E**2 / (4 * w * w)) < 1e-12 * w
    roots = np.roots([1.0, -b, 0.0, -0.25 * p.E**2])
    real = roots[np.abs(roots.imag) < 1e-9].real
    assert w == pytest.approx(real[real > 0].max(), rel=1e-12)
    if E == 0:
        assert w == b
        assert w * HARTREE_EV == pytest.approx(4.7, rel=1e-12)


def test_compare_asymptotic_needs_sixteen_periods():
    class Short:
        period_steps = 8
        grid = np.arange(8 * 10 + 1) * 0.1

    p = to_atomic(10.2, 3.0, 4.5, K)
    with pytest.raises(ValueError):
        compare_asymptotic(Short(), solve_floquet(p, N=4, check_truncation=False))


def test_compare_asymptotic_on_exact_periodic_state():
    # feeding the periodic state itself gives zero distance
    p = to_atomic(10.2, 3.0, 4.5, K)
    sol = solve_floquet(p, N=8, check_truncation=False)

    class Exact:
        period_steps = 32
        params = p
        grid = np.arange(32 * 16 + 1) * (p.period / 32)
        psi0 = sol.boundary_value(grid) * np.exp(-0.5j * p.k**2 * grid)

    rep = compare_asymptotic(Exact(), sol)
    assert len(rep.distance) == 16
    assert np.max(rep.distance) < 1e-13
