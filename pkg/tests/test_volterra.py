import numpy as np
import pytest

from laseremit.params import GaussianIC, default_k, plane_wave_ic, to_atomic
from laseremit.sources import source_trace, time_grid
from laseremit.volterra import (
    ConvergenceError,
    SolverSettings,
    apply_operator,
    recover_psi_x0,
    relation_defect,
    residual,
    solve_psi0,
)

K = default_k()
P0 = to_atomic(10.2, 0.0, 4.5, K)
P3 = to_atomic(10.2, 3.0, 4.5, K)


def _solve(p, ic, periods, spp, **kw):
    src = source_trace(time_grid(p, periods, spp), p, ic, spp, with_total=False)
    return src, solve_psi0(src, p, SolverSettings(**kw))


@pytest.fixture(scope="module")
def field_free():
    ic = plane_wave_ic(P0)
    return (ic,) + _solve(P0, ic, 6, 128)


@pytest.fixture(scope="module")
def driven():
    ic = plane_wave_ic(P3)
    return (ic,) + _solve(P3, ic, 4, 128)


def test_field_free_boundary_value_is_static(field_free):
    ic, src, tr = field_free
    want = ic.T0 * np.exp(-0.5j * ic.k**2 * tr.grid)
    err = np.abs(tr.psi0 - want)
    assert np.max(err) < 1e-6
    # away from the start-up junction the error is far smaller
    assert np.max(err[-128:]) < 1e-8
    assert tr.residual_norm < 1e-6


def test_field_free_derivative(field_free):
    ic, src, tr = field_free
    want = -ic.kappa * ic.T0 * np.exp(-0.5j * ic.k**2 * tr.grid)
    assert np.max(np.abs(tr.psi_x0 - want)) < 1e-4
    assert np.max(np.abs(tr.current)) < 1e-4


def test_weighted_sup_field_free(field_free):
    ic, src, tr = field_free
    assert tr.nu == pytest.approx(2 * P0.omega)
    assert tr.weighted_sup == pytest.approx(abs(ic.T0), rel=1e-7)


def test_march_solves_its_discrete_equation():
    # below the start-up threshold step no finer grid is used and the march
    # satisfies the discretised equation to rounding
    p = to_atomic(10.2, 3.0, 100.0, K)
    src, tr = _solve(p, plane_wave_ic(p), 1, 1024, check_residual=False)
    d = apply_operator(tr.psi0, src, p)
    assert np.max(np.abs(d)) < 1e-12 * np.max(np.abs(tr.psi0))


def test_streamed_operator_matches_tabulated(driven):
    ic, src, tr = driven
    d = apply_operator(tr.psi0, src, P3)
    s = apply_operator(tr.psi0, src, P3, streaming=True)
    assert np.max(np.abs(s - d)) < 1e-12
    # with the coarse start-up history the defect is truncation sized
    assert np.max(np.abs(d[40:])) < 1e-5


def test_relation_defect_small(driven):
    ic, src, tr = driven
    assert np.max(np.abs(relation_defect(tr, src)[40:])) < 1e-5


def test_recovered_derivative_consistent(driven):
    ic, src, tr = driven
    a = recover_psi_x0(tr, src)
    b = recover_psi_x0(tr, src.h_minus)
    assert np.max(np.abs(a[40:] - tr.psi_x0[40:])) < 1e-10
    assert np.max(np.abs(a[40:] - b[40:])) < 1e-5


def test_residual_reported(driven):
    ic, src, tr = driven
    assert tr.residual_norm < 1e-5
    assert residual(tr, src, P3) == pytest.approx(tr.residual_norm, rel=1e-12)


def test_self_convergence():
    ic = plane_wave_ic(P3)
    traces = [_solve(P3, ic, 3, spp)[1] for spp in (64, 128, 256)]
    d1 = np.max(np.abs(traces[0].psi0 - traces[1].psi0[::2]))
    d2 = np.max(np.abs(traces[1].psi0 - traces[2].psi0[::2]))
    assert d2 < 1e-6
    assert d1 / d2 > 8


def test_linear_in_the_data():
    a = GaussianIC(x0=-25.0, sigma=2.0, p0=0.5, odd=False)
    b = GaussianIC(x0=-25.0, sigma=2.0, p0=0.5, odd=False, amplitude=-3.0 + 1j)
    _, ta = _solve(P3, a, 2, 64, check_residual=False)
    _, tb = _solve(P3, b, 2, 64, check_residual=False)
    assert np.max(np.abs(tb.psi0 - (-3.0 + 1j) * ta.psi0)) < 1e-12 * np.max(np.abs(tb.psi0))


def test_residual_gate_raises_with_trace():
    ic = plane_wave_ic(P3)
    with pytest.raises(ConvergenceError) as err:
        _solve(P3, ic, 1, 32, tol_resid=1e-14)
    assert err.value.trace is not None
    assert err.value.trace.residual_norm > 1e-14


def test_input_checks():
    with pytest.raises(ValueError):
        SolverSettings(tol_resid=0.0)
    ic = plane_wave_ic(P3)
    src = source_trace(time_grid(P3, 1, 32), P3, ic, 32, with_total=False)
    with pytest.raises(ValueError):
        solve_psi0(src, to_atomic(10.2, 3.0, 4.0, K))
