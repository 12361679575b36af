"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (the lines are repeated in the terminal summary) or
directly with ``python tests/test_acceptance.py``.
"""

import time
from functools import cache

import numpy as np
from scipy.integrate import simpson

import laseremit.volterra as volterra
from laseremit.dlt import dlt, dlt_inverse, period_samples, singularity_probe
from laseremit.field import decay_exponent, local_norm, psi_minus, psi_plus, reconstruct
from laseremit.floquet import compare_asymptotic, omega_critical, solve_floquet
from laseremit.kernels import abel_density
from laseremit.params import HARTREE_EV, GaussianIC, default_k, plane_wave_ic, to_atomic
from laseremit.quadrature import ProductRule
from laseremit.sources import source_trace, time_grid
from laseremit.special import faddeeva, lerch_partial_sum
from laseremit.volterra import SolverSettings, solve_psi0

K = default_k()
RESULTS: dict[int, str] = {}
RESIDUALS: dict[str, float] = {}


def _record(n: int, ok: bool, text: str) -> bool:
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}"
    print(RESULTS[n])
    return ok


@cache
def _run(E: float, w: float, periods: int, spp: int, ic_key=None):
    """Accepted run (residual gate 1e-5 on); returns (params, ic, trace, seconds)."""
    p = to_atomic(10.2, E, w, K)
    ic = plane_wave_ic(p) if ic_key is None else GaussianIC(*ic_key)
    t0 = time.perf_counter()
    src = source_trace(time_grid(p, periods, spp), p, ic, spp, with_total=False)
    tr = solve_psi0(src, p, SolverSettings(tol_resid=1e-5))
    dt = time.perf_counter() - t0
    kind = "plane wave" if ic_key is None else "gaussian"
    RESIDUALS[f"{kind} E={E:g} w={w:g} {periods}x{spp}"] = tr.residual_norm
    return p, ic, tr, dt


PACKET_ODD = (-25.0, 2.0, 0.5, True)
PACKET_WIDE = (-75.0, 6.0, 0.0, False)


def criterion_1():
    p, ic, tr, secs = _run(0.0, 4.5, 20, 256)
    err = float(np.max(np.abs(tr.psi0 - ic.T0 * np.exp(-0.5j * ic.k**2 * tr.grid))))
    return _record(1, err < 1e-6 and secs < 10,
                   f"field-free max|psi0 - T0 e^(-ik^2t/2)| = {err:.2e} (tol 1e-6), runtime {secs:.1f} s (tol 10 s)")


def criterion_3():
    p, ic, tr, _ = _run(3.0, 4.5, 4, 256)
    h = 1e-2
    ps = reconstruct(tr, ic, [-2 * h, -h, -1e-7, 1e-7, h, 2 * h]).psi
    vm = float(np.max(np.abs(ps[:, 2] - tr.psi0)))
    vp = float(np.max(np.abs(ps[:, 3] - tr.psi0)))
    left = (3 * tr.psi0 - 4 * ps[:, 1] + ps[:, 0]) / (2 * h)
    right = (-3 * tr.psi0 + 4 * ps[:, 4] - ps[:, 5]) / (2 * h)
    dx = float(np.max(np.abs(left - right)))
    return _record(3, vm < 1e-4 and vp < 1e-4 and dx < 1e-3,
                   f"matching |psi-(0-) - psi0| = {vm:.2e}, |psi+(0+) - psi0| = {vp:.2e} (tol 1e-4); "
                   f"one-sided d/dx gap = {dx:.2e} (tol 1e-3)")


def criterion_4():
    p, ic, tr, _ = _run(3.0, 4.0, 10, 64, PACKET_WIDE)
    idx = np.arange(0, len(tr.grid), tr.period_steps)
    dx = 1.0
    xl = -np.arange(dx, 300 + dx / 2, dx)[::-1]
    left = np.array([psi_minus(x, tr, ic, idx) for x in xl])
    xr = np.arange(dx / 4, 12 + 1e-9, dx / 4)
    right = np.array([psi_plus(x, tr, ic, p, idx) for x in xr])
    b = tr.psi0[idx][None, :]
    nl = simpson(np.abs(np.concatenate([left, b])) ** 2, x=np.concatenate([xl, [0.0]]), axis=0)
    nr = simpson(np.abs(np.concatenate([b, right])) ** 2, x=np.concatenate([[0.0], xr]), axis=0)
    n0 = np.sqrt(2 * np.pi) * ic.sigma
    drift = float(np.max(np.abs((nl + nr) / n0 - 1)))
    return _record(4, drift < 1e-3, f"gaussian E=3 V/nm total norm drift over 10 periods = {drift:.2e} (tol 1e-3)")


def criterion_5():
    p, ic, tr, _ = _run(3.0, 4.0, 40, 128, PACKET_ODD)
    idx = np.arange(tr.period_steps, len(tr.grid), tr.period_steps)
    F = reconstruct(tr, ic, np.linspace(-2, 2, 17), idx)
    n = len(idx)
    slope = decay_exponent(local_norm(F, (-2, 2)), slice(n // 10 - 1, n))
    return _record(5, slope <= -0.8, f"local norm on [-2, 2] log-log slope over t in [T_4, T_40] = {slope:.3f} (tol <= -0.8)")


def criterion_6():
    p, ic, tr, _ = _run(3.0, 4.5, 32, 128)
    rep = compare_asymptotic(tr, solve_floquet(p, 16))
    final = float(rep.relative[-1])
    return _record(6, rep.slope <= -0.3 and final < 0.05,
                   f"distance to periodic state slope = {rep.slope:.3f} (tol <= -0.3), final relative = {final:.2e} (tol 5e-2)")


def criterion_7():
    p0 = to_atomic(10.2, 0.0, 4.5, K)
    ic = plane_wave_ic(p0)
    s0 = solve_floquet(p0, 16)
    e0 = max(abs(s0.C[0] - ic.R0), abs(s0.D[0] - ic.T0))
    flux, trunc = 0.0, 0.0
    for E in (3.0, 10.0):
        wc = omega_critical(to_atomic(10.2, E, 4.5, K)) * HARTREE_EV
        # omega_c itself is a channel threshold, so the grid straddles it
        for w in wc + np.linspace(-0.5, 0.5, 10):
            s = solve_floquet(to_atomic(10.2, E, float(w), K), 16)
            flux, trunc = max(flux, s.flux), max(trunc, s.truncation_change)
    return _record(7, e0 < 1e-12 and flux < 1e-8 and trunc < 1e-6,
                   f"E=0 (R0,T0) error = {e0:.1e} (tol 1e-12); E=3,10 scans: flux balance <= {flux:.1e} (tol 1e-8), "
                   f"N->N+4 change <= {trunc:.1e} (tol 1e-6)")


def _averaged_current(tr, p):
    P = tr.period_steps
    return float(tr.current[-4 * P - 1:-1].mean() / p.k)


def criterion_8():
    wc = omega_critical(to_atomic(10.2, 3.0, 4.5, K)) * HARTREE_EV
    vals = {}
    for dw in (-0.2, 0.2, 0.5):
        w = round(wc + dw, 10)
        p, ic, tr, _ = _run(3.0, w, 20, 128)
        vals[dw] = (_averaged_current(tr, p), solve_floquet(p, 16).transmitted_current() / p.k)
    ratio = vals[0.2][1] / vals[-0.2][1]
    ratio_td = vals[0.2][0] / vals[-0.2][0]
    # both columns are converged above threshold; below it the time-domain
    # average is still dominated by the transient
    gap = max(abs(vals[d][0] / vals[d][1] - 1) for d in (0.2, 0.5))
    return _record(8, ratio >= 5 and ratio_td >= 5 and gap < 0.1,
                   f"j(w_c+0.2)/j(w_c-0.2) floquet = {ratio:.3g}, time-domain = {ratio_td:.3g} (tol >= 5); "
                   f"time-domain vs floquet above threshold max rel gap = {gap:.2e} (tol 0.1)")


def criterion_9():
    worst = 0.0
    for E in (1.0, 3.0, 10.0, 25.0):
        p = to_atomic(10.2, E, 4.0, K)
        w = omega_critical(p)
        worst = max(worst, abs(w - (p.U - 0.5 * p.k**2) - p.E**2 / (4 * w * w)) / w)
    p0 = to_atomic(10.2, 0.0, 4.0, K)
    exact = omega_critical(p0) == p0.U - 0.5 * p0.k**2
    return _record(9, worst < 1e-12 and exact,
                   f"omega_c relative residual <= {worst:.1e} (tol 1e-12); E=0 root equals U - k^2/2 exactly: {exact}")


def criterion_10():
    rng = np.random.default_rng(2024)
    z = rng.uniform(-5, 5, 10_000) + 1j * rng.uniform(-5, 5, 10_000)
    a, b = 2 * np.exp(-z * z), faddeeva(z)
    # relative to the size of the terms (they cancel below the real axis)
    scale = np.maximum.reduce([np.ones(len(z)), np.abs(a), np.abs(b)])
    refl = float(np.max(np.abs(faddeeva(-z) - (a - b)) / scale))
    lerch = 0.0
    for _ in range(200):
        zz = rng.uniform(0.05, 0.99) * np.exp(1j * rng.uniform(-np.pi, np.pi))
        aa = rng.uniform(0.1, 5.0)
        direct = sum(zz**l / (aa + l) ** 0.5 for l in range(1, 7))
        lerch = max(lerch, abs(lerch_partial_sum(zz, 0.5, aa, 7) - direct) / max(abs(direct), 1e-300))
    dt, n = 0.05, 400
    t = np.arange(n + 1) * dt
    rule = ProductRule(abel_density(0.0), dt, n)
    abel = float(np.max(np.abs(rule.apply(rule.apply(np.ones(n + 1)))[1:] / t[1:] - np.pi)))
    return _record(10, refl < 1e-12 and lerch < 1e-10 and abel < 1e-8,
                   f"Faddeeva reflection (1e4 points) = {refl:.1e} (tol 1e-12); Lerch partial sum = {lerch:.1e} "
                   f"(tol 1e-10); Abel twice / (pi t) - 1 = {abel:.1e} (tol 1e-8)")


def criterion_11():
    p, ic, tr, _ = _run(3.0, 4.5, 32, 128)
    P = tr.period_steps
    rows, _ = period_samples(tr.psi0, P, np.arange(0, P, P // 8))
    s = dlt(rows, 0.9, 64)
    trip = float(np.max(np.abs(dlt_inverse(s, np.arange(rows.shape[0])) - rows)))
    rep = singularity_probe(rows, p.period)
    want = (0.5 * p.k**2 * p.period) % (2 * np.pi)
    gaps = [abs((c.arg - want + np.pi) % (2 * np.pi) - np.pi) for c in rep.poles]
    found = min(gaps) if gaps else np.inf
    pg, icg, trg, _ = _run(3.0, 4.0, 40, 128, PACKET_ODD)
    rows_g, _ = period_samples(trg.psi0, trg.period_steps, np.arange(0, trg.period_steps, trg.period_steps // 8))
    none = singularity_probe(rows_g, pg.period).poles == ()
    return _record(11, trip < 1e-10 and found < 2e-3 and none,
                   f"DLT round trip = {trip:.1e} (tol 1e-10); plane-wave pole arg - (k^2/2)T = {found:.1e} rad "
                   f"(tol 2e-3); compact packet reports no pole: {none}")


def _count_density_points(periods: int, spp: int) -> int:
    """Kernel density evaluations of one march."""
    count = [0]
    saved = {name: getattr(volterra, name) for name in ("abel_density", "outer_density", "local_density")}

    def counting(make):
        def wrapped(*args):
            d = make(*args)

            def g(t, tau):
                r = d(t, tau)
                count[0] += np.size(r)
                return r
            return g
        return wrapped

    try:
        for name, make in saved.items():
            setattr(volterra, name, counting(make))
        p = to_atomic(10.2, 3.0, 4.5, K)
        src = source_trace(time_grid(p, periods, spp), p, plane_wave_ic(p), spp, with_total=False)
        solve_psi0(src, p, SolverSettings(check_residual=False))
    finally:
        for name, make in saved.items():
            setattr(volterra, name, make)
    return count[0]


def criterion_12():
    p, ic, tr, _ = _run(3.0, 4.5, 32, 256)
    march = tr.timings["march_s"]
    growth = _count_density_points(16, 64) / _count_density_points(8, 64)
    return _record(12, march < 60 and growth <= 2.2,
                   f"32 periods x 256 steps march = {march:.1f} s (tol 60 s); kernel evaluations grow x{growth:.2f} "
                   f"when M doubles at fixed steps/period (O(M P) allows 2)")


def criterion_2():
    # collects the residuals of every accepted run made above
    worst = max(RESIDUALS.values())
    name = max(RESIDUALS, key=RESIDUALS.get)
    return _record(2, worst < 1e-5, f"refined-grid residual max over {len(RESIDUALS)} runs = {worst:.2e} "
                                    f"[{name}] (tol 1e-5)")


ORDER = (1, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 2)


def test_criterion_1():
    assert criterion_1()


def test_criterion_3():
    assert criterion_3()


def test_criterion_4():
    assert criterion_4()


def test_criterion_5():
    assert criterion_5()


def test_criterion_6():
    assert criterion_6()


def test_criterion_7():
    assert criterion_7()


def test_criterion_8():
    assert criterion_8()


def test_criterion_9():
    assert criterion_9()


def test_criterion_10():
    assert criterion_10()


def test_criterion_11():
    assert criterion_11()


def test_criterion_12():
    assert criterion_12()


def test_criterion_2():
    # after every other criterion so that all runs are included
    assert criterion_2()


if __name__ == "__main__":
    ok = True
    for n in ORDER:
        ok &= bool(globals()[f"criterion_{n}"]())
    print()
    for n in sorted(RESULTS):
        print(RESULTS[n])
    raise SystemExit(0 if ok else 1)
