"""Marching solver for the boundary integral equation psi0 = h + L psi0.

The operator is applied in the nested form

    L psi0(t) = (1/2 pi) int_0^t (psi0 * s^{-1/2})(u) G(u, t) du
                + int_0^t psi0(s) g2(s, t) / sqrt(t - s) ds,

and the composite source is kept unassembled, so that the density actually
convolved with G is B = (psi0 - 2 h-) * s^{-1/2}.  All grid functions are
stored with the carrier exp(-i lam t) divided out.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline

from .kernels import abel_density, local_density, outer_density
from .params import PhysParams
from .quadrature import ProductRule, apply_at, apply_streaming
from .sources import SourceTrace, source_trace

SQRT_2_OVER_IPI = np.sqrt(2.0 / (1j * np.pi))


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, trace: BoundaryTrace | None = None) -> None:
        super().__init__(message)
        self.trace = trace


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    """``nu`` is the exponential weight of the diagnostic norm
    sup |psi0(t)| exp(-nu t) (None means 2 omega).  ``max_fixed_point_iters``
    is accepted for interface compatibility; the causal march needs no
    fixed-point sweeps."""

    nu: float | None = None
    tol_resid: float = 1e-5
    max_fixed_point_iters: int = 0
    check_residual: bool = True

    def __post_init__(self) -> None:
        if not self.tol_resid > 0:
            raise ValueError("tol_resid must be positive")


@dataclass(frozen=True)
class BoundaryTrace:
    grid: np.ndarray
    psi0: np.ndarray
    psi_x0: np.ndarray
    residual_norm: float
    carrier: float
    period_steps: int
    params: PhysParams
    weighted_sup: float = float("nan")
    nu: float = float("nan")
    timings: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def current(self) -> np.ndarray:
        """Probability current at x = 0, Im(conj(psi0) psi_x0)."""
        return np.imag(np.conj(self.psi0) * self.psi_x0)


def _eta_from_beta(beta: np.ndarray, grid: np.ndarray, lam: float) -> np.ndarray:
    """exp(i lam t) psi_x0 from beta = exp(i lam t) B, B = (psi0 - 2 h-) * s^{-1/2}.

    dB/dt = exp(-i lam t)(beta' - i lam beta); beta' from the derivative of
    the quintic interpolating spline.
    """
    if len(grid) < 6:
        d = np.gradient(beta, grid)
    else:
        d = make_interp_spline(grid, beta, k=5).derivative()(grid)
    return SQRT_2_OVER_IPI * (d - 1j * lam * beta)


def _kernel_period(p: PhysParams, P: int) -> int | None:
    # without a field the kernels depend on the lag only
    return None if p.E == 0 else P


class _ZeroRule:
    def diag(self, n):
        return 0.0

    def history(self, n, y):
        return 0.0

    def apply(self, y):
        return np.zeros(len(y), dtype=complex)


def _march(H, beta_h, abel, outer, local, chi, beta, n0):
    """Fill chi, beta for n > n0; entries 0..n0 are given."""
    M = len(H) - 1
    for n in range(n0 + 1, M + 1):
        a_d = abel.diag(n)
        o_d = outer.diag(n)
        c_d = local.diag(n)
        # beta_n = b_known + a_d chi_n
        b_known = abel.history(n, chi) - 2.0 * beta_h[n]
        rhs = H[n] + outer.history(n, beta) + o_d * b_known + local.history(n, chi)
        chi[n] = rhs / (1.0 - o_d * a_d - c_d)
        beta[n] = b_known + a_d * chi[n]
    return chi, beta


# start-up: the first START_STEPS values come from the same march on a grid
# START_REFINE times finer, recursively, until the step is below START_DT
START_STEPS = 32
START_REFINE = 4
START_DT = 2e-3


def _solve_arrays(src: SourceTrace, p: PhysParams, refine: int = START_REFINE):
    grid = src.grid
    dt = src.dt
    M = len(grid) - 1
    P = src.period_steps
    lam = src.carrier
    car = np.exp(1j * lam * grid)
    KP = _kernel_period(p, P)
    abel = ProductRule(abel_density(lam), dt, M, None)
    outer = ProductRule(outer_density(p, lam), dt, M, KP)
    local = _ZeroRule() if p.E == 0 else ProductRule(local_density(p, lam), dt, M, KP)
    H = car * (src.h_minus[:M + 1] + src.h_plus[:M + 1])
    beta_h = car * src.abel_h_minus[:M + 1]
    chi = np.zeros(M + 1, dtype=complex)
    beta = np.zeros(M + 1, dtype=complex)
    chi[0] = src.psi0_initial
    beta[0] = -2.0 * beta_h[0]
    n0 = 0
    if dt > START_DT and src.ic is not None:
        n0 = min(START_STEPS, M)
        R = refine
        fine = np.arange(n0 * R + 1) * (dt / R)
        fsrc = source_trace(fine, p, src.ic, P * R, with_total=False)
        fchi, fbeta, feta = _solve_arrays(fsrc, p)
        chi[:n0 + 1] = fchi[::R]
        beta[:n0 + 1] = fbeta[::R]
    chi, beta = _march(H, beta_h, abel, outer, local, chi, beta, n0)
    eta = _eta_from_beta(beta, grid, lam)
    eta[0] = src.psix0_initial
    if n0:
        eta[:n0 + 1] = feta[::R]
    return chi, beta, eta


def solve_psi0(source: SourceTrace, p: PhysParams, settings: SolverSettings | None = None) -> BoundaryTrace:
    """March the boundary equation on the source grid."""
    settings = settings or SolverSettings()
    grid = source.grid
    dt = source.dt
    M = len(grid) - 1
    P = source.period_steps
    if abs(P * dt - p.period) > 1e-9 * p.period:
        raise ValueError("grid step is not period/steps_per_period")
    lam = source.carrier
    car = np.exp(1j * lam * grid)
    timings = {}
    t0 = time.perf_counter()
    chi, beta, eta = _solve_arrays(source, p)
    timings["march_s"] = time.perf_counter() - t0
    if not np.all(np.isfinite(chi)):
        raise NumericalFailure("non-finite values in the boundary trace")
    psi0 = chi / car
    psi_x0 = eta / car
    nu = settings.nu if settings.nu is not None else 2.0 * p.omega
    wsup = float(np.max(np.abs(psi0) * np.exp(-nu * grid)))
    trace = BoundaryTrace(grid, psi0, psi_x0, float("nan"), lam, P, p, wsup, nu, timings)
    if settings.check_residual:
        t0 = time.perf_counter()
        res = residual(trace, source, p)
        timings["residual_s"] = time.perf_counter() - t0
        trace = BoundaryTrace(grid, psi0, psi_x0, res, lam, P, p, wsup, nu, timings)
        if not np.isfinite(res):
            raise NumericalFailure("residual is not finite")
        if res > settings.tol_resid:
            raise ConvergenceError(
                f"refined-grid residual {res:.3e} exceeds tol_resid {settings.tol_resid:.1e}; "
                f"increase steps_per_period", trace)
    return trace


def recover_psi_x0(trace: BoundaryTrace, source: SourceTrace | np.ndarray) -> np.ndarray:
    """psi_x0 = sqrt(2/(i pi)) d/dt [psi0 * t^{-1/2} - 2 h- * t^{-1/2}].

    ``source`` is either a :class:`SourceTrace` (its Abel-convolved h- is
    used) or the array of h-(0,t) on the trace grid.
    """
    grid, dt, lam = trace.grid, trace.dt, trace.carrier
    car = np.exp(1j * lam * grid)
    abel = ProductRule(abel_density(lam), dt, len(grid) - 1, None)
    if isinstance(source, SourceTrace):
        beta_h = car * source.abel_h_minus
    else:
        beta_h = abel.apply(car * np.asarray(source, dtype=complex))
    beta = abel.apply(car * trace.psi0) - 2.0 * beta_h
    return _eta_from_beta(beta, grid, lam) / car


def relation_defect(trace: BoundaryTrace, source: SourceTrace) -> np.ndarray:
    """psi0 - 2 h- - sqrt(i/2pi) int (t-s)^{-1/2} psi_x0 ds on the grid."""
    grid, dt, lam = trace.grid, trace.dt, trace.carrier
    car = np.exp(1j * lam * grid)
    abel = ProductRule(abel_density(lam), dt, len(grid) - 1, None)
    conv = abel.apply(car * trace.psi_x0) / car
    return trace.psi0 - 2.0 * source.h_minus - np.sqrt(1j / (2 * np.pi)) * conv


def apply_operator(psi0: np.ndarray, source: SourceTrace, p: PhysParams,
                   streaming: bool = False) -> np.ndarray:
    """psi0 - h - L psi0 on the grid of ``source`` (carrier removed and
    restored internally)."""
    grid, dt, lam = source.grid, source.dt, source.carrier
    M = len(grid) - 1
    P = source.period_steps
    car = np.exp(1j * lam * grid)
    chi = car * psi0
    abel = ProductRule(abel_density(lam), dt, M, None)
    beta = abel.apply(chi) - 2.0 * car * source.abel_h_minus
    if streaming:
        outer = apply_streaming(outer_density(p, lam), dt, beta, P)
        loc = apply_streaming(local_density(p, lam), dt, chi, P)
    else:
        outer = ProductRule(outer_density(p, lam), dt, M, P).apply(beta)
        loc = ProductRule(local_density(p, lam), dt, M, P).apply(chi)
    H = car * (source.h_minus + source.h_plus)
    return (chi - H - outer - loc) / car


def _start_change(trace: BoundaryTrace, source: SourceTrace, p: PhysParams) -> float:
    """Change of the start-up values when their grid is refined twice as much."""
    n0 = min(START_STEPS, len(trace.grid) - 1)
    if trace.dt <= START_DT or source.ic is None or n0 == 0:
        return 0.0
    R = 2 * START_REFINE
    fine = np.arange(n0 * R + 1) * (trace.dt / R)
    fsrc = source_trace(fine, p, source.ic, trace.period_steps * R, with_total=False)
    fchi, _, _ = _solve_arrays(fsrc, p)
    car = np.exp(1j * trace.carrier * trace.grid[:n0 + 1])
    return float(np.max(np.abs(fchi[::R] - car * trace.psi0[:n0 + 1])))


def residual(trace: BoundaryTrace, source: SourceTrace, p: PhysParams | None = None,
             n_phases: int = 32) -> float:
    """Relative residual max |psi0 - h - L psi0| / max |psi0| on the 2x refined grid.

    The trace is carried to the fine grid by a quintic spline in the carrier
    frame and the operator is rebuilt with the fine step.  With a field the
    check uses the fine nodes of ``n_phases`` phases of the period (odd fine
    indices, i.e. midpoints of the solver grid); without one all fine nodes
    are used.  The start-up window, which the solver fills from a finer grid,
    is checked instead by refining that grid once more.
    """
    p = p or trace.params
    if source.ic is None:
        raise ValueError("source does not carry its initial condition")
    grid, lam = trace.grid, trace.carrier
    M = len(grid) - 1
    P = trace.period_steps
    fine = np.arange(2 * M + 1) * (0.5 * trace.dt)
    chi_f = make_interp_spline(grid, np.exp(1j * lam * grid) * trace.psi0, k=5)(fine)
    fsrc = source_trace(fine, p, source.ic, 2 * P, with_total=False)
    dt = fsrc.dt
    car = np.exp(1j * lam * fine)
    first = 2 * min(START_STEPS, M) if trace.dt > START_DT else 1
    KP = _kernel_period(p, 2 * P)
    if KP is None:
        targets = np.arange(first, 2 * M + 1)
    else:
        step = max(1, P // n_phases)
        phases = (2 * step * np.arange(n_phases) + 1) % (2 * P)
        targets = np.array([n for n in range(first, 2 * M + 1) if n % (2 * P) in set(phases)], dtype=int)
    beta = ProductRule(abel_density(lam), dt, 2 * M, None).apply(chi_f) - 2.0 * car * fsrc.abel_h_minus
    r = chi_f[targets] - car[targets] * (fsrc.h_minus[targets] + fsrc.h_plus[targets])
    r -= apply_at(outer_density(p, lam), dt, beta, KP, targets)
    if p.E != 0:
        r -= apply_at(local_density(p, lam), dt, chi_f, KP, targets)
    scale = float(np.max(np.abs(trace.psi0)))
    worst = max(float(np.max(np.abs(r))) if len(r) else 0.0, _start_change(trace, source, p))
    return worst / scale if scale > 0 else worst


def _source_ic(source: SourceTrace):
    return getattr(source, "ic", None)
