"""Time-periodic scattering state of the driven step (mode matching).

Channel ``n`` carries energy k^2/2 + n*omega.  On the left the state is

    e^{ikx} + sum_n R_n e^{-i p_n x} e^{-i n omega t}        (times e^{-i k^2 t/2})

with p_n = sqrt(k^2 + 2 n omega) (Re, Im >= 0).  On the right each channel is
a Volkov-shifted exponential

    D_n exp(i A(t) x - kappa_n x) f_n(t) e^{-i n omega t},
    f_n(t) = exp(i a_phase sin 2 omega t - kappa_n a_len cos omega t),

with A(t) = (E/omega) sin omega t and kappa_n^2 = 2(U~ - k^2/2 - n omega).
Continuity of the value and of the x-derivative at x = 0 is projected on the
harmonics |m| <= N.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .params import PhysParams

N_SAMPLES = 4096
MARGINAL_TOL = 1e-9
COND_MAX = 1e12
TRUNC_TOL = 1e-6


class FloquetError(ArithmeticError):
    """Base class for failures of the periodic solve."""


class ConditioningError(FloquetError):
    def __init__(self, message: str, cond: float) -> None:
        super().__init__(message)
        self.cond = cond


class MarginalResonanceError(FloquetError):
    """A channel sits exactly at a threshold (zero momentum)."""

    def __init__(self, message: str, channel: int) -> None:
        super().__init__(message)
        self.channel = channel


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModeBasis:
    """Fourier coefficients of f_n: f_n(t) = sum_l coef[n][l] e^{-i l omega t}."""

    n: np.ndarray
    kappa: np.ndarray
    coef: np.ndarray
    coef_a: np.ndarray  # same for A(t) f_n(t)
    tail: float

    def harmonic(self, table: np.ndarray, l: np.ndarray) -> np.ndarray:
        return table[..., np.asarray(l) % table.shape[-1]]


@dataclass(frozen=True)
class FloquetSolution:
    """Solved periodic state.  ``lam`` is -k^2/2, so that the state is
    e^{i lam t} times a periodic function; ``C`` holds the reflected
    amplitudes R_n and ``D`` the right coefficients."""

    lam: float
    N: int
    C: dict[int, complex]
    D: dict[int, complex]
    kappa: dict[int, complex]
    p_left: dict[int, complex]
    open_left: tuple[int, ...]
    open_right: tuple[int, ...]
    params: PhysParams
    cond: float = float("nan")
    flux: float = float("nan")
    truncation_change: float = float("nan")
    tail: float = float("nan")
    extras: dict = field(default_factory=dict)

    def boundary_value(self, t) -> np.ndarray:
        """Periodic part at x = 0: 1 + sum_n R_n e^{-i n omega t}."""
        t = np.asarray(t, dtype=float)
        w = self.params.omega
        out = np.ones_like(t, dtype=complex)
        for n, c in self.C.items():
            out = out + c * np.exp(-1j * n * w * t)
        return out

    def right_state(self, x: float, t) -> tuple[np.ndarray, np.ndarray]:
        """Periodic part of psi and d psi/dx at x >= 0."""
        p = self.params
        t = np.asarray(t, dtype=float)
        A = (p.E / p.omega) * np.sin(p.omega * t)
        val = np.zeros_like(t, dtype=complex)
        der = np.zeros_like(t, dtype=complex)
        for n, d in self.D.items():
            kap = self.kappa[n]
            f = np.exp(1j * p.a_phase * np.sin(2 * p.omega * t) - kap * p.a_len * np.cos(p.omega * t))
            term = d * f * np.exp((1j * A - kap) * x - 1j * n * p.omega * t)
            val += term
            der += (1j * A - kap) * term
        return val, der

    def transmitted_current(self, x: float = 0.5, samples: int = 1024) -> float:
        """Period average of Im(conj(psi) psi_x) at ``x`` > 0."""
        t = np.arange(samples) * (self.params.period / samples)
        v, d = self.right_state(x, t)
        return float(np.mean(np.imag(np.conj(v) * d)))

    @property
    def reflected_current(self) -> float:
        return float(sum(abs(self.C[n]) ** 2 * self.p_left[n].real for n in self.open_left))


def _left_momentum(p: PhysParams, n: np.ndarray) -> np.ndarray:
    s = p.k**2 + 2.0 * n * p.omega
    return np.where(s >= 0, np.sqrt(np.abs(s)) + 0j, 1j * np.sqrt(np.abs(s)))


def _right_kappa(p: PhysParams, n: np.ndarray) -> np.ndarray:
    s = 2.0 * (p.u_tilde - 0.5 * p.k**2 - n * p.omega)
    # open channels: outgoing root, exp(-kappa x) = exp(i |.| x)
    return np.where(s >= 0, np.sqrt(np.abs(s)) + 0j, -1j * np.sqrt(np.abs(s)))


def _check_marginal(p: PhysParams, n: np.ndarray) -> None:
    for j in n:
        if abs(p.k**2 + 2.0 * j * p.omega) < MARGINAL_TOL:
            raise MarginalResonanceError(f"left channel {j} is at threshold", int(j))
        if abs(2.0 * (p.u_tilde - 0.5 * p.k**2 - j * p.omega)) < MARGINAL_TOL:
            raise MarginalResonanceError(f"right channel {j} is at threshold", int(j))


def mode_basis(p: PhysParams, n: np.ndarray, samples: int = N_SAMPLES) -> ModeBasis:
    n = np.asarray(n)
    kap = _right_kappa(p, n)
    t = np.arange(samples) * (p.period / samples)
    wt = p.omega * t
    f = np.exp(1j * p.a_phase * np.sin(2 * wt)[None, :] - kap[:, None] * p.a_len * np.cos(wt)[None, :])
    A = (p.E / p.omega) * np.sin(wt)
    coef = np.fft.ifft(f, axis=1)
    coef_a = np.fft.ifft(A[None, :] * f, axis=1)
    mid = samples // 2
    band = np.abs(coef[:, mid - samples // 8: mid + samples // 8])
    tail = float(band.max() / np.abs(coef).max())
    return ModeBasis(n, kap, coef, coef_a, tail)


def build_system(p: PhysParams, N: int, M: int = N_SAMPLES):
    """Dense matrix and right-hand side for unknowns [R_-N..R_N, D_-N..D_N]."""
    if N < 1:
        raise ValueError(f"truncation N must be >= 1, got {N}")
    if M < 4 * N + 16:
        raise ValueError(f"harmonic sample count M={M} too small for N={N}")
    n = np.arange(-N, N + 1)
    _check_marginal(p, n)
    basis = mode_basis(p, n, M)
    L = len(n)
    pl = _left_momentum(p, n)
    lag = n[:, None] - n[None, :]  # m - n
    g = np.take_along_axis(basis.coef, lag.T % M, axis=1).T  # g[m, n] = coef_n[m - n]
    ga = np.take_along_axis(basis.coef_a, lag.T % M, axis=1).T
    A = np.zeros((2 * L, 2 * L), dtype=complex)
    b = np.zeros(2 * L, dtype=complex)
    A[:L, :L] = np.eye(L)
    A[:L, L:] = -g
    A[L:, :L] = np.diag(-1j * pl)
    A[L:, L:] = -(1j * ga - g * basis.kappa[None, :])
    b[N] = -1.0
    b[L + N] = -1j * p.k
    return A, b, basis


def _scaled_cond(A: np.ndarray) -> float:
    s = np.abs(A).max(axis=0)
    s[s == 0] = 1.0
    return float(np.linalg.cond(A / s[None, :]))


def _solve(p: PhysParams, N: int, M: int) -> FloquetSolution:
    A, b, basis = build_system(p, N, M)
    cond = _scaled_cond(A)
    if not np.isfinite(cond) or cond > COND_MAX:
        raise ConditioningError(f"mode-matching matrix is ill conditioned (cond {cond:.3g})", cond)
    x = np.linalg.solve(A, b)
    n = basis.n
    L = len(n)
    pl = _left_momentum(p, n)
    sol = FloquetSolution(
        lam=-0.5 * p.k**2,
        N=N,
        C={int(j): complex(x[i]) for i, j in enumerate(n)},
        D={int(j): complex(x[L + i]) for i, j in enumerate(n)},
        kappa={int(j): complex(basis.kappa[i]) for i, j in enumerate(n)},
        p_left={int(j): complex(pl[i]) for i, j in enumerate(n)},
        open_left=tuple(int(j) for j, q in zip(n, pl) if q.imag == 0),
        open_right=tuple(int(j) for j, q in zip(n, basis.kappa) if q.imag != 0),
        params=p,
        cond=cond,
        tail=basis.tail,
    )
    return sol


def flux_balance(sol: FloquetSolution, p: PhysParams | None = None, x_probe: float = 0.5) -> float:
    """|incoming - reflected - transmitted| / incoming, open channels only."""
    p = sol.params if p is None else p
    inc = p.k
    return abs(inc - sol.reflected_current - sol.transmitted_current(x_probe)) / inc


def solve_floquet(p: PhysParams, N: int = 16, M: int = N_SAMPLES, check_truncation: bool = True) -> FloquetSolution:
    """Solve the truncated system; also report flux balance and the change
    of the coefficients under N -> N + 4."""
    sol = _solve(p, N, M)
    change = float("nan")
    if check_truncation:
        big = _solve(p, N + 4, max(M, 4 * (N + 4) + 16))
        change = max(max(abs(sol.C[j] - big.C[j]), abs(sol.D[j] - big.D[j])) for j in sol.C)
        if change > TRUNC_TOL:
            warnings.warn(f"Floquet truncation N={N} not converged: change {change:.3g} under N+4",
                          TruncationWarning, stacklevel=2)
    object.__setattr__(sol, "truncation_change", change)
    object.__setattr__(sol, "flux", flux_balance(sol, p))
    return sol


def omega_critical(p: PhysParams) -> float:
    """Positive root of w^3 - (U - k^2/2) w^2 - E^2/4 = 0."""
    b = p.U - 0.5 * p.k**2
    if b <= 0:
        raise ValueError("omega_critical needs U > k^2/2")
    c = 0.25 * p.E**2
    w = b + c / b**2
    # f(w) >= 0 here and f is convex increasing beyond b: Newton decreases monotonically
    for _ in range(200):
        f = w**3 - b * w**2 - c
        df = 3 * w**2 - 2 * b * w
        if f <= 0 or df <= 0:
            break
        step = f / df
        w_new = w - step
        if w_new >= w or w_new < b:
            break
        w = w_new
    if not w > 0:
        raise ArithmeticError("no positive root for the critical frequency")
    return float(w)


@dataclass(frozen=True)
class AsymptoticReport:
    t_mid: np.ndarray
    distance: np.ndarray
    relative: np.ndarray
    slope: float


def compare_asymptotic(trace, sol: FloquetSolution, fit_from: float = 0.5) -> AsymptoticReport:
    """Per-period sup distance between psi0 e^{i k^2 t/2} and the periodic
    boundary value, with the log-log slope over the later periods."""
    P = trace.period_steps
    nper = (len(trace.grid) - 1) // P
    if nper < 16:
        raise ValueError(f"trace spans {nper} periods; at least 16 are needed")
    p = trace.params
    t = trace.grid
    phi = sol.boundary_value(t)
    diff = np.abs(trace.psi0 * np.exp(0.5j * p.k**2 * t) - phi)
    dist = np.array([diff[j * P:(j + 1) * P + 1].max() for j in range(nper)])
    scale = np.array([np.abs(phi[j * P:(j + 1) * P + 1]).max() for j in range(nper)])
    tm = (np.arange(nper) + 0.5) * p.period
    j0 = int(fit_from * nper)
    sel = slice(j0, nper)
    if np.all(dist[sel] > 0):
        slope = float(np.polyfit(np.log(tm[sel]), np.log(dist[sel]), 1)[0])
    else:
        slope = float("nan")
    return AsymptoticReport(tm, dist, dist / scale, slope)
