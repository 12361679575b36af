"""Wave function on both half-lines from the boundary trace, and observables.

For x != 0 the boundary integrals carry exp(i x^2 / 2(t-s)), which
oscillates without bound as s -> t.  On the last step before the target the
moments of that factor are taken exactly (Fresnel-type integrals through
erfc); further back the kernel is smooth and ordinary Gauss-Legendre
product weights are used, with panels while the phase still turns quickly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_laguerre, roots_legendre

from .kernels import volkov_phase_smooth, _dratio
from .params import PhysParams
from .quadrature import ProductRule
from .sources import ic_sources
from .special import erfc_c
from .volterra import BoundaryTrace

_EP4 = np.exp(0.25j * np.pi)
_EM4 = np.exp(-0.25j * np.pi)
C_MINUS = _EP4 / (2 * np.sqrt(2 * np.pi))       # sqrt(i) / (2 sqrt(2 pi))
C_PLUS = 1.0 / (2 * np.sqrt(2j * np.pi))        # 1 / (2 sqrt(2 pi i))

_LAG_X, _LAG_W = roots_laguerre(60)
_GL16 = roots_legendre(16)
_CHEB_DEG = 9


class FieldDomainError(ValueError):
    pass


class StencilWarning(UserWarning):
    pass


# ------------------------------------------------------------- moments

def fresnel_moments(a: float, q: int, dt: float, deg: int) -> np.ndarray:
    """m_j = int_0^dt (tau/dt)^j tau^{-1/2-q} exp(i a/tau) dtau, j = 0..deg.

    a > 0, q in {0, 1}.  Small a/dt: upward recursion from the erfc closed
    form of the j = -1 member.  Large a/dt: the substitution w = 1/tau and a
    rotation of the w-contour into the upper half plane turn the oscillation
    into exp(-a r), integrated by Gauss-Laguerre.
    """
    if not a > 0:
        raise FieldDomainError("fresnel_moments needs a > 0")
    if a / dt >= 4.0:
        r = _LAG_X / a
        w = 1.0 / dt + 1j * r
        j = np.arange(deg + 1)[:, None]
        g = w[None, :] ** (-(j + 1.5 - q))
        return 1j * np.exp(1j * a / dt) * (g @ _LAG_W) / a / dt ** np.arange(deg + 1)
    # J_m = int_0^dt u^{m-1/2} exp(ia/u) du, recursion (m + 1/2) J_m = dt^{m+1/2} e^{ia/dt} + i a J_{m-1}
    e = np.exp(1j * a / dt)
    J = np.empty(deg + 2, dtype=complex)  # J[m + 1] holds J_m
    J[0] = np.sqrt(np.pi / a) * _EP4 * erfc_c(_EM4 * np.sqrt(a / dt))
    for m in range(0, deg + 1):
        J[m + 1] = (dt ** (m + 0.5) * e + 1j * a * J[m]) / (m + 0.5)
    # tau^{j - 1/2 - q} -> J_{j - q}
    return np.array([J[jj - q + 1] for jj in range(deg + 1)]) / dt ** np.arange(deg + 1)


class _OscRule(ProductRule):
    """Product rule for phi(t, tau) tau^{-1/2-q} exp(i a/tau) (no start basis)."""

    def __init__(self, a: float, q: int, phi, dt: float, n_max: int, period_steps: int | None,
                 tabulate: bool = True) -> None:
        self.a = float(a)
        self.q = int(q)
        self.phi = phi
        self.m_osc = int(np.ceil(np.sqrt(self.a / (0.5 * dt)))) + 1
        self._fm = fresnel_moments(self.a, self.q, dt, 5 + _CHEB_DEG)
        self._cheb_u = 0.5 * (1 - np.cos(np.pi * (np.arange(_CHEB_DEG + 1) + 0.5) / (_CHEB_DEG + 1)))
        self._vand = np.linalg.inv(self._cheb_u[:, None] ** np.arange(_CHEB_DEG + 1))
        self._mu_cache: dict[int, np.ndarray] = {}

        def density(t, tau):
            return phi(t, tau) * np.exp(1j * self.a / tau) * tau ** (-self.q)

        # apply_targets builds its own corrections for the requested targets
        super().__init__(density, dt, n_max, period_steps, n_start=0, tabulate=tabulate, corrections=False)

    def direct_weights(self, n: int) -> np.ndarray:
        """For the first few targets the data are interpolated with six nodes
        even when that reaches past node n: reconstruction is done after the
        march, so later boundary values are known."""
        q = min(6, self.n_max + 1)
        if n == 0 or n + 1 >= q:
            return super().direct_weights(n)
        L = min(self.n_max + 1, n + q)
        w = np.zeros(L, dtype=complex)
        t = self._phase_time(n)
        for i in range(n):
            s0 = min(max(i - 2, 0), L - q)
            nodes = np.arange(s0, s0 + q)
            mu = self._mono_moments(t, n - 1 - i)[:q]
            V = (nodes - i)[:, None].astype(float) ** np.arange(q)[None, :]
            w[nodes] += np.linalg.solve(V.T, mu)
        return w

    def _theta_moments(self, m: int) -> np.ndarray:
        """mu_k = int theta^k tau^{-1/2-q} exp(i a/tau) dtau over the interval
        at lag m, theta = (tau_1 - tau)/dt, k = 0..5 + _CHEB_DEG."""
        hit = self._mu_cache.get(m)
        if hit is not None:
            return hit
        dt, a, q = self.dt, self.a, self.q
        K = 6 + _CHEB_DEG
        tau1 = (m + 1) * dt
        if m == 0 and a / dt < 4.0:
            mu_u = fresnel_moments(a, q, dt, K - 1)  # moments of u = tau/dt = 1 - theta
            mu = np.array([sum(math.comb(k, j) * (-1) ** j * mu_u[j] for j in range(k + 1)) for k in range(K)])
        else:
            # w = 1/tau; int_{w1}^{w0} = int_{w1}^{w1+i inf} - int_{w0}^{w0+i inf}
            mu = self._ray_moments(1.0 / tau1, tau1, K)
            if m > 0:
                mu = mu - self._ray_moments(1.0 / (m * dt), tau1, K)
        self._mu_cache[m] = mu
        return mu

    def _ray_moments(self, w0: float, tau1: float, K: int) -> np.ndarray:
        a, q = self.a, self.q
        v = w0 + 1j * _LAG_X / a
        theta = (tau1 - 1.0 / v) / self.dt
        h = v ** (q - 1.5) * _LAG_W
        return 1j * np.exp(1j * a * w0) / a * (theta[None, :] ** np.arange(K)[:, None] @ h)

    def _exact_moments(self, t, m: int):
        """Moments of theta^k times phi over the interval at lag m, with phi
        interpolated in theta (Chebyshev nodes) and the oscillatory factor
        integrated exactly."""
        t = np.atleast_1d(t)
        mu = self._theta_moments(m)
        vals = self.phi(t[:, None], (m + 1 - self._cheb_u[None, :]) * self.dt)
        coef = vals @ self._vand.T  # monomial coefficients in theta
        H = mu[np.arange(_CHEB_DEG + 1)[:, None] + np.arange(6)[None, :]]
        return coef @ H

    def _panel_moments(self, t, m: int):
        t = np.atleast_1d(t)
        dt = self.dt
        turn = self.a / (dt * m * (m + 1))
        npan = int(np.ceil(turn / 2.0)) + 1
        x, w = _GL16
        edges = np.linspace(0.0, 1.0, npan + 1)
        h = 0.5 * np.diff(edges)
        th = ((edges[:-1] + edges[1:])[:, None] * 0.5 + h[:, None] * x[None, :]).ravel()
        wt = (h[:, None] * w[None, :]).ravel()
        tau = (m + 1 - th) * dt
        k = self.density(t[:, None], tau[None, :]) / np.sqrt(tau)[None, :]
        return dt * (k * wt) @ (th[:, None] ** np.arange(6))

    def _mono_moments(self, t, m):
        t = np.asarray(t, dtype=float)
        m = np.asarray(m)
        t, m = np.broadcast_arrays(t, m)
        out = np.zeros(t.shape + (6,), dtype=complex)
        mi = m.astype(int)
        far = mi >= self.m_osc
        if np.any(far):
            out[far] = super()._mono_moments(t[far], mi[far])
        for mv in np.unique(mi[~far]):
            sel = mi == mv
            mv = int(mv)
            if mv == 0 or self.a >= 4.0 * (mv + 1) * self.dt:
                out[sel] = self._exact_moments(t[sel], mv)
            else:
                out[sel] = self._panel_moments(t[sel], mv)
        return out


# ------------------------------------------------------------- data types

@dataclass(frozen=True)
class WaveField:
    x_grid: np.ndarray
    t_grid: np.ndarray
    psi: np.ndarray  # shape (len(t_grid), len(x_grid))
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ObservableSeries:
    t_grid: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in ("current", "local_norm", "modulus"):
            raise ValueError(f"unknown observable kind {self.kind!r}")


# ------------------------------------------------------------- reconstruction

def _targets(trace: BoundaryTrace, t_index) -> np.ndarray:
    n = np.arange(len(trace.grid)) if t_index is None else np.atleast_1d(np.asarray(t_index, dtype=int))
    if np.any(n < 0) or np.any(n >= len(trace.grid)):
        raise FieldDomainError("time index outside the trace grid")
    return n


def psi_minus(x: float, trace: BoundaryTrace, ic, t_index=None) -> np.ndarray:
    """psi(x, t_n) for x < 0 at the trace times with indices ``t_index``
    (all times when None)."""
    if not x < 0:
        raise FieldDomainError("psi_minus needs x < 0")
    n = _targets(trace, t_index)
    dt, M = trace.dt, len(trace.grid) - 1
    a = 0.5 * x * x
    one = lambda t, tau: np.ones(np.broadcast(t, tau).shape)
    r0 = _OscRule(a, 0, one, dt, M, None)
    r1 = _OscRule(a, 1, one, dt, M, None)
    src = ic_sources(ic, trace.params)
    t = trace.grid[n]
    h = np.where(t > 0, src.h_minus(x, np.where(t > 0, t, 1.0)), src.initial(x))
    body = r0.apply_targets(trace.psi_x0, n) + 1j * x * r1.apply_targets(trace.psi0, n)
    return h + C_MINUS * body


def _plus_phis(x: float, p: PhysParams):
    w = p.omega

    def phase(t, tau):
        return np.exp(1j * volkov_phase_smooth(x, t, tau, p))

    def phi_dx(t, tau):
        return -1j * phase(t, tau)

    def phi_psi(t, tau):
        # x + d + tau (E/w) sin(ws), with d = (E/w^2)(cos wt - cos ws)
        s = t - tau
        return (x + tau * (p.a_len * _dratio(t, tau, w) + p.E / w * np.sin(w * s))) * phase(t, tau)

    return phi_dx, phi_psi


def psi_plus(x: float, trace: BoundaryTrace, ic, p: PhysParams | None = None, t_index=None) -> np.ndarray:
    """psi(x, t_n) for x > 0."""
    if not x > 0:
        raise FieldDomainError("psi_plus needs x > 0")
    p = p or trace.params
    n = _targets(trace, t_index)
    dt, M = trace.dt, len(trace.grid) - 1
    a = 0.5 * x * x
    KP = None if p.E == 0 else trace.period_steps
    phi_dx, phi_psi = _plus_phis(x, p)
    r0 = _OscRule(a, 0, phi_dx, dt, M, KP, tabulate=False)
    r1 = _OscRule(a, 1, phi_psi, dt, M, KP, tabulate=False)
    src = ic_sources(ic, p)
    t = trace.grid[n]
    h = np.where(t > 0, src.h_plus(x, np.where(t > 0, t, 1.0)), src.initial(x))
    body = r0.apply_targets(trace.psi_x0, n) + r1.apply_targets(trace.psi0, n)
    return h + C_PLUS * body


def reconstruct(trace: BoundaryTrace, ic, x_grid, t_index=None, p: PhysParams | None = None) -> WaveField:
    """psi on x_grid x (trace times selected by ``t_index``)."""
    p = p or trace.params
    x_grid = np.asarray(x_grid, dtype=float)
    n = _targets(trace, t_index)
    psi = np.empty((len(n), len(x_grid)), dtype=complex)
    for j, x in enumerate(x_grid):
        if x < 0:
            psi[:, j] = psi_minus(x, trace, ic, n)
        elif x > 0:
            psi[:, j] = psi_plus(x, trace, ic, p, n)
        else:
            psi[:, j] = trace.psi0[n]
    meta = {"params": p.to_lab(), "dt": trace.dt, "period_steps": trace.period_steps,
            "residual_norm": trace.residual_norm}
    return WaveField(x_grid, trace.grid[n], psi, meta)


# ------------------------------------------------------------- observables

_D5 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _dx(field_: WaveField, j: int) -> np.ndarray:
    x = field_.x_grid
    n = len(x)
    if 2 <= j <= n - 3:
        h = np.diff(x[j - 2:j + 3])
        if np.allclose(h, h[0], rtol=1e-9):
            return field_.psi[:, j - 2:j + 3] @ _D5 / h[0]
    warnings.warn("current: no uniform 5-point stencil around x; using a one-sided/uneven derivative",
                  StencilWarning, stacklevel=3)
    return np.gradient(field_.psi, x, axis=1, edge_order=2)[:, j]


def current(field_: WaveField, x: float, trace: BoundaryTrace | None = None, k: float | None = None) -> ObservableSeries:
    """j(x, t) = Im(conj(psi) dpsi/dx), divided by k when given.

    At x = 0 with a trace available the boundary values are used directly.
    """
    if x == 0 and trace is not None:
        t_idx = np.searchsorted(trace.grid, field_.t_grid)
        j = np.imag(np.conj(trace.psi0[t_idx]) * trace.psi_x0[t_idx])
    else:
        idx = np.nonzero(np.isclose(field_.x_grid, x, rtol=0, atol=1e-12))[0]
        if len(idx) == 0:
            raise FieldDomainError(f"x = {x} is not on the field grid")
        col = int(idx[0])
        j = np.imag(np.conj(field_.psi[:, col]) * _dx(field_, col))
    if k is not None:
        j = j / k
    return ObservableSeries(field_.t_grid, j, "current")


def local_norm(field_: WaveField, A: tuple[float, float]) -> ObservableSeries:
    """Trapezoid integral of |psi|^2 over the grid points inside A."""
    lo, hi = A
    sel = (field_.x_grid >= lo - 1e-12) & (field_.x_grid <= hi + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise FieldDomainError("interval A must contain at least two grid points")
    vals = np.trapezoid(np.abs(field_.psi[:, sel]) ** 2, field_.x_grid[sel], axis=1)
    return ObservableSeries(field_.t_grid, vals, "local_norm")


def modulus(field_: WaveField, x: float) -> ObservableSeries:
    idx = np.nonzero(np.isclose(field_.x_grid, x, rtol=0, atol=1e-12))[0]
    if len(idx) == 0:
        raise FieldDomainError(f"x = {x} is not on the field grid")
    return ObservableSeries(field_.t_grid, np.abs(field_.psi[:, int(idx[0])]), "modulus")


def decay_exponent(series: ObservableSeries | np.ndarray, window=None, t=None) -> float:
    """Least-squares slope of log(value) against log(t) over ``window``
    (a slice or index array).  A plain array is indexed from 1."""
    if isinstance(series, ObservableSeries):
        t_all, v_all = np.asarray(series.t_grid, dtype=float), np.asarray(series.values, dtype=float)
    else:
        v_all = np.asarray(series, dtype=float)
        t_all = np.arange(1, len(v_all) + 1, dtype=float) if t is None else np.asarray(t, dtype=float)
    if window is not None:
        t_all, v_all = t_all[window], v_all[window]
    if np.any(v_all <= 0) or np.any(t_all <= 0):
        raise FieldDomainError("decay_exponent needs positive values and times")
    return float(np.polyfit(np.log(t_all), np.log(v_all), 1)[0])
