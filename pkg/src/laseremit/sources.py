"""Free-evolution source terms h-(x,t), h+(x,t) and the composite source of
the boundary equation."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import roots_legendre

from .kernels import abel_density, outer_density
from .params import GaussianIC, PhysParams, PlaneWaveIC
from .quadrature import ProductRule
from .special import erfc_c, faddeeva

_EM = np.exp(-0.25j * np.pi)  # sqrt(1/i)
_EP = np.exp(0.25j * np.pi)   # sqrt(i)


class SourceDomainError(ValueError):
    pass


# ------------------------------------------------------------- plane wave

def _a_coef(k: float) -> complex:
    # sqrt(t/(2i)) k = a sqrt(t), a^2 = -i k^2/2
    return _EM * k / np.sqrt(2.0)


def h_minus_plane(t, p: PhysParams, ic: PlaneWaveIC):
    """h-(0, t) for the static scattering state."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise SourceDomainError("t must be non-negative")
    lam = 0.5 * ic.k**2
    w = faddeeva(1j * _a_coef(ic.k) * np.sqrt(t))
    # erfc(a sqrt t) = exp(i lam t) w(i a sqrt t); erfc(-x) = 2 - erfc(x)
    return np.exp(-1j * lam * t) - 0.5 * (1.0 - ic.R0) * w


def abel_h_minus_plane(t, p: PhysParams, ic: PlaneWaveIC):
    """(h-(0, .) * s^{-1/2})(t) in closed form.

    Uses exp(a^2 t) * t^{-1/2} = (sqrt(pi)/a) exp(a^2 t) erf(a sqrt t) and
    (exp(a^2 t) erfc(a sqrt t)) * t^{-1/2} = (sqrt(pi)/a)(1 - exp(a^2 t) erfc(a sqrt t)).
    """
    t = np.asarray(t, dtype=float)
    a = _a_coef(ic.k)
    lam = 0.5 * ic.k**2
    w = faddeeva(1j * a * np.sqrt(t))
    return np.sqrt(np.pi) / a * (np.exp(-1j * lam * t) - w - 0.5 * (1.0 - ic.R0) * (1.0 - w))


def h_minus_plane_x(x, t, ic: PlaneWaveIC):
    """h-(x, t) for x <= 0, t > 0."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    k = ic.k
    lam = 0.5 * k**2
    st = np.sqrt(2.0 * t)
    z1 = _EM * (x - k * t) / st
    z2 = _EM * (x + k * t) / st
    ph = np.exp(-1j * lam * t)
    return 0.5 * ph * (np.exp(1j * k * x) * erfc_c(z1) + ic.R0 * np.exp(-1j * k * x) * erfc_c(z2))


def h_plus_plane_x(x, t, p: PhysParams, ic: PlaneWaveIC):
    """h+(x, t) for x >= 0 and t > 0, data T0 exp(-kappa y) on y > 0.

    Written as (T0/2) exp(i phase) w(iz); where w(iz) would need the lower
    half plane the erfc form with a bounded exponential is used instead.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise SourceDomainError("h_plus_plane_x needs t > 0")
    w_ = p.omega
    kap = ic.kappa
    cp = p.a_len * (1.0 - np.cos(w_ * t))
    X = cp - x
    z = _EP * kap * np.sqrt(0.5 * t) + _EM * X / np.sqrt(2.0 * t)
    base = x * p.E * np.sin(w_ * t) / w_ - p.u_tilde * t + p.a_phase * np.sin(2 * w_ * t)
    iz = 1j * z
    upper = iz.imag >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        wz = faddeeva(np.where(upper, iz, 0.0))
        stable = 0.5 * ic.T0 * np.exp(1j * (base + X**2 / (2 * t))) * wz
        # erfc(z) form: exp(-z^2) absorbed analytically -> exp(kappa X ...)
        alt = 0.5 * ic.T0 * np.exp(1j * (base + 0.5 * kap**2 * t) + kap * X) * erfc_c(np.where(upper, 0.0, z))
    return np.where(upper, stable, alt)


def h_plus_plane(t, p: PhysParams, ic: PlaneWaveIC):
    """h+(0, t); equals T0/2 at t = 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise SourceDomainError("t must be non-negative")
    tt = np.where(t > 0, t, 1.0)
    val = h_plus_plane_x(0.0, tt, p, ic)
    return np.where(t > 0, val, 0.5 * ic.T0)


def h_plus_plane_erfc(t, p: PhysParams, ic: PlaneWaveIC):
    """The same source in the erfc form with a growing prefactor; only for
    moderate t where both factors stay finite."""
    t = np.asarray(t, dtype=float)
    w_ = p.omega
    kap = ic.kappa
    cp = p.a_len * (1.0 - np.cos(w_ * t))
    pref = np.exp(cp * kap - 0.5j * (ic.k**2 + p.E**2 / (2 * w_**2)) * t + 1j * p.a_phase * np.sin(2 * w_ * t))
    return 0.5 * ic.T0 * pref * erfc_c(np.sqrt(0.5j * t) * kap + cp / np.sqrt(2j * t))


# ------------------------------------------------------- Gaussian packets

def gaussian_free(x, t, ic: GaussianIC):
    """Free evolution of a Gaussian packet (exact)."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    alpha = 1.0 / (4 * ic.sigma**2)
    den = 1.0 + 2j * alpha * t
    y = x - ic.x0 - ic.p0 * t
    out = ic.amplitude / np.sqrt(den) * np.exp(
        -alpha * y**2 / den + 1j * ic.p0 * x - 0.5j * ic.p0**2 * t)
    if ic.odd:
        out = out * y / den
    return out


# ---------------------------------------------------- general L^2 data

def _oscillatory_gl(a: float, b: float, n_osc: float, min_nodes: int = 64, max_nodes: int = 400_000):
    n = int(min(max(min_nodes, 12 * n_osc + min_nodes), max_nodes))
    panels = max(1, n // 32)
    x, w = roots_legendre(32)
    edges = np.linspace(a, b, panels + 1)
    h = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def h_minus_l2(t, f: Callable, support: tuple[float, float], x: float = 0.0):
    """(2 pi i t)^{-1/2} int f(y) exp(i (x-y)^2/(2t)) dy over ``support``
    (a subset of (-inf, 0]), by panel Gauss-Legendre sized to the phase."""
    a, b = support
    if b > 0:
        raise SourceDomainError("support of the left data must lie in (-inf, 0]")
    return _free_integral(np.atleast_1d(np.asarray(t, dtype=float)), f, a, b, x, np.asarray(t).ndim == 0)


def h_plus_l2(t, f: Callable, p: PhysParams, support: tuple[float, float], x: float = 0.0):
    """Driven free evolution of data on [0, inf) evaluated at x >= 0."""
    a, b = support
    if a < 0:
        raise SourceDomainError("support of the right data must lie in [0, inf)")
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(tt.shape, dtype=complex)
    for i, ti in enumerate(tt):
        if ti <= 0:
            raise SourceDomainError("t must be positive")
        w_ = p.omega
        cp = p.a_len * (1.0 - np.cos(w_ * ti))
        pref = np.exp(1j * (x * p.E * np.sin(w_ * ti) / w_ - p.u_tilde * ti + p.a_phase * np.sin(2 * w_ * ti)))
        out[i] = pref * _free_integral(np.array([ti]), f, a, b, x - cp, True)
    return out[0] if np.asarray(t).ndim == 0 else out


def abel_h_minus_l2(t, f: Callable, support: tuple[float, float]):
    """(h-(0,.) * s^{-1/2})(t) for data supported in (-inf, 0].

    The time convolution is done under the y-integral in closed form,
    int_0^t exp(i y^2/2s) / sqrt(2 pi i s (t - s)) ds = sqrt(pi/(2i)) erfc(|y| exp(-i pi/4)/sqrt(2t)),
    leaving one smooth but oscillatory y-quadrature.
    """
    a, b = support
    if b > 0:
        raise SourceDomainError("support of the left data must lie in (-inf, 0]")
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(tt.shape, dtype=complex)
    pref = np.sqrt(np.pi / 2j)
    for i, ti in enumerate(tt):
        if ti < 0:
            raise SourceDomainError("t must be non-negative")
        if ti == 0:
            continue
        span = max(abs(a), abs(b))
        y, w = _oscillatory_gl(a, b, span**2 / (2 * ti) / (2 * np.pi) + 1)
        out[i] = pref * np.sum(w * f(y) * erfc_c(_EM * np.abs(y) / np.sqrt(2 * ti)))
    return out[0] if np.asarray(t).ndim == 0 else out


def abel_closed_form(t, h0: Callable, scale: float = 1.0, tol: float = 1e-14):
    """(h * s^{-1/2})(t) for a smooth closed-form h, all t at once.

    With s = t (1 - v^2) the kernel singularity disappears:
    2 sqrt(t) int_0^1 h(t (1 - v^2)) dv.
    """
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < 0):
        raise SourceDomainError("t must be non-negative")
    val, _ = quad_vec(lambda v: h0(tt * (1.0 - v * v)), 0.0, 1.0, epsabs=tol * scale, epsrel=1e-13, limit=2000)
    out = 2.0 * np.sqrt(tt) * val
    return out[0] if np.asarray(t).ndim == 0 else out


def _free_integral(t, f, a, b, x, scalar):
    out = np.empty(t.shape, dtype=complex)
    for i, ti in enumerate(t):
        if ti <= 0:
            raise SourceDomainError("t must be positive")
        span = max(abs(x - a), abs(x - b))
        n_osc = (span**2) / (2 * ti) / (2 * np.pi) + 1
        y, w = _oscillatory_gl(a, b, n_osc)
        out[i] = np.sum(w * f(y) * np.exp(1j * (x - y) ** 2 / (2 * ti))) / np.sqrt(2j * np.pi * ti)
    return out[0] if scalar else out


# --------------------------------------------------- dispatch per IC kind

@dataclass(frozen=True)
class ICSources:
    """Closed-form or quadrature sources for one initial condition.

    ``carrier`` is the frequency lam such that the boundary values are
    exp(-i lam t) times a slowly varying function.
    """

    carrier: float
    psi0_initial: complex
    psix0_initial: complex
    h_minus: Callable  # (x, t) -> h-(x,t), x <= 0
    h_plus: Callable   # (x, t) -> h+(x,t), x >= 0
    h_minus0: Callable  # t -> h-(0,t), t >= 0
    h_plus0: Callable
    abel_h_minus: Callable | None  # t -> (h-(0,.) * s^{-1/2})(t), None: use the grid rule
    initial: Callable  # x -> f(x)


def ic_sources(ic, p: PhysParams) -> ICSources:
    if isinstance(ic, PlaneWaveIC):
        return ICSources(
            carrier=0.5 * ic.k**2,
            psi0_initial=complex(ic.T0),
            psix0_initial=complex(-ic.kappa * ic.T0),
            h_minus=lambda x, t: h_minus_plane_x(x, t, ic),
            h_plus=lambda x, t: h_plus_plane_x(x, t, p, ic),
            h_minus0=lambda t: h_minus_plane(t, p, ic),
            h_plus0=lambda t: h_plus_plane(t, p, ic),
            abel_h_minus=lambda t: abel_h_minus_plane(t, p, ic),
            initial=ic.value,
        )
    if isinstance(ic, GaussianIC):
        lo, hi = ic.support()
        if ic.leak() > 1e-13:
            raise SourceDomainError("Gaussian packet must sit inside the metal (|f(0)| < 1e-13 of its peak)")
        hi = min(hi, 0.0)
        f0 = complex(ic.value(0.0))

        def hm0(t):
            t = np.asarray(t, dtype=float)
            return np.where(t > 0, gaussian_free(0.0, np.where(t > 0, t, 1.0), ic), f0)

        def abel0(t):
            return abel_closed_form(t, hm0, abs(ic.amplitude))

        return ICSources(
            carrier=0.0,
            psi0_initial=f0,
            psix0_initial=0.0j,
            h_minus=lambda x, t: gaussian_free(x, t, ic),
            h_plus=lambda x, t: np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape, dtype=complex),
            h_minus0=hm0,
            h_plus0=lambda t: np.zeros(np.shape(t), dtype=complex),
            abel_h_minus=abel0,
            initial=ic.value,
        )
    raise SourceDomainError(f"unsupported initial condition {type(ic).__name__}")


# ------------------------------------------------------- composite source

@dataclass(frozen=True)
class SourceTrace:
    """Sources on the uniform grid ``grid``.

    ``abel_h_minus`` holds (h-(0,.) * s^{-1/2}) on the grid, ``carrier`` the
    frequency factored out by the solver.
    """

    grid: np.ndarray
    h_minus: np.ndarray
    h_plus: np.ndarray
    h_total: np.ndarray
    abel_h_minus: np.ndarray
    carrier: float
    psi0_initial: complex
    psix0_initial: complex
    period_steps: int
    ic: object = None

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])


def time_grid(p: PhysParams, periods: int, steps_per_period: int) -> np.ndarray:
    n = periods * steps_per_period
    return np.arange(n + 1) * (p.period / steps_per_period)


def source_trace(grid: np.ndarray, p: PhysParams, ic, steps_per_period: int,
                 with_total: bool = True) -> SourceTrace:
    """Sample the sources; ``with_total`` also forms the composite h(t)."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0 or len(grid) < 2:
        raise SourceDomainError("grid must start at 0 and have at least two points")
    dt = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), dt, rtol=1e-10, atol=1e-13 * abs(grid[-1])):
        raise SourceDomainError("grid must be uniform")
    src = ic_sources(ic, p)
    hm = np.asarray(src.h_minus0(grid), dtype=complex)
    hp = np.asarray(src.h_plus0(grid), dtype=complex)
    lam = src.carrier
    car = np.exp(1j * lam * grid)
    if src.abel_h_minus is not None:
        ab = np.asarray(src.abel_h_minus(grid), dtype=complex)
    else:
        rule = ProductRule(abel_density(lam), dt, len(grid) - 1, None)
        ab = rule.apply(car * hm) / car
    if with_total:
        rule = ProductRule(outer_density(p, lam), dt, len(grid) - 1, steps_per_period)
        corr = rule.apply(car * ab) / car
        total = hp + hm - 2.0 * corr
    else:
        total = hp + hm
    return SourceTrace(grid, hm, hp, total, ab, lam, src.psi0_initial, src.psix0_initial,
                       steps_per_period, ic)


def h_total(grid: np.ndarray, p: PhysParams, ic, steps_per_period: int | None = None) -> SourceTrace:
    """Composite source h = h+ + h- - (1/pi) int (h- * s^{-1/2}) G ds."""
    if steps_per_period is None:
        dt = float(grid[1] - grid[0])
        steps_per_period = int(round(p.period / dt))
        if abs(steps_per_period * dt - p.period) > 1e-9 * p.period:
            raise SourceDomainError("grid step must divide the field period")
    return source_trace(grid, p, ic, steps_per_period, with_total=True)
