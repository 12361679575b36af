"""Phase functions and the Volterra kernels of the boundary equation.

Everything is written in terms of the target time ``t`` and the lag
``tau = t - s`` so that the near-diagonal limit never divides 0 by 0:
cos(wt) - cos(ws) = -2 sin(w(t+s)/2) sin(w tau/2) and the ratio with tau is
taken through ``np.sinc``.  The same helpers accept complex ``tau``, which is
how the Taylor coefficients of the smooth kernels are obtained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma, roots_legendre

from .params import PhysParams

SQRT_2IPI = np.sqrt(2j * np.pi)


class KernelDomainError(ValueError):
    pass


class ToleranceError(ArithmeticError):
    def __init__(self, message: str, estimate) -> None:
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class PhaseEval:
    f0: np.ndarray | float
    df0_ds: np.ndarray | float


@dataclass(frozen=True)
class KernelSplit:
    g1: np.ndarray | complex
    g2: np.ndarray | complex


def _dratio(t, tau, w):
    """(cos wt - cos ws)/tau with s = t - tau."""
    return -w * np.sin(w * (t - 0.5 * tau)) * np.sinc(w * tau / (2 * np.pi))


def phase0(t, tau, p: PhysParams):
    """F0(t - tau, t) and its derivative with respect to s."""
    w, E = p.omega, p.E
    s = t - tau
    dr = _dratio(t, tau, w)
    c = E**2 / (2 * w**4)
    f = -p.u_tilde * tau + 2 * p.a_phase * np.cos(w * (2 * t - tau)) * np.sin(w * tau) + c * dr * dr * tau
    df = p.u_tilde - 2 * w * p.a_phase * np.cos(2 * w * s) + c * (2 * dr * w * np.sin(w * s) + dr * dr)
    return f, df


def expm1i(f):
    """exp(i f) - 1 without cancellation for small f."""
    return 2j * np.sin(0.5 * f) * np.exp(0.5j * f)


def g1_density(t, tau, p: PhysParams):
    """sqrt(tau) * G(t - tau, t): the smooth factor of the kernel G."""
    f, df = phase0(t, tau, p)
    return 1j * df * np.exp(1j * f) + expm1i(f) / (2 * tau)


def g2_density(t, tau, p: PhysParams):
    """g2(t - tau, t), coefficient of (t-s)^{-1/2} in the local part of L."""
    w = p.omega
    s = t - tau
    bracket = np.sin(w * s) - np.sin(w * (t - 0.5 * tau)) * np.sinc(w * tau / (2 * np.pi))
    f, _ = phase0(t, tau, p)
    return p.E / (2 * w * SQRT_2IPI) * bracket * np.exp(1j * f)


def _check_order(s, t, strict: bool):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    bad = (s >= t) if strict else (s > t)
    if np.any(bad) or np.any(s < 0):
        rel = "<" if strict else "<="
        raise KernelDomainError(f"need 0 <= s {rel} t")
    return s, t


def f0(s, t, p: PhysParams) -> PhaseEval:
    """F0(s, t) = F(0, s, t) and d/ds F0."""
    s, t = _check_order(s, t, strict=False)
    f, df = phase0(t, t - s, p)
    return PhaseEval(f, df)


def f_phase(x, s, t, p: PhysParams):
    """Real phase F(x, s, t) of the driven free propagator on x > 0."""
    s, t = _check_order(s, t, strict=True)
    x = np.asarray(x, dtype=float)
    w = p.omega
    tau = t - s
    d = p.a_len * (np.cos(w * t) - np.cos(w * s))
    return (x * p.E * np.sin(w * t) / w - p.u_tilde * tau
            + p.a_phase * (np.sin(2 * w * t) - np.sin(2 * w * s))
            + (x + d) ** 2 / (2 * tau))


def g_kernel(s, t, p: PhysParams):
    """G(s, t) = d/ds[(exp(iF0) - 1)/sqrt(t - s)]."""
    s, t = _check_order(s, t, strict=True)
    tau = t - s
    return g1_density(t, tau, p) / np.sqrt(tau)


_GL32 = roots_legendre(32)


def _g1_quadrature(s, t, p: PhysParams, n: int = 32):
    # u = s + (t-s) sin^2(theta) absorbs both endpoint square roots
    tau = t - s
    x, wts = _GL32 if n == 32 else roots_legendre(n)
    theta = 0.25 * np.pi * (x + 1.0)
    lag = tau[..., None] * np.cos(theta) ** 2  # t - u
    vals = g1_density(t[..., None], np.maximum(lag, 1e-300), p)
    return (0.25 * np.pi) * np.sum(vals * wts, axis=-1) / np.pi


def _g1_taylor_coeffs(t: float, p: PhysParams, n_terms: int = 40, radius: float | None = None):
    """Taylor coefficients c_n of tau -> sqrt(tau) G(t - tau, t)."""
    if radius is None:
        radius = 0.25 * p.period
    m = 2 * n_terms
    z = radius * np.exp(2j * np.pi * np.arange(m) / m)
    vals = g1_density(t, z, p)
    c = np.fft.fft(vals) / m
    return c[:n_terms] / radius ** np.arange(n_terms)


def g1_series(s: float, t: float, p: PhysParams, n_terms: int = 40) -> complex:
    """g1 from the Gamma(n+1/2) series; meant for t - s small."""
    c = _g1_taylor_coeffs(float(t), p, n_terms)
    n = np.arange(n_terms)
    tau = float(t) - float(s)
    fac = gamma(n + 0.5) / (2 * np.sqrt(np.pi) * gamma(n + 1.0))
    return complex(np.sum(c * fac * tau**n))


def kernel_split(s, t, p: PhysParams, rtol: float = 1e-10) -> KernelSplit:
    """Analytic split of L: g1(s,t) + g2(s,t)/sqrt(t-s).

    g1 = (1/2 pi) int_s^t G(u,t)/sqrt(u-s) du by Gauss-Legendre after the
    substitution u = s + (t-s) sin^2(theta); doubled order is used as the
    convergence check.
    """
    s, t = _check_order(s, t, strict=False)
    s, t = np.broadcast_arrays(s, t)
    tau = t - s
    g2 = g2_density(t, tau, p)
    lo = _g1_quadrature(s, t, p, 32)
    hi = _g1_quadrature(s, t, p, 64)
    err = np.abs(hi - lo)
    if np.any(err > rtol * np.maximum(1.0, np.abs(hi))):
        raise ToleranceError("kernel_split: g1 quadrature not converged", hi)
    if hi.ndim == 0:
        return KernelSplit(complex(hi), complex(g2))
    return KernelSplit(hi, g2)


def volkov_phase_smooth(x, t, tau, p: PhysParams):
    """F(x, t - tau, t) - x^2/(2 tau); smooth in tau down to 0."""
    w = p.omega
    dr = p.a_len * _dratio(t, tau, w)  # d / tau
    return (x * p.E * np.sin(w * t) / w - p.u_tilde * tau
            + 2 * p.a_phase * np.cos(w * (2 * t - tau)) * np.sin(w * tau)
            + x * dr + 0.5 * dr * dr * tau)


def volkov_dy(x, t, tau, p: PhysParams):
    """d/dy of the action at y = 0 times tau: -(x + d) - (E/w) sin(ws) tau."""
    w = p.omega
    s = t - tau
    return -(x + p.a_len * _dratio(t, tau, w) * tau) - p.E / w * np.sin(w * s) * tau


# Densities phi(t, tau) for the product rule, in the frame where the
# carrier exp(-i lam t) has been divided out of every grid function.

def abel_density(lam: float):
    def phi(t, tau):
        return np.exp(1j * lam * tau) * np.ones_like(t)
    return phi


def outer_density(p: PhysParams, lam: float):
    """(1/2 pi) exp(i lam tau) sqrt(tau) G(t - tau, t)."""
    def phi(t, tau):
        return np.exp(1j * lam * tau) * g1_density(t, tau, p) / (2 * np.pi)
    return phi


def local_density(p: PhysParams, lam: float):
    """exp(i lam tau) g2(t - tau, t)."""
    def phi(t, tau):
        return np.exp(1j * lam * tau) * g2_density(t, tau, p)
    return phi
