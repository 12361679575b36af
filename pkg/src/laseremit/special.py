"""Complex error function (through the Faddeeva function) and the Lerch
transcendent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sp


@dataclass(frozen=True)
class ScaledComplex:
    """The number ``mantissa * exp(log_scale)``, used where the plain value
    would overflow a double."""

    mantissa: complex | np.ndarray
    log_scale: float | np.ndarray

    def value(self):
        with np.errstate(over="ignore", invalid="ignore"):
            return self.mantissa * np.exp(self.log_scale)


class SpecialOverflowError(OverflowError):
    """The result does not fit a double; ``scaled`` holds it in scaled form."""

    def __init__(self, message: str, scaled: ScaledComplex) -> None:
        super().__init__(message)
        self.scaled = scaled


class LerchDomainError(ValueError):
    pass


def faddeeva(z):
    """w(z) = exp(-z^2) erfc(-iz).

    Raises :class:`SpecialOverflowError` (carrying the scaled form) when the
    result overflows, which can only happen for Im z < 0.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("faddeeva: non-finite argument")
    with np.errstate(over="ignore", invalid="ignore"):
        w = sp.wofz(z)
    if np.all(np.isfinite(w)):
        return w[()] if w.ndim == 0 else w
    raise SpecialOverflowError("faddeeva: result overflows", faddeeva_scaled(z))


def faddeeva_scaled(z) -> ScaledComplex:
    """w(z) as mantissa * exp(log_scale); log_scale = 0 when Im z >= 0."""
    z = np.asarray(z, dtype=complex)
    lower = z.imag < 0
    log_scale = np.where(lower, np.real(-(z**2)), 0.0)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        direct = sp.wofz(np.where(lower, 0.0, z))
        # reflection w(z) = 2 exp(-z^2) - w(-z) in the lower half plane
        refl = 2.0 * np.exp(1j * np.imag(-(z**2))) - sp.wofz(np.where(lower, -z, 0.0)) * np.exp(-log_scale)
    mant = np.where(lower, refl, direct)
    if mant.ndim == 0:
        return ScaledComplex(complex(mant), float(log_scale))
    return ScaledComplex(mant, log_scale)


def erfc_c(z):
    """Complementary error function of a complex argument.

    Uses erfc(z) = exp(-z^2) w(iz) for Re z >= 0 and erfc(z) = 2 - erfc(-z)
    otherwise, so the Faddeeva call is always in the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("erfc_c: non-finite argument")
    neg = z.real < 0
    zz = np.where(neg, -z, z)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        e = np.exp(-(zz**2)) * sp.wofz(1j * zz)
    # exp(-z^2) underflows far out while w(iz) is tiny, giving 0*w -> 0: fine
    e = np.where(np.isnan(e) & np.isfinite(zz), 0.0, e)
    out = np.where(neg, 2.0 - e, e)
    if not np.all(np.isfinite(out)):
        log_scale = np.real(-(zz**2))
        with np.errstate(over="ignore", invalid="ignore"):
            mant = np.exp(1j * np.imag(-(zz**2))) * sp.wofz(1j * zz)
            mant = np.where(neg, 2.0 * np.exp(-log_scale) - mant, mant)
        raise SpecialOverflowError(
            "erfc_c: result overflows",
            ScaledComplex(mant[()] if mant.ndim == 0 else mant, log_scale[()] if np.ndim(log_scale) == 0 else log_scale),
        )
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------- Lerch Phi

def _lerch_series(z: complex, s: float, a: float) -> complex:
    if z == 0:
        return a ** (-s)
    az = abs(z)
    n_max = int(math.ceil(math.log(1e-18) / math.log(az))) + 8
    n = np.arange(n_max)
    terms = z**n / (n + a) ** s
    return complex(np.sum(terms[::-1]))


def _exp_sinh_nodes(h: float, tlo: float, thi: float):
    t = np.arange(-tlo, thi + 0.5 * h, h)
    p = np.exp(0.5 * np.pi * np.sinh(t))
    dp = p * 0.5 * np.pi * np.cosh(t) * h
    return p, dp


def _lerch_integral(z: complex, s: float, a: float) -> complex:
    # Phi = Gamma(s)^{-1} int_0^inf p^{s-1} e^{-ap} / (1 - z e^{-p}) dp.
    # Integrand written through -expm1 so z near 1 keeps accuracy near p = 0.
    # truncation: p^s < 1e-17 at the small end, e^{-ap} < 1e-17 at the large end
    tlo = math.asinh(2.0 / math.pi * 40.0 / s) + 0.25
    thi = math.asinh(2.0 / math.pi * math.log(40.0 / a + 40.0)) + 0.25
    prev = None
    for level in range(7):
        h = 0.5 / 2**level
        p, dp = _exp_sinh_nodes(h, tlo, thi)
        with np.errstate(under="ignore", over="ignore"):
            den = (1.0 - z) + z * (-np.expm1(-p))
            f = np.exp((s - 1.0) * np.log(p) - a * p) / den
        f = np.where(np.isfinite(f), f, 0.0)
        val = complex(np.sum(f * dp))
        if prev is not None and abs(val - prev) <= 1e-13 * max(1.0, abs(val)):
            return val / math.gamma(s)
        prev = val
    return prev / math.gamma(s)


def lerch_phi(z: complex, s: float, a: float) -> complex:
    """Lerch transcendent Phi(z, s, a) = sum_{n>=0} z^n/(n+a)^s.

    Direct summation for |z| <= 1/2, otherwise the Laplace-type integral
    representation (requires s > 0) on an exp-sinh grid.
    """
    z = complex(z)
    if not a > 0:
        raise LerchDomainError(f"a must be positive, got {a}")
    if z.imag == 0 and z.real >= 1:
        raise LerchDomainError(f"z = {z} lies on the cut [1, inf)")
    if abs(z) <= 0.5:
        return _lerch_series(z, s, a)
    if not s > 0:
        raise LerchDomainError("integral representation needs s > 0")
    return _lerch_integral(z, s, a)


def lerch_partial_sum(z: complex, b: float, a: float, k: int) -> complex:
    """sum_{l=1}^{k-1} z^l/(a+l)^b expressed through two Lerch values."""
    return z * lerch_phi(z, b, a + 1) - z**k * lerch_phi(z, b, a + k)
