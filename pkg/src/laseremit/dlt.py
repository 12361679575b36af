"""Generating function of period-sampled sequences and singularity probing.

For samples f_k(tau) = f(tau + k T) the transform is

    P_z f (tau) = sum_{k >= 0} z^k f_k(tau).

A frequency sigma corresponds to z = exp(i sigma T): a component
exp(-i sigma t) of f gives a pole at z = exp(+i sigma T).  No 1/omega
prefactor is applied.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import pade
from scipy.linalg import LinAlgWarning

PADE_M = 4
PADE_N = 4
PROBE_RADII = (0.9, 0.95, 0.98)


class DltDomainError(ValueError):
    """The power sum diverges (or is too slowly convergent) at the radius."""


class DltAccuracyError(ValueError):
    """Too few contour points for the requested coefficients."""


@dataclass(frozen=True)
class DltSeries:
    tau_grid: np.ndarray
    samples: np.ndarray  # (K, n_tau)
    r: float
    z: np.ndarray  # (J,)
    values: np.ndarray  # (J, n_tau)
    growth: float
    tail_bound: float

    @property
    def J(self) -> int:
        return len(self.z)

    @property
    def K(self) -> int:
        return self.samples.shape[0]


def _as_matrix(samples) -> tuple[np.ndarray, bool]:
    a = np.asarray(samples, dtype=complex)
    if a.ndim == 1:
        return a[:, None], True
    if a.ndim != 2:
        raise ValueError("samples must be 1-D (k) or 2-D (k, tau)")
    return a, False


def growth_rate(samples) -> float:
    """Geometric growth factor of sup_tau |f_k| estimated from the tail."""
    a, _ = _as_matrix(samples)
    m = np.abs(a).max(axis=1)
    K = len(m)
    if K < 4:
        return 1.0
    h = K // 2
    lo, hi = m[h // 2:h].mean(), m[h + h // 2:].mean()
    span = (h + h // 2 + K - 1) / 2.0 - (h // 2 + h - 1) / 2.0
    if lo == 0:
        return 0.0 if hi == 0 else np.inf
    return float((hi / lo) ** (1.0 / span))


def period_samples(values, period_steps: int, tau_index=None) -> tuple[np.ndarray, np.ndarray]:
    """Reshape a uniformly sampled signal into (k, tau) rows; returns the
    matrix and the tau indices used."""
    v = np.asarray(values)
    K = (len(v) - 1) // period_steps + 1
    if tau_index is None:
        tau_index = np.arange(period_steps)
    tau_index = np.asarray(tau_index)
    rows = [v[k * period_steps + tau_index[tau_index + k * period_steps < len(v)]] for k in range(K)]
    K = sum(len(r) == len(tau_index) for r in rows)
    return np.array(rows[:K]), tau_index


def dlt(samples, r: float, J: int, tau_grid=None) -> DltSeries:
    """Truncated power sum on the circle |z| = r at J equispaced points."""
    a, _ = _as_matrix(samples)
    K = a.shape[0]
    if not 0 < r < 1:
        raise DltDomainError(f"radius must lie in (0, 1), got {r}")
    if J < 1:
        raise ValueError("J must be positive")
    g = growth_rate(a)
    if g * r >= 1:
        raise DltDomainError(f"samples grow like {g:.4g}^k; the sum diverges at r = {r}")
    w = a * (r ** np.arange(K))[:, None]
    if J >= K:
        vals = np.fft.ifft(w, n=J, axis=0) * J
    else:
        folded = np.zeros((J, a.shape[1]), dtype=complex)
        np.add.at(folded, np.arange(K) % J, w)
        vals = np.fft.ifft(folded, axis=0) * J
    z = r * np.exp(2j * np.pi * np.arange(J) / J)
    last = np.abs(a[-1]).max()
    rg = r * max(g, 1e-300)
    tail = float(last * rg * r ** (K - 1) / (1 - rg)) if K else 0.0
    tau = np.arange(a.shape[1]) if tau_grid is None else np.asarray(tau_grid)
    return DltSeries(tau, a, float(r), z, vals, g, tail)


def dlt_inverse(series: DltSeries, k) -> np.ndarray:
    """Recover f_k(tau) from the contour values (discrete Cauchy formula)."""
    J = series.J
    k = np.asarray(k)
    if np.any(k < 0):
        raise ValueError("coefficient index must be non-negative")
    if series.K > J:
        raise DltAccuracyError(f"J = {J} contour points alias {series.K} coefficients")
    c = np.fft.fft(series.values, axis=0) / J
    return c[k % J] * (series.r ** -k.astype(float))[..., None] if k.ndim else c[int(k)] / series.r ** int(k)


# ------------------------------------------------------------------ probing
@dataclass(frozen=True)
class Candidate:
    arg: float
    sigma: float
    modulus: float
    strength: float
    slope: float
    kind: str  # "pole", "branch", "regular" or "indeterminate"


@dataclass(frozen=True)
class ProbeReport:
    poles: tuple[Candidate, ...]
    candidates: tuple[Candidate, ...]
    branch: dict = field(default_factory=dict)
    indeterminate: bool = False


def classify_slope(slope: float, fit_err: float = 0.0) -> str:
    """Growth ~ (1 - r)^slope: -1 pole, -1/2 branch, 0 regular."""
    if not np.isfinite(slope) or fit_err > 0.15:
        return "indeterminate"
    if slope <= -0.85:
        return "pole"
    if -0.75 <= slope <= -0.3:
        return "branch"
    if slope >= -0.2:
        return "regular"
    return "indeterminate"


def _ray_slope(fun, theta: float, radii) -> tuple[float, float]:
    radii = np.asarray(radii, dtype=float)
    v = np.abs(fun(radii * np.exp(1j * theta)))
    if np.any(v == 0) or not np.all(np.isfinite(v)):
        return float("nan"), np.inf
    X, Y = np.log(1 - radii), np.log(v)
    c = np.polyfit(X, Y, 1)
    err = float(np.max(np.abs(np.polyval(c, X) - Y))) if len(radii) > 2 else 0.0
    return float(c[0]), err


def _pade_fit(coefs: np.ndarray):
    scale = np.abs(coefs).max()
    if scale == 0:
        return None
    try:
        with warnings.catch_warnings():
            # exactly geometric data make the (4,4) system singular; the
            # least-squares fallback inside pade still returns the pole
            warnings.simplefilter("ignore", LinAlgWarning)
            p, q = pade(coefs / scale, PADE_N, PADE_M)
    except (np.linalg.LinAlgError, ValueError):
        return None
    return p, q, scale


def _window_poles(f: np.ndarray, k0: int):
    fit = _pade_fit(f[k0:k0 + PADE_M + PADE_N + 1])
    if fit is None:
        return None, np.array([])
    return fit, np.roots(fit[1].coeffs)


def _nearest(roots: np.ndarray, z0: complex) -> complex | None:
    if len(roots) == 0:
        return None
    return complex(roots[np.argmin(np.abs(roots - z0))])


def singularity_probe(samples, period: float, radii=PROBE_RADII, branch_sigmas=(), unit_tol: float = 2e-3,
                      tau_rows=None) -> ProbeReport:
    """Look for poles of the generating function on |z| = 1.

    Each tau row is fitted by (4,4) Pade approximants on three windows of 9
    consecutive coefficients, the last one ending at the final sample (a
    shifted sequence has the same singularities).  A pole of the last window
    within ``unit_tol`` of the unit circle is a candidate.  It is pole-like
    when the earlier windows reproduce it (within ``unit_tol``) and the
    approximant grows like (1 - r)^-1 along its ray over ``radii``.  A
    candidate that creeps towards the circle as the window moves out is
    branch-like: coefficients that decay like a power of k look locally
    geometric with a ratio tending to 1.  ``branch_sigmas`` are frequencies
    whose rays are always reported.
    """
    radii = tuple(radii)
    if len(radii) < 3:
        raise ValueError("at least three radii are needed")
    a, _ = _as_matrix(samples)
    K = a.shape[0]
    need = PADE_M + PADE_N + 1
    if K < need + 4:
        raise ValueError(f"need at least {need + 4} samples per tau, got {K}")
    shift = max((K - need) // 4, 2)
    starts = (K - need - 2 * shift, K - need - shift, K - need)
    rows = range(a.shape[1]) if tau_rows is None else tau_rows
    cands: list[Candidate] = []
    near: list[tuple[float, float, bool]] = []  # (theta, modulus, creeping) of all near-circle roots
    for j in rows:
        f = a[:, j]
        norm = np.abs(f[starts[-1]:]).max()
        if norm == 0:
            continue
        wins = [_window_poles(f, k0) for k0 in starts]
        fit, roots = wins[-1]
        if fit is None:
            continue
        p, q, scale = fit
        for z0 in roots:
            d = abs(z0) - 1
            if abs(d) > 0.05:
                continue
            theta = float(np.angle(z0) % (2 * np.pi))
            earlier = [_nearest(r, z0) for _, r in wins[:-1]]
            mods = [abs(z) - 1 if z is not None else np.inf for z in earlier] + [d]
            stable = abs(d) <= unit_tol and all(z is not None and abs(z - z0) <= unit_tol for z in earlier)
            creeping = all(np.isfinite(mods)) and mods[0] > mods[1] > mods[2] > 0
            near.append((theta, float(abs(z0)), creeping))
            if abs(d) > unit_tol and not creeping:
                continue
            slope, err = _ray_slope(lambda z: scale * p(z) / q(z), theta, radii)
            res = scale * p(z0) / np.polyder(q)(z0)
            if stable:
                kind = "pole" if classify_slope(slope, err) == "pole" else "indeterminate"
            elif creeping:
                kind = "branch"
            else:
                kind = "indeterminate"
            cands.append(Candidate(theta, theta / period, float(abs(z0)), float(abs(res) / norm), slope, kind))
    poles = _merge([c for c in cands if c.kind == "pole"])
    branch = {}
    for s in branch_sigmas:
        theta = (s * period) % (2 * np.pi)
        hits = [c for c in near if _angle_gap(c[0], theta) < 0.05]
        on = [c for c in cands if _angle_gap(c.arg, theta) < 0.05]
        if any(c.kind == "pole" for c in on):
            kind = "pole"
        elif any(h[2] for h in hits):
            kind = "branch"
        else:
            kind = "regular"
        branch[float(s)] = kind
    indet = any(c.kind == "indeterminate" for c in cands)
    return ProbeReport(poles, tuple(cands), branch, indet)


def _angle_gap(a: float, b: float) -> float:
    return abs((a - b + np.pi) % (2 * np.pi) - np.pi)


def _merge(cands: list[Candidate], tol: float = 1e-3) -> tuple[Candidate, ...]:
    """One entry per distinct argument (the strongest)."""
    out: list[Candidate] = []
    for c in sorted(cands, key=lambda c: -c.strength):
        if all(_angle_gap(c.arg, o.arg) > tol for o in out):
            out.append(c)
    return tuple(sorted(out, key=lambda c: c.arg))
