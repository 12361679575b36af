"""Product integration for kernels of the form phi(t, tau)/sqrt(tau).

On the uniform grid t_n = n dt the rule approximates

    I_n = int_0^{t_n} phi(t_n, t_n - s) / sqrt(t_n - s) y(s) ds = sum_j W[n, j] y_j

by interpolating ``y`` on each interval with six neighbouring nodes and
integrating the interpolant against the exact kernel.  Moments are computed
with Gauss-Legendre in v = sqrt(tau), which removes the square-root
singularity.  Away from s = 0 the interpolant is the quintic Lagrange
polynomial; on the first ``n_start`` intervals it is a six-node combination
of s^{j/2}, j = 0..5, matching the half-integer expansions that Abel
convolutions produce near the origin.

When ``phi`` is periodic in ``t`` with ``period_steps`` grid steps (or does
not depend on ``t`` at all) the weights W[n, n - m] depend only on
(n mod period_steps, m) except near s = 0.  They are tabulated once; the few
weights touching the start are corrected per target time.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
from scipy.special import roots_legendre

Density = Callable[[np.ndarray, np.ndarray], np.ndarray]

_START_POW = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
_QS = len(_START_POW)
_Q = 6
_CENTERED = np.arange(-2.0, 4.0)
# stencils for the last two intervals, which cannot look past node n
_END0 = np.arange(-4.0, 2.0)
_END1 = np.arange(-3.0, 3.0)


def _gl(n: int):
    x, w = roots_legendre(n)
    return x, w


def _vinv(offsets: np.ndarray) -> np.ndarray:
    """Matrix turning monomial moments into Lagrange node weights."""
    V = offsets[:, None] ** np.arange(len(offsets))[None, :]
    return np.linalg.inv(V)


_VINV_C = _vinv(_CENTERED)
_VINV_E0 = _vinv(_END0)
_VINV_E1 = _vinv(_END1)


class ProductRule:
    """Tabulated product-integration weights.

    Parameters
    ----------
    density
        ``phi(t, tau)``, vectorised, complex.
    dt
        Grid step.
    n_max
        Largest target index.
    period_steps
        Number of steps per period of ``phi`` in ``t``; ``None`` when ``phi``
        does not depend on ``t`` (Toeplitz weights).
    """

    def __init__(self, density: Density, dt: float, n_max: int, period_steps: int | None = None,
                 n_start: int = 32, ng: int = 8, ng_start: int = 16, tabulate: bool = True,
                 corrections: bool = True) -> None:
        self.density = density
        self.dt = float(dt)
        self.n_max = int(n_max)
        self.toeplitz = period_steps is None
        self.P = 1 if period_steps is None else int(period_steps)
        self.n_start = int(n_start)
        self.n_direct = self.n_start + 6
        self._xg, self._wg = _gl(ng)
        self._xs, self._ws = _gl(ng_start)
        self.table = self._build_table(range(min(self.P, self.n_max + 1))) if tabulate else None
        self._small = [self.direct_weights(n) for n in range(min(self.n_direct, self.n_max + 1))]
        self._corr = self._build_corrections() if corrections else None

    # -------------------------------------------------------------- helpers
    def _phase_time(self, n):
        if self.toeplitz:
            return np.zeros_like(np.asarray(n, dtype=float))
        return (np.asarray(n) % self.P) * self.dt

    def _mono_moments(self, t, m):
        """Moments of theta^k (k < 6) over the interval at lag m; theta is
        the position inside the interval measured from its left end."""
        t = np.asarray(t, dtype=float)[..., None]
        m = np.asarray(m, dtype=float)[..., None]
        dt = self.dt
        vlo, vhi = np.sqrt(m * dt), np.sqrt((m + 1) * dt)
        half = 0.5 * (vhi - vlo)
        v = vlo + half * (self._xg + 1.0)
        theta = (vhi - v) * (vhi + v) / dt
        val = 2.0 * half * self._wg * self.density(t, v * v)
        th = theta[..., None] ** np.arange(_Q)
        return np.einsum("...g,...gk->...k", val, th)

    def _start_moments(self, t, n, i):
        """Moments of (s/dt)^{j/2}, j < 6, over interval i for target n."""
        t = np.asarray(t, dtype=float)[..., None]
        n = np.asarray(n, dtype=float)[..., None]
        i = np.asarray(i, dtype=float)[..., None]
        dt = self.dt
        if np.all(i == 0):
            # s = dt sin^2(a) smooths both sqrt(s) and, when n = 1, 1/sqrt(t - s)
            a = 0.25 * np.pi * (self._xs + 1.0)
            u = np.sin(a) ** 2
            tau = (n - u) * dt
            jac = 0.25 * np.pi * self._ws * dt * np.sin(2 * a)
            val = jac * self.density(t, tau) / np.sqrt(tau)
        else:
            # u^{j/2} is analytic on [i, i + 1] for i >= 1: the short rule suffices
            m = n - 1 - i
            vlo, vhi = np.sqrt(m * dt), np.sqrt((m + 1) * dt)
            half = 0.5 * (vhi - vlo)
            v = vlo + half * (self._xg + 1.0)
            u = i + (vhi - v) * (vhi + v) / dt
            val = 2.0 * half * self._wg * self.density(t, v * v)
        basis = u[..., None] ** _START_POW
        return np.einsum("...g,...gk->...k", val, basis)

    # ------------------------------------------------------------ weights
    def direct_weights(self, n: int) -> np.ndarray:
        """Weights for target ``n`` computed interval by interval (no table)."""
        w = np.zeros(n + 1, dtype=complex)
        if n == 0:
            return w
        q = min(_Q, n + 1)
        t = self._phase_time(n)
        qs = min(_QS, n + 1)
        for i in range(n):
            if i < self.n_start:
                s0 = min(max(i - 2, 0), n + 1 - qs)
                nodes = np.arange(s0, s0 + qs)
                mu = self._start_moments(t, n, i)[:qs]
                V = nodes[:, None].astype(float) ** _START_POW[None, :qs]
            else:
                s0 = min(max(i - 2, 0), n + 1 - q)
                nodes = np.arange(s0, s0 + q)
                mu = self._mono_moments(t, n - 1 - i)[:q]
                V = (nodes - i)[:, None].astype(float) ** np.arange(q)[None, :]
            w[nodes] += np.linalg.solve(V.T, mu)
        return w

    def _table_rows(self, phases, lag_chunk: int = 1024) -> np.ndarray:
        phases = np.asarray(list(phases))
        L = self.n_max + 1
        W = np.zeros((len(phases), L + 8), dtype=complex)
        t = phases * self.dt if not self.toeplitz else np.zeros(len(phases))
        # a node at offset o from the interval's left end sits at lag m + 1 - o
        for m, vinv, offs in ((0, _VINV_E0, _END0), (1, _VINV_E1, _END1)):
            w = self._mono_moments(t, np.full(len(phases), m)) @ vinv
            for col, o in enumerate(offs):
                W[:, m + 1 - int(o)] += w[:, col]
        for m0 in range(2, L + 3, lag_chunk):
            m1 = min(m0 + lag_chunk, L + 3)
            mm = np.arange(m0, m1)
            mu = self._mono_moments(t[:, None], mm[None, :])
            w = mu @ _VINV_C
            for col, o in enumerate(_CENTERED):
                sh = 1 - int(o)
                W[:, m0 + sh:m1 + sh] += w[:, :, col]
        return W[:, :L]

    def _build_table(self, phases) -> np.ndarray:
        return self._table_rows(phases)

    def _build_corrections(self, n=None):
        if n is None:
            n = np.arange(self.n_direct, self.n_max + 1)
        ns = self.n_start
        # intervals 0 and 1 have centered stencils reaching below node 0,
        # so they are redone even without a start basis
        nfix = max(ns, 2)
        ncorr = nfix + 4
        corr = np.zeros((len(n), ncorr), dtype=complex)
        if len(n) == 0:
            return corr
        t = self._phase_time(n)
        # remove table contributions of intervals -3 .. nfix-1 (centered stencils)
        for i in range(-3, nfix):
            mu = self._mono_moments(t, n - 1 - i)
            w = mu @ _VINV_C
            for col, off in enumerate(_CENTERED):
                j = i + int(off)
                if 0 <= j < ncorr:
                    corr[:, j] -= w[:, col]
        # add the true contributions: start basis, or a shifted polynomial stencil
        for i in range(nfix):
            s0 = max(i - 2, 0)
            nodes = np.arange(s0, s0 + _QS)
            if i < ns:
                mu = self._start_moments(t, n, np.full(len(n), i))
                V = nodes[:, None].astype(float) ** _START_POW[None, :]
            else:
                mu = self._mono_moments(t, n - 1 - i)
                V = (nodes - i)[:, None].astype(float) ** np.arange(_Q)[None, :]
            w = np.linalg.solve(V.T, mu.T).T
            corr[:, s0:s0 + _QS] += w
        return corr

    def weights(self, n: int, row: np.ndarray | None = None) -> np.ndarray:
        """Full weight vector (node 0..n) for target ``n``."""
        if n < self.n_direct:
            return self._small[n].copy()
        if row is None:
            row = self.table[n % self.P]
        w = row[n::-1].copy()
        c = self._corr[n - self.n_direct]
        w[:len(c)] += c
        return w

    def diag(self, n: int) -> complex:
        """Weight multiplying y_n in I_n."""
        if n < self.n_direct:
            return self._small[n][n]
        return self.table[n % self.P, 0]

    def history(self, n: int, y: np.ndarray) -> complex:
        """I_n without the y_n term; y needs entries 0..n-1."""
        if n < self.n_direct:
            return complex(np.dot(self._small[n][:n], y[:n]))
        row = self.table[n % self.P]
        acc = np.dot(row[1:n + 1], y[n - 1::-1])
        c = self._corr[n - self.n_direct]
        return complex(acc + np.dot(c, y[:len(c)]))

    def apply_targets(self, y: np.ndarray, targets) -> np.ndarray:
        """I_n at the given target indices, building table rows only for the
        phases that occur; works without a stored table."""
        y = np.asarray(y)
        targets = np.asarray(targets, dtype=int)
        out = np.zeros(len(targets), dtype=complex)
        small = targets < self.n_direct
        for k in np.nonzero(small)[0]:
            n = int(targets[k])
            w = self._small[n] if n < len(self._small) else self.direct_weights(n)
            # len(w) may exceed n + 1 for rules that interpolate with later nodes
            out[k] = np.dot(w, y[:len(w)])
        big = np.nonzero(~small)[0]
        if len(big) == 0:
            return out
        corr = self._build_corrections(targets[big])
        phases = targets[big] % self.P
        for ph in np.unique(phases):
            row = self.table[ph] if self.table is not None else self._table_rows([ph])[0]
            sel = np.nonzero(phases == ph)[0]
            for j in sel:
                n = int(targets[big[j]])
                c = corr[j]
                out[big[j]] = np.dot(row[:n + 1], y[n::-1]) + np.dot(c, y[:len(c)])
        return out

    def apply(self, y: np.ndarray) -> np.ndarray:
        """I_n for all n = 0..len(y)-1."""
        y = np.asarray(y)
        out = np.zeros(len(y), dtype=complex)
        for n in range(1, len(y)):
            out[n] = self.history(n, y) + self.diag(n) * y[n]
        return out


def apply_streaming(density: Density, dt: float, y: np.ndarray, period_steps: int | None,
                    **kw) -> np.ndarray:
    """Same as ``ProductRule(...).apply(y)`` but builds one table row at a
    time, so memory stays O(len(y)) for long fine grids."""
    y = np.asarray(y)
    n_max = len(y) - 1
    rule = ProductRule(density, dt, n_max, period_steps, tabulate=False, **kw)
    out = np.zeros(len(y), dtype=complex)
    for n in range(1, min(rule.n_direct, n_max + 1)):
        out[n] = np.dot(rule._small[n], y[:n + 1])
    for p in range(rule.P):
        targets = [n for n in range(max(rule.n_direct, 1), n_max + 1) if n % rule.P == p]
        if not targets:
            continue
        row = rule._table_rows([p])[0]
        for n in targets:
            c = rule._corr[n - rule.n_direct]
            out[n] = np.dot(row[:n + 1], y[n::-1]) + np.dot(c, y[:len(c)])
    return out


def apply_at(density: Density, dt: float, y: np.ndarray, period_steps: int | None,
             targets, **kw) -> np.ndarray:
    """I_n for the target indices ``targets`` only.  Table rows are built for
    the phases that occur among the targets, so checking a sample of target
    times is much cheaper than a full ``apply``."""
    rule = ProductRule(density, dt, len(y) - 1, period_steps, tabulate=False, corrections=False, **kw)
    return rule.apply_targets(y, targets)
