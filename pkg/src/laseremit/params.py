"""Physical parameters, unit conversion and run configuration.

All internal quantities are in atomic units (hbar = m = e = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HARTREE_EV = 27.211386
FIELD_AU_VNM = 514.2207

DEFAULT_U_EV = 10.2
DEFAULT_FERMI_EV = 5.5


class InvalidParameterError(ValueError):
    """Raised for physically meaningless parameter values."""


class UnsupportedRegimeError(ValueError):
    """Raised when the incoming energy is above the step (k^2 >= 2U)."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class PhysParams:
    """Step height ``U``, field amplitude ``E``, frequency ``omega`` and
    incoming momentum ``k``, all in atomic units."""

    U: float
    E: float
    omega: float
    k: float

    def __post_init__(self) -> None:
        for name in ("U", "E", "omega", "k"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidParameterError(f"{name} must be finite, got {v}")
        if self.U <= 0:
            raise InvalidParameterError(f"U must be positive, got {self.U}")
        if self.omega <= 0:
            raise InvalidParameterError(f"omega must be positive, got {self.omega}")
        if self.k <= 0:
            raise InvalidParameterError(f"k must be positive, got {self.k}")
        if self.E < 0:
            raise InvalidParameterError(f"E must be non-negative, got {self.E}")

    @property
    def pondero(self) -> float:
        return self.E**2 / (4.0 * self.omega**2)

    @property
    def u_tilde(self) -> float:
        return self.U + self.pondero

    @property
    def a_len(self) -> float:
        """Quiver amplitude E/omega^2."""
        return self.E / self.omega**2

    @property
    def a_phase(self) -> float:
        """Phase amplitude E^2/(8 omega^3)."""
        return self.E**2 / (8.0 * self.omega**3)

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def energy(self) -> float:
        """Kinetic energy k^2/2 of the incoming wave."""
        return 0.5 * self.k**2

    @property
    def bound(self) -> bool:
        return self.k**2 < 2.0 * self.U

    @property
    def kappa(self) -> float:
        """Decay constant sqrt(2U - k^2) of the static transmitted wave."""
        if not self.bound:
            raise UnsupportedRegimeError("k^2 >= 2U: no evanescent transmission")
        return math.sqrt(2.0 * self.U - self.k**2)

    def with_omega(self, omega: float) -> PhysParams:
        return PhysParams(self.U, self.E, omega, self.k)

    def with_field(self, E: float) -> PhysParams:
        return PhysParams(self.U, E, self.omega, self.k)

    def to_lab(self) -> dict[str, float]:
        return {
            "U_eV": self.U * HARTREE_EV,
            "E_Vnm": self.E * FIELD_AU_VNM,
            "omega_eV": self.omega * HARTREE_EV,
            "k_au": self.k,
        }


def to_atomic(u_eV: float, e_Vnm: float, omega_eV: float, k_au: float) -> PhysParams:
    """Convert lab units (eV, V/nm) to :class:`PhysParams`."""
    for name, v in (("U_eV", u_eV), ("E_Vnm", e_Vnm), ("omega_eV", omega_eV), ("k_au", k_au)):
        if not math.isfinite(v):
            raise InvalidParameterError(f"{name} must be finite, got {v}")
    return PhysParams(
        U=u_eV / HARTREE_EV,
        E=e_Vnm / FIELD_AU_VNM,
        omega=omega_eV / HARTREE_EV,
        k=k_au,
    )


def default_k() -> float:
    """Fermi momentum for the default metal, sqrt(2 E_F)."""
    return math.sqrt(2.0 * DEFAULT_FERMI_EV / HARTREE_EV)


@dataclass(frozen=True)
class PlaneWaveIC:
    """Static scattering state e^{ikx} + R0 e^{-ikx} (x<0), T0 e^{-kappa x} (x>0)."""

    R0: complex
    T0: complex
    k: float
    kappa: float

    def value(self, x):
        x = np.asarray(x, dtype=float)
        left = np.exp(1j * self.k * x) + self.R0 * np.exp(-1j * self.k * x)
        right = self.T0 * np.exp(-self.kappa * np.maximum(x, 0.0))
        return np.where(x < 0, left, right)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        left = 1j * self.k * (np.exp(1j * self.k * x) - self.R0 * np.exp(-1j * self.k * x))
        right = -self.kappa * self.T0 * np.exp(-self.kappa * np.maximum(x, 0.0))
        return np.where(x < 0, left, right)


def plane_wave_ic(params: PhysParams) -> PlaneWaveIC:
    if not params.bound:
        raise UnsupportedRegimeError(
            f"k^2 = {params.k**2:.6g} >= 2U = {2 * params.U:.6g}; only sub-barrier incidence is supported"
        )
    k, kap = params.k, params.kappa
    den = 1j * k - kap
    return PlaneWaveIC(R0=(1j * k + kap) / den, T0=2j * k / den, k=k, kappa=kap)


@dataclass(frozen=True)
class GaussianIC:
    """Gaussian packet c (x - x0)^n exp(-(x-x0)^2/(4 sigma^2) + i p0 x), n in {0, 1}.

    With ``x0`` several widths inside the metal the packet is compactly
    supported to double precision.  ``odd=True`` selects n = 1, a packet with
    zero mean.
    """

    x0: float = -12.0
    sigma: float = 1.0
    p0: float = 0.0
    odd: bool = True
    amplitude: float = 1.0

    def value(self, x):
        y = np.asarray(x, dtype=float) - self.x0
        g = self.amplitude * np.exp(-(y**2) / (4 * self.sigma**2) + 1j * self.p0 * np.asarray(x, dtype=float))
        return y * g if self.odd else g

    def support(self, nsig: float = 14.0) -> tuple[float, float]:
        """Interval outside which the packet is below ~1e-20 of its peak."""
        return (self.x0 - nsig * self.sigma, self.x0 + nsig * self.sigma)

    def leak(self) -> float:
        """Size of the packet at x = 0 relative to its peak."""
        return float(abs(self.value(0.0)) / abs(self.value(self.x0 + (2 * self.sigma if self.odd else 0.0))))

    def describe(self) -> str:
        return (
            f"gaussian(x0={self.x0!r},sigma={self.sigma!r},p0={self.p0!r},"
            f"odd={int(self.odd)},amplitude={self.amplitude!r})"
        )


@dataclass(frozen=True)
class RunConfig:
    params: PhysParams
    ic_kind: str = "plane_wave"
    ic_desc: str = ""
    t_periods: int = 20
    steps_per_period: int = 256
    x_grid: tuple[float, ...] = (-2.0, -1.0, 0.0, 1.0, 2.0)
    tol_resid: float = 1e-5
    out_dir: Path = Path("out")
    defaults_used: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.steps_per_period < 16:
            raise ConfigError("steps_per_period", f"must be >= 16, got {self.steps_per_period}")
        if self.t_periods <= 0:
            raise ConfigError("t_periods", f"must be a positive integer, got {self.t_periods}")
        if not self.tol_resid > 0:
            raise ConfigError("tol_resid", f"must be positive, got {self.tol_resid}")
        if self.ic_kind not in ("plane_wave", "gaussian"):
            raise ConfigError("ic", f"unknown initial condition {self.ic_kind!r}")

    @property
    def t_max(self) -> float:
        return self.t_periods * self.params.period

    def initial_condition(self):
        if self.ic_kind == "plane_wave":
            return plane_wave_ic(self.params)
        return parse_gaussian(self.ic_desc)


_KEYS = ("U_eV", "E_Vnm", "omega_eV", "k_au", "ic", "t_periods", "steps_per_period",
         "x_grid", "tol_resid", "out_dir")


def parse_gaussian(desc: str) -> GaussianIC:
    """Parse ``gaussian(x0=-12,sigma=1,p0=0,odd=1)``; all entries optional."""
    s = desc.strip()
    if not s.startswith("gaussian"):
        raise ConfigError("ic", f"cannot parse initial condition {desc!r}")
    body = s[len("gaussian"):].strip()
    kw: dict[str, float] = {}
    if body:
        if not (body.startswith("(") and body.endswith(")")):
            raise ConfigError("ic", f"expected gaussian(...), got {desc!r}")
        for item in filter(None, (p.strip() for p in body[1:-1].split(","))):
            if "=" not in item:
                raise ConfigError("ic", f"expected name=value in {item!r}")
            name, val = (t.strip() for t in item.split("=", 1))
            if name not in ("x0", "sigma", "p0", "odd", "amplitude"):
                raise ConfigError("ic", f"unknown gaussian parameter {name!r}")
            try:
                kw[name] = float(val)
            except ValueError:
                raise ConfigError("ic", f"{name} is not a number: {val!r}") from None
    odd = bool(kw.pop("odd", 1.0))
    ic = GaussianIC(odd=odd, **kw)
    if ic.sigma <= 0:
        raise ConfigError("ic", "sigma must be positive")
    return ic


def _float(key: str, raw: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(key, f"not a number: {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(key, f"not finite: {raw!r}")
    return v


def _int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(key, f"not an integer: {raw!r}") from None


def parse_config_text(text: str, base_dir: Path | None = None) -> RunConfig:
    """Parse the key=value format.  Blank lines and ``#`` comments are ignored."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, "duplicate key")
        raw[key] = val

    defaults = []
    if "U_eV" in raw:
        u_eV = _float("U_eV", raw["U_eV"])
    else:
        u_eV = DEFAULT_U_EV
        defaults.append("U_eV")
    if "k_au" in raw:
        k = _float("k_au", raw["k_au"])
    else:
        k = default_k()
        defaults.append("k_au")
    if "omega_eV" not in raw:
        raise ConfigError("omega_eV", "required key missing")
    omega_eV = _float("omega_eV", raw["omega_eV"])
    e_Vnm = _float("E_Vnm", raw["E_Vnm"]) if "E_Vnm" in raw else 0.0
    if "E_Vnm" not in raw:
        defaults.append("E_Vnm")
    try:
        params = to_atomic(u_eV, e_Vnm, omega_eV, k)
    except InvalidParameterError as exc:
        raise ConfigError("params", str(exc)) from None

    ic_raw = raw.get("ic", "plane_wave")
    if "ic" not in raw:
        defaults.append("ic")
    if ic_raw == "plane_wave":
        ic_kind, ic_desc = "plane_wave", ""
        if not params.bound:
            raise ConfigError("k_au", "plane-wave initial condition needs k^2 < 2U")
    else:
        parse_gaussian(ic_raw)
        ic_kind, ic_desc = "gaussian", ic_raw

    kw: dict = {}
    if "t_periods" in raw:
        kw["t_periods"] = _int("t_periods", raw["t_periods"])
    else:
        defaults.append("t_periods")
    if "steps_per_period" in raw:
        kw["steps_per_period"] = _int("steps_per_period", raw["steps_per_period"])
    else:
        defaults.append("steps_per_period")
    if "x_grid" in raw:
        kw["x_grid"] = _parse_grid(raw["x_grid"])
    else:
        defaults.append("x_grid")
    if "tol_resid" in raw:
        kw["tol_resid"] = _float("tol_resid", raw["tol_resid"])
    else:
        defaults.append("tol_resid")
    if "out_dir" in raw:
        out = Path(raw["out_dir"])
        if base_dir is not None and not out.is_absolute():
            out = base_dir / out
        kw["out_dir"] = out
    else:
        defaults.append("out_dir")
        kw["out_dir"] = (base_dir or Path(".")) / "out"
    return RunConfig(params=params, ic_kind=ic_kind, ic_desc=ic_desc,
                     defaults_used=tuple(defaults), **kw)


def _parse_grid(raw: str) -> tuple[float, ...]:
    """Either a comma list ``-1,0,1`` or ``start:stop:count`` (inclusive)."""
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ConfigError("x_grid", "range form is start:stop:count")
        a, b = _float("x_grid", parts[0]), _float("x_grid", parts[1])
        n = _int("x_grid", parts[2])
        if n < 2 or b <= a:
            raise ConfigError("x_grid", "need count >= 2 and stop > start")
        return tuple(a + (b - a) * i / (n - 1) for i in range(n))
    vals = tuple(_float("x_grid", p) for p in raw.split(",") if p.strip())
    if not vals:
        raise ConfigError("x_grid", "empty grid")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("x_grid", "positions must be strictly increasing")
    return vals


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, base_dir=path.parent)
