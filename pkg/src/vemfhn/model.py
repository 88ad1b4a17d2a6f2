"""Model data for the nonlocal FitzHugh-Nagumo system.

The potential obeys ``v_t - D(J(v)) lap v + I_ion(v, w) = I_app`` with
``J(v)`` the domain integral of ``v``, and the gating variable obeys
``w_t = H(v, w)``.  Kinetics are the cubic/linear pair

    I_ion(v, w) = -lam * (w - v (1 - v) (v - theta)),    H(v, w) = a v - b w.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "DiffusionLaw",
    "IonicKinetics",
    "Stimulus",
    "InitialData",
    "FitzHughNagumo",
    "IonicAssumptionReport",
    "KINETICS_PRESETS",
    "eval_diffusion",
    "eval_ionic",
    "eval_gating",
    "eval_stimulus",
    "check_ionic_assumptions",
    "initial_data",
]


@dataclass(frozen=True)
class DiffusionLaw:
    """Nonlocal conductivity ``D(J)``.

    ``kind="linear"`` gives ``max(floor, slope * J)``; ``kind="constant"``
    gives ``value`` regardless of ``J``.
    """

    kind: str = "linear"
    slope: float = 0.01
    floor: float = 1e-4
    value: float = 0.01

    def __post_init__(self):
        if self.kind not in ("linear", "constant"):
            raise ValueError(f"unknown diffusion kind {self.kind!r}")
        if not self.floor > 0:
            raise ValueError("diffusion floor must be positive")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant diffusion must be positive")

    def __call__(self, J: float) -> float:
        if self.kind == "constant":
            return float(self.value)
        return max(float(self.floor), float(self.slope) * float(J))

    @property
    def lipschitz(self) -> float:
        return 0.0 if self.kind == "constant" else abs(self.slope)

    @property
    def lower_bound(self) -> float:
        return float(self.value) if self.kind == "constant" else float(self.floor)


@dataclass(frozen=True)
class IonicKinetics:
    a: float
    b: float
    lam: float
    theta: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.a, self.b, self.lam, self.theta)):
            raise ValueError("kinetic parameters must be finite")

    def ionic(self, v, w):
        return -self.lam * (w - v * (1.0 - v) * (v - self.theta))

    def ionic_dv(self, v):
        """Partial derivative of the ionic current with respect to ``v``."""
        th = self.theta
        return self.lam * (-3.0 * v * v + 2.0 * (1.0 + th) * v - th)

    def gating(self, v, w):
        return self.a * v - self.b * w

    def i1(self, v):
        """Potential-only part of the ionic current."""
        return self.lam * v * (1.0 - v) * (v - self.theta)

    def i2(self, w):
        """Gating-only part of the ionic current."""
        return -self.lam * w


KINETICS_PRESETS = {
    "example1": IonicKinetics(a=0.2232, b=0.9, lam=-1.0, theta=0.004),
    "example2": IonicKinetics(a=0.16875, b=1.0, lam=-100.0, theta=0.25),
    "example3": IonicKinetics(a=0.16875, b=1.0, lam=-100.0, theta=0.25),
}


@dataclass(frozen=True)
class Stimulus:
    """Disc-shaped applied current switched on at ``t_on`` (and off at ``t_off``)."""

    amplitude: float = 1.0
    x0: float = 0.5
    y0: float = 0.5
    radius: float = 0.2
    t_on: float = 4.0
    t_off: float = math.inf

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("stimulus radius must be non-negative")

    def active(self, t: float) -> bool:
        return self.t_on <= t < self.t_off

    def __call__(self, x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.active(t):
            return np.zeros(np.broadcast(x, y).shape)
        inside = (x - self.x0) ** 2 + (y - self.y0) ** 2 < self.radius ** 2
        return np.where(inside, float(self.amplitude), 0.0)


def _ex1_v(x, y):
    return 1.0 + 0.5 * np.cos(4 * np.pi * x) * np.cos(4 * np.pi * y)


def _ex1_w(x, y):
    return 1.0 + 0.5 * np.cos(8 * np.pi * x) * np.cos(8 * np.pi * y)


def _ex2_v(x, y):
    return 1.0 - 1.0 / (1.0 + np.exp(-50.0 * np.sqrt(x * x + y * y) - 0.1))


def _zero(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _ex3_v(x, y):
    x, y = np.asarray(x), np.asarray(y)
    return np.where((x < 0.5) & (y < 0.5), 1.4, 0.0)


def _ex3_w(x, y):
    x, y = np.asarray(x), np.asarray(y)
    return np.where((x > 0.5) & (y < 0.5), 0.15, 0.0)


@dataclass(frozen=True)
class InitialData:
    preset: str
    v0: Callable = field(repr=False)
    w0: Callable = field(repr=False)


def initial_data(preset: str, v: float = 0.0, w: float = 0.0) -> InitialData:
    """Initial fields from the named catalog.

    ``preset`` is one of ``example1``, ``example2``, ``example3`` or
    ``constant`` (which uses the scalars ``v`` and ``w``).
    """
    if preset == "example1":
        return InitialData(preset, _ex1_v, _ex1_w)
    if preset == "example2":
        return InitialData(preset, _ex2_v, _zero)
    if preset == "example3":
        return InitialData(preset, _ex3_v, _ex3_w)
    if preset == "constant":
        cv, cw = float(v), float(w)
        return InitialData(preset, lambda x, y: cv + _zero(x, y), lambda x, y: cw + _zero(x, y))
    raise KeyError(f"unknown initial-data preset {preset!r}")


@dataclass(frozen=True)
class FitzHughNagumo:
    """Complete model specification."""

    kinetics: IonicKinetics
    diffusion: DiffusionLaw = DiffusionLaw()
    stimulus: Stimulus | None = None
    initial: InitialData = field(default_factory=lambda: initial_data("constant"))

    def applied_current(self, x, y, t):
        if self.stimulus is None:
            return _zero(x, y)
        return self.stimulus(x, y, t)

    def has_current(self, t: float) -> bool:
        return self.stimulus is not None and self.stimulus.active(t) and self.stimulus.amplitude != 0


def eval_diffusion(law: DiffusionLaw, J: float) -> float:
    return law(J)


def eval_ionic(kinetics: IonicKinetics, v, w):
    return kinetics.ionic(v, w)


def eval_gating(kinetics: IonicKinetics, v, w):
    return kinetics.gating(v, w)


def eval_stimulus(stimulus: Stimulus, x, y, t):
    return stimulus(x, y, t)


@dataclass(frozen=True)
class IonicAssumptionReport:
    """Empirical constants for the growth and monotonicity conditions.

    ``alpha1`` and ``alpha2`` bracket ``|I1(v) v|`` between ``|v|^4 / alpha1``
    (for ``|v| >= v_star``) and ``alpha2 (|v|^4 + 1)``; ``alpha3`` bounds
    ``|I2(w)| / (|w| + 1)``; ``C_h`` is the one-sided Lipschitz constant of
    ``I1`` from sampled difference quotients.
    """

    alpha1: float
    alpha2: float
    alpha3: float
    C_h: float
    v_star: float
    growth_ok: bool
    i2_linear: bool

    @property
    def passed(self) -> bool:
        return self.growth_ok and self.i2_linear


def check_ionic_assumptions(kinetics: IonicKinetics, v_max: float = 10.0, v_star: float = 2.0,
                            samples: int = 4001) -> IonicAssumptionReport:
    v = np.linspace(-v_max, v_max, samples)
    i1 = kinetics.i1(v)
    prod = np.abs(i1 * v)
    far = np.abs(v) >= v_star
    with np.errstate(divide="ignore"):
        ratio = np.abs(v[far]) ** 4 / prod[far]
    alpha1 = float(np.max(ratio)) if far.any() else math.inf
    growth_ok = bool(np.isfinite(alpha1) and alpha1 > 0)
    alpha2 = float(np.max(prod / (np.abs(v) ** 4 + 1.0)))
    i2 = kinetics.i2(v)
    alpha3 = float(np.max(np.abs(i2) / (np.abs(v) + 1.0)))
    # the slope of a linear function is constant up to round-off
    slopes = np.diff(i2) / np.diff(v)
    i2_linear = bool(np.ptp(slopes) <= 1e-9 * max(1.0, abs(kinetics.lam)))
    dq = np.diff(i1) / np.diff(v)
    C_h = float(max(0.0, -dq.min()))
    return IonicAssumptionReport(alpha1, alpha2, alpha3, C_h, v_star, growth_ok, i2_linear)
