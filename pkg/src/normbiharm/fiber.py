"""Fiber map along mass-preserving dilations.

The energy of ``(s * u)(x) = e^{Ns/2} u(e^s x)`` depends on ``u`` only
through four norms, so all geometry here is exact and cheap.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .analytic import GNConstant, ProblemParams

__all__ = [
    "NormQuadruple",
    "ManifoldClass",
    "FiberGeometry",
    "GeometryError",
    "energy",
    "pohozaev",
    "fiber_value",
    "fiber_deriv",
    "fiber_second",
    "fiber_geometry",
    "classify",
    "limit_t_u",
]

SCAN_WINDOW = 40.0
SCAN_POINTS = 4096
BISECT_TOL = 1e-12
PZERO_BAND = 1e-9


class GeometryError(RuntimeError):
    """The fiber does not have the expected critical-point structure."""


class ManifoldClass(str, enum.Enum):
    PPLUS = "Pplus"
    PZERO = "Pzero"
    PMINUS = "Pminus"
    OFF = "OffManifold"


@dataclass(frozen=True)
class NormQuadruple:
    """``(|Lap u|^2, |grad u|^2, |u|_p^p, |u|^2)`` of a profile.

    Parameters
    ----------
    check_interpolation : bool
        Reject quadruples with ``gg > sqrt(mm dd)``.
    """

    dd: float
    gg: float
    pp: float
    mm: float
    check_interpolation: bool = True

    def __post_init__(self):
        if not (self.dd >= 0 and self.pp >= 0 and self.mm > 0):
            raise ValueError(f"invalid quadruple {self.astuple()}")
        if self.check_interpolation and self.gg > math.sqrt(self.mm * self.dd) * (1 + 1e-12):
            raise ValueError("quadruple violates gg <= sqrt(mm dd)")

    def astuple(self) -> tuple[float, float, float, float]:
        return (self.dd, self.gg, self.pp, self.mm)

    def scaled(self, s: float, params: ProblemParams) -> "NormQuadruple":
        """Quadruple of ``s * u``."""
        return NormQuadruple(
            math.exp(4 * s) * self.dd,
            math.exp(2 * s) * self.gg,
            math.exp(2 * params.pg * s) * self.pp,
            self.mm,
            check_interpolation=False,
        )

    def gn_consistent(self, params: ProblemParams, gn: GNConstant, slack: float = 1e-3) -> bool:
        g = params.gamma_p
        bound = gn.power(params.p) * self.mm ** (params.p * (1 - g) / 2) * self.dd ** (params.pg / 2)
        return self.pp <= bound * (1 + slack)


def energy(q: NormQuadruple, params: ProblemParams) -> float:
    """``dd/2 - mu gg/2 - pp/p``."""
    return 0.5 * q.dd - 0.5 * params.mu * q.gg - q.pp / params.p


def pohozaev(q: NormQuadruple, params: ProblemParams) -> float:
    """``2 dd - mu gg - 2 gamma_p pp``."""
    return 2 * q.dd - params.mu * q.gg - 2 * params.gamma_p * q.pp


def fiber_value(q: NormQuadruple, params: ProblemParams, s):
    s = np.asarray(s, dtype=float)
    return (0.5 * np.exp(4 * s) * q.dd - 0.5 * params.mu * np.exp(2 * s) * q.gg
            - np.exp(2 * params.pg * s) * q.pp / params.p)


def fiber_deriv(q: NormQuadruple, params: ProblemParams, s):
    s = np.asarray(s, dtype=float)
    return (2 * np.exp(4 * s) * q.dd - params.mu * np.exp(2 * s) * q.gg
            - 2 * params.gamma_p * np.exp(2 * params.pg * s) * q.pp)


def fiber_second(q: NormQuadruple, params: ProblemParams, s):
    s = np.asarray(s, dtype=float)
    pg = params.pg
    return (8 * np.exp(4 * s) * q.dd - 2 * params.mu * np.exp(2 * s) * q.gg
            - 4 * pg * params.gamma_p * np.exp(2 * pg * s) * q.pp)


@dataclass(frozen=True)
class FiberGeometry:
    """Critical points and zeros of the fiber map.

    For ``mu = 0`` only ``t_u`` is set.
    """

    s_u: float | None
    c_u: float | None
    t_u: float
    d_u: float | None
    class_at_zero: ManifoldClass


def limit_t_u(q: NormQuadruple, params: ProblemParams) -> float:
    """Unique critical point of the fiber when ``mu = 0``."""
    return math.log(q.dd / (params.gamma_p * q.pp)) / (2 * params.pg - 4)


def _sign_changes(f, lo, hi, n):
    with np.errstate(over="ignore", invalid="ignore"):
        s = np.linspace(lo, hi, n)
        v = f(s)
    ok = np.isfinite(v)
    s, v = s[ok], v[ok]
    idx = np.flatnonzero(np.signbit(v[:-1]) != np.signbit(v[1:]))
    return [(s[i], s[i + 1]) for i in idx]


def _refine(f, lo, hi):
    return bisect(lambda x: float(f(x)), lo, hi, xtol=BISECT_TOL, maxiter=300)


def fiber_geometry(q: NormQuadruple, params: ProblemParams) -> FiberGeometry:
    """Locate ``s_u < c_u < t_u < d_u`` (or ``t_u`` alone when ``mu = 0``).

    Raises
    ------
    GeometryError
        If the scan does not find the expected number of critical points.
    """
    cls = classify(q, params)
    if params.mu == 0:
        crit = _sign_changes(lambda s: fiber_deriv(q, params, s), -SCAN_WINDOW, SCAN_WINDOW, SCAN_POINTS)
        if len(crit) != 1:
            raise GeometryError(f"expected one critical point at mu=0, found {len(crit)}")
        return FiberGeometry(None, None, limit_t_u(q, params), None, cls)

    dpsi = lambda s: fiber_deriv(q, params, s)
    crit = _sign_changes(dpsi, -SCAN_WINDOW, SCAN_WINDOW, SCAN_POINTS)
    if len(crit) != 2:
        raise GeometryError(f"geometry not guaranteed: {len(crit)} critical points found")
    s_u = _refine(dpsi, *crit[0])
    t_u = _refine(dpsi, *crit[1])
    psi = lambda s: fiber_value(q, params, s)
    if not (psi(s_u) < 0 < psi(t_u)):
        raise GeometryError("fiber maximum is not positive")
    c_u = _refine(psi, s_u, t_u)
    hi = t_u + 1.0
    while psi(hi) > 0:
        hi = t_u + 2 * (hi - t_u)
    d_u = _refine(psi, t_u, hi)
    return FiberGeometry(s_u, c_u, t_u, d_u, cls)


def classify(q: NormQuadruple, params: ProblemParams, tol: float = 1e-6) -> ManifoldClass:
    """Place a profile relative to the Pohozaev manifold.

    Parameters
    ----------
    tol : float
        Relative tolerance on ``|P| / dd`` for membership.
    """
    if abs(pohozaev(q, params)) > tol * q.dd:
        return ManifoldClass.OFF
    second = float(fiber_second(q, params, 0.0))
    if abs(second) <= PZERO_BAND * (q.dd + 1):
        warnings.warn("fiber second derivative inside the degenerate band", RuntimeWarning)
        return ManifoldClass.PZERO
    return ManifoldClass.PPLUS if second > 0 else ManifoldClass.PMINUS
