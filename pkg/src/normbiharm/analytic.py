"""Closed-form quantities for the mixed-dispersion biharmonic problem.

Everything here depends only on ``(N, p, a, mu)`` and a Gagliardo-Nirenberg
constant; no discretized function is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import bisect, minimize_scalar

__all__ = [
    "derive_exponents",
    "ProblemParams",
    "GNConstant",
    "Thresholds",
    "Landscape",
    "RescaleConstants",
    "thresholds",
    "landscape_h",
    "landscape_h_tilde",
    "rescale_constants",
    "multiplier_bounds",
    "h_function",
    "h_tilde_function",
    "phi_at_tbar",
    "hypotheses",
    "reference_mass",
    "NoPositiveWindow",
]

UNBOUNDED = math.inf  # sentinel for 4* when N <= 4

ROOT_XTOL = 1e-12
SCAN_POINTS = 2048


class NoPositiveWindow(ValueError):
    """Raised when h has no interval of positivity."""


def derive_exponents(N: int, p: float) -> tuple[float, float, float]:
    """Return ``(gamma_p, p_bar, p_star4)``.

    Parameters
    ----------
    N : int
        Space dimension, at least 2.
    p : float
        Nonlinearity exponent, larger than 2.

    Returns
    -------
    gamma_p : float
        ``N (p - 2) / (4 p)``.
    p_bar : float
        Mass-critical exponent ``2 + 8 / N``.
    p_star4 : float
        ``2N / (N - 4)`` for ``N >= 5``, otherwise ``math.inf``.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {N}")
    if not p > 2:
        raise ValueError(f"exponent must exceed 2, got {p}")
    gamma_p = N * (p - 2) / (4 * p)
    p_bar = 2 + 8 / N
    p_star4 = 2 * N / (N - 4) if N > 4 else UNBOUNDED
    return gamma_p, p_bar, p_star4


@dataclass(frozen=True)
class ProblemParams:
    """Parameters of the constrained problem.

    ``mu = 0`` is allowed and selects the limit problem.
    """

    N: int
    p: float
    a: float
    mu: float

    def __post_init__(self):
        gamma_p, p_bar, p_star4 = derive_exponents(self.N, self.p)
        if not self.a > 0:
            raise ValueError(f"mass a must be positive, got {self.a}")
        if not self.mu >= 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if not (p_bar < self.p < p_star4):
            raise ValueError(
                f"p={self.p} outside the mass-supercritical range ({p_bar}, {p_star4})"
            )

    @property
    def gamma_p(self) -> float:
        return self.N * (self.p - 2) / (4 * self.p)

    @property
    def p_bar(self) -> float:
        return 2 + 8 / self.N

    @property
    def p_star4(self) -> float:
        return derive_exponents(self.N, self.p)[2]

    @property
    def pg(self) -> float:
        """The product ``p * gamma_p`` (exceeds 2 in this regime)."""
        return self.p * self.gamma_p

    def with_mu(self, mu: float) -> "ProblemParams":
        return replace(self, mu=float(mu))

    def with_mass(self, a: float) -> "ProblemParams":
        return replace(self, a=float(a))


@dataclass(frozen=True)
class GNConstant:
    """Constant ``C`` in ``|u|_p^p <= C^p |u|_2^{p(1-g)} |Lap u|_2^{p g}``."""

    c_np: float
    provenance: str = "user-supplied"
    refinement_delta: float | None = None

    def __post_init__(self):
        if not self.c_np > 0:
            raise ValueError("GN constant must be positive")
        if self.provenance not in ("user-supplied", "estimated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def power(self, p: float) -> float:
        return self.c_np**p


@dataclass(frozen=True)
class Thresholds:
    c_tilde: float
    c_upper: float
    c_lower: float
    admissible_min_flag: bool
    lhs: float

    @property
    def minimum(self) -> float:
        return min(self.c_tilde, self.c_upper, self.c_lower)


@dataclass(frozen=True)
class Landscape:
    t_bar: float
    r0: float
    r1: float
    h_max: float
    t_max: float


@dataclass(frozen=True)
class RescaleConstants:
    a_tilde: float
    b_tilde: float
    c_tilde_mass: float


def thresholds(params: ProblemParams, gn: GNConstant) -> Thresholds:
    """Evaluate the three admissibility constants and the verdict."""
    p, g, pg = params.p, params.gamma_p, params.pg
    Cp = gn.power(p)
    base = p / (2 * (pg - 1) * Cp)
    c_tilde = base * ((pg - 2) / (pg - 1)) ** (pg - 2)
    c_upper = 2 ** (pg - 2) * base * ((1 - g) / g) ** ((pg - 2) / 2)
    c_lower = base * (2 * (p - 2) / (pg - 1)) ** ((pg - 2) / 2)
    lhs = params.mu ** (pg - 2) * params.a ** (p - 2)
    flag = lhs < min(c_tilde, c_upper, c_lower)
    return Thresholds(c_tilde, c_upper, c_lower, bool(flag), lhs)


def reference_mass(N: int, p: float, mu: float, gn: GNConstant, fraction: float = 0.5) -> float:
    """Mass ``a`` with ``mu^{pg-2} a^{p-2} = fraction * min(thresholds)``."""
    probe = ProblemParams(N, p, 1.0, mu)
    th = thresholds(probe, gn)
    pg = probe.pg
    return (fraction * th.minimum / mu ** (pg - 2)) ** (1 / (p - 2))


def h_function(params: ProblemParams, gn: GNConstant) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``h(t) = t^2/2 - mu a t/2 - (C^p/p) a^{p(1-g)} t^{pg}``."""
    p, g, pg, a, mu = params.p, params.gamma_p, params.pg, params.a, params.mu
    k = gn.power(p) / p * a ** (p * (1 - g))
    return lambda t: 0.5 * t * t - 0.5 * mu * a * t - k * np.power(t, pg)


def h_tilde_function(params: ProblemParams, gn: GNConstant) -> Callable[[np.ndarray], np.ndarray]:
    """Return the rescaled landscape ``h~(tau)``."""
    p, g, pg = params.p, params.gamma_p, params.pg
    m = params.a * math.sqrt(rescale_constants(params).c_tilde_mass)
    k = gn.power(p) / p * m ** (p * (1 - g))
    return lambda t: t * t - 2 * m * t - k * np.power(t, pg)


def _t_bar(params: ProblemParams, gn: GNConstant) -> float:
    p, g, pg, a = params.p, params.gamma_p, params.pg, params.a
    return (p / (2 * (pg - 1) * gn.power(p) * a ** (p * (1 - g)))) ** (1 / (pg - 2))


def phi_at_tbar(params: ProblemParams, gn: GNConstant) -> tuple[float, float]:
    """Return ``(phi(t_bar), mu a / 2)``.

    ``phi(t) = t/2 - (C^p/p) a^{p(1-g)} t^{pg-1}`` is ``h(t)/t + mu a/2``.
    Its maximum sits at ``t_bar``.
    """
    p, g, pg, a = params.p, params.gamma_p, params.pg, params.a
    tb = _t_bar(params, gn)
    phi = 0.5 * tb - gn.power(p) / p * a ** (p * (1 - g)) * tb ** (pg - 1)
    return phi, 0.5 * params.mu * a


def _two_roots(f: Callable, lo: float, hi: float, peak: float) -> tuple[float, float]:
    """Bracket the two sign changes of ``f`` by a log scan, then bisect."""
    ts = np.geomspace(lo, hi, SCAN_POINTS)
    ts = np.unique(np.append(ts, peak))
    vals = f(ts)
    idx = np.flatnonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))
    if len(idx) != 2:
        raise NoPositiveWindow(f"expected two sign changes of h, found {len(idx)}")
    roots = []
    for i in idx:
        x0, x1 = ts[i], ts[i + 1]
        roots.append(bisect(f, x0, x1, xtol=ROOT_XTOL, rtol=1e-15, maxiter=400))
    return roots[0], roots[1]


def _landscape(f: Callable, scale: float, peak: float) -> Landscape:
    if not f(np.array([peak]))[0] > 0:
        raise NoPositiveWindow("h is not positive at its reference scale")
    r0, r1 = _two_roots(f, scale * 1e-6, peak * 1e6, peak)
    res = minimize_scalar(lambda t: -f(np.array([t]))[0], bounds=(r0, r1), method="bounded",
                          options={"xatol": 1e-10 * r1})
    return Landscape(t_bar=peak, r0=r0, r1=r1, h_max=float(-res.fun), t_max=float(res.x))


def landscape_h(params: ProblemParams, gn: GNConstant) -> Landscape:
    """Roots ``R0 < R1`` of ``h`` and its maximum on ``(R0, R1)``.

    Raises
    ------
    NoPositiveWindow
        If ``mu = 0`` or the parameters are not admissible.
    """
    if params.mu <= 0:
        raise NoPositiveWindow("mu = 0 has no local-minimum landscape; use the limit path")
    h = h_function(params, gn)
    tb = _t_bar(params, gn)
    return _landscape(h, params.mu * params.a, tb)


def landscape_h_tilde(params: ProblemParams, gn: GNConstant) -> tuple[float, float, float]:
    """Return ``(tau_tilde, R0~, R1~)`` for the rescaled landscape."""
    if params.mu <= 0:
        raise NoPositiveWindow("mu = 0 has no rescaled landscape")
    p, g, pg = params.p, params.gamma_p, params.pg
    m = params.a * math.sqrt(rescale_constants(params).c_tilde_mass)
    tau = (p / ((pg - 1) * gn.power(p) * m ** (p * (1 - g)))) ** (1 / (pg - 2))
    ls = _landscape(h_tilde_function(params, gn), 2 * m, tau)
    return tau, ls.r0, ls.r1


def rescale_constants(params: ProblemParams) -> RescaleConstants:
    """Constants of the change of variables ``v(x) = b~ u(a~ x)``."""
    N, p, mu = params.N, params.p, params.mu
    if mu <= 0:
        raise ValueError("rescaling needs mu > 0")
    a_t = math.sqrt(2 / mu)
    b_t = (8 / mu**2) ** (1 / (p - 2))
    c_t = 2 ** (6 / (p - 2) - N / 2) * mu ** (N / 2 - 4 / (p - 2))
    return RescaleConstants(a_t, b_t, c_t)


def multiplier_bounds(params: ProblemParams, gn: GNConstant) -> tuple[float, float]:
    """Return ``(upper, lower)`` bounds for the multiplier of the local minimizer."""
    p, g, pg, a, mu = params.p, params.gamma_p, params.pg, params.a, params.mu
    upper = -mu * mu / 4
    lower = (
        -(pg - 1) * mu * mu / (4 * (pg - 2))
        + (g - 1) * gn.power(p) * ((pg - 1) / (2 * (pg - 2))) ** pg * mu**pg * a ** (p - 2)
    )
    return upper, lower


def hypotheses(params: ProblemParams) -> dict[str, bool]:
    """Which standing hypotheses of the existence results hold."""
    N, p = params.N, params.p
    window = min(2 * (N - 2) / (N - 4), 4.0) if N > 4 else 4.0
    return {
        "N>=5": N >= 5,
        "mu>0": params.mu > 0,
        "p<4": p < 4,
        "N<8": N < 8,
        "sign_change_window": N >= 5 and N < 8 and p < window,
    }
