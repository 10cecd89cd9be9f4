"""Radial discretization in dimension N.

Nodes are uniform in ``rho = log r``.  On such a grid the dilation
``u(x) -> e^{Ns/2} u(e^s x)`` with ``s`` a multiple of the spacing is an
exact index shift, and all four norms scale exactly under it.  The discrete
Pohozaev functional therefore vanishes at discrete critical points up to
boundary truncation, which a graded or uniform grid cannot offer.

Operator applications use extended precision (``np.longdouble``).  Fourth
order differences on a geometric grid lose many digits near the origin, and
the extra bits keep residuals usable for Newton polishing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn

from .analytic import ProblemParams
from .fiber import NormQuadruple

__all__ = [
    "RadialGrid",
    "RadialProfile",
    "TruncationWarning",
    "DomainOverflow",
    "log_grid",
    "sphere_area",
    "lap",
    "lap_adjoint",
    "bilap",
    "grad_sq",
    "norm_quadruple",
    "energy_gradient",
    "energy_of",
    "dilate",
    "shift",
    "constrained_gradient",
    "concentration",
    "concentration_expanded",
    "sign_changes",
    "decay_rate_fit",
    "h2_distance",
    "lq_norm",
]

LD = np.longdouble
TRUNCATION_TOL = 1e-12


class TruncationWarning(UserWarning):
    """Profile does not decay to the truncation floor at ``rmax``."""


class DomainOverflow(ValueError):
    """A dilation pushed mass outside the grid."""


def sphere_area(N: int) -> float:
    """Surface area of the unit sphere in R^N."""
    return 2 * math.pi ** (N / 2) / gamma_fn(N / 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes ``r_i = exp(rho_i)`` with ``rho`` uniform on ``[log rmin, log rmax]``.

    Quadrature is the trapezoid rule in ``rho`` for ``omega * int f r^{N-1} dr``.
    For functions regular at 0 and decaying at ``rmax`` this is spectrally
    accurate.
    """

    N: int
    rmin: float
    rmax: float
    n: int

    def __post_init__(self):
        if self.N < 2 or not (0 < self.rmin < self.rmax) or self.n < 8:
            raise ValueError(f"bad grid ({self.N}, {self.rmin}, {self.rmax}, {self.n})")

    @cached_property
    def rho_ld(self) -> np.ndarray:
        return np.linspace(LD(math.log(self.rmin)), LD(math.log(self.rmax)), self.n)

    @cached_property
    def eta_ld(self):
        return (self.rho_ld[-1] - self.rho_ld[0]) / LD(self.n - 1)

    @property
    def eta(self) -> float:
        return float(self.eta_ld)

    @cached_property
    def rho(self) -> np.ndarray:
        return self.rho_ld.astype(float)

    @cached_property
    def r(self) -> np.ndarray:
        return np.exp(self.rho_ld).astype(float)

    @cached_property
    def omega(self) -> float:
        return sphere_area(self.N)

    @cached_property
    def weights_ld(self) -> np.ndarray:
        return LD(self.omega) * np.exp(self.N * self.rho_ld) * self.eta_ld

    @cached_property
    def weights(self) -> np.ndarray:
        return self.weights_ld.astype(float)

    @cached_property
    def _coef(self):
        eta = self.eta_ld
        s = np.exp(-2 * self.rho_ld) / (eta * eta)
        ap = np.exp((self.N - 2) * eta / 2)
        am = np.exp(-(self.N - 2) * eta / 2)
        return s, ap, am, np.exp(-2 * eta)

    @cached_property
    def lap_matrix(self) -> sp.csr_matrix:
        s, ap, am, e2 = (np.asarray(c, dtype=float) for c in self._coef)
        main = -s * (ap + am)
        up = ap * s[:-1]
        lo = am * s[1:]
        main[0] = s[0] * (am * e2 - ap)
        up[0] = s[0] * (ap - am * e2)
        return sp.diags([lo, main, up], [-1, 0, 1], format="csr")

    @cached_property
    def mass_matrix(self) -> sp.dia_matrix:
        return sp.diags(self.weights)

    @cached_property
    def bilap_form(self) -> sp.csc_matrix:
        """``L^T W L``, the Hessian of ``dd``."""
        L = self.lap_matrix
        return (L.T @ self.mass_matrix @ L).tocsc()

    @cached_property
    def grad_form(self) -> sp.csc_matrix:
        """Symmetric ``A`` with ``gg = u^T A u``."""
        WL = self.mass_matrix @ self.lap_matrix
        return (-0.5 * (WL + WL.T)).tocsc()

    def signature(self) -> str:
        return f"log:N={self.N}:rmin={self.rmin!r}:rmax={self.rmax!r}:n={self.n}"

    def refined(self) -> "RadialGrid":
        """Same interval with the spacing halved."""
        return RadialGrid(self.N, self.rmin, self.rmax, 2 * self.n - 1)

    def extended(self, rmax: float) -> "RadialGrid":
        """Larger ``rmax`` at (nearly) the same spacing."""
        n = 1 + int(math.ceil(math.log(rmax / self.rmin) / self.eta))
        return RadialGrid(self.N, self.rmin, rmax, n)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.weights_ld * np.asarray(f, dtype=LD)))


def log_grid(N: int, rmin: float = 1e-3, rmax: float = 40.0, nodes: int = 4096) -> RadialGrid:
    return RadialGrid(int(N), float(rmin), float(rmax), int(nodes))


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Immutable nodal values on a grid."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def tail_ratio(self) -> float:
        """``max |u|`` over ``r >= 0.95 rmax`` relative to ``max |u|``."""
        u = np.abs(self.values)
        top = u.max()
        if top == 0:
            return 0.0
        return float(u[self.grid.r >= 0.95 * self.grid.rmax].max() / top)

    def truncation_ok(self, tol: float = TRUNCATION_TOL) -> bool:
        return self.tail_ratio() <= tol

    def mass(self) -> float:
        return self.grid.integrate(self.values**2)

    def scaled_to_mass(self, a: float) -> "RadialProfile":
        return RadialProfile(self.grid, self.values * (a / math.sqrt(self.mass())))

    @classmethod
    def from_function(cls, grid: RadialGrid, f) -> "RadialProfile":
        return cls(grid, f(grid.r))


# ---------------------------------------------------------------- operators

def _vals(u) -> np.ndarray:
    return u.values if isinstance(u, RadialProfile) else u


def _lap_ld(grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    s, ap, am, e2 = grid._coef
    u = np.asarray(u, dtype=LD)
    d = np.diff(u)
    dr = np.append(d, -u[-1])  # Dirichlet ghost beyond rmax
    dl = np.concatenate([[d[0] * e2], d])  # regularity ghost below rmin
    return s * (ap * dr - am * dl)


def _lap_t_ld(grid: RadialGrid, v: np.ndarray) -> np.ndarray:
    """Transpose of the discrete Laplacian (Euclidean)."""
    s, ap, am, e2 = grid._coef
    x = s * np.asarray(v, dtype=LD)
    out = np.zeros_like(x)
    t = ap * x
    out[:-1] -= t[:-1]
    out[1:] += t[:-1]
    out[-1] -= t[-1]
    t = am * x
    out[1:] -= t[1:]
    out[:-1] += t[1:]
    out[1] -= t[0] * e2
    out[0] += t[0] * e2
    return out


def lap(u, grid: RadialGrid | None = None, exact: bool = False) -> np.ndarray:
    """Discrete radial Laplacian ``u'' + (N-1) u'/r``.

    Regularity at the origin is imposed through a ghost value with
    ``u(r_{-1}) - u(r_0) = (u(r_0) - u(r_1)) e^{-2 eta}``, exact for
    ``1`` and ``r^2``.  Homogeneous Dirichlet data sit beyond ``rmax``.
    """
    grid = grid or u.grid
    out = _lap_ld(grid, _vals(u))
    return out if exact else out.astype(float)


def lap_adjoint(v, grid: RadialGrid, exact: bool = False) -> np.ndarray:
    out = _lap_t_ld(grid, v)
    return out if exact else out.astype(float)


def bilap(u, grid: RadialGrid | None = None) -> np.ndarray:
    """Squared discrete Laplacian."""
    grid = grid or u.grid
    return _lap_ld(grid, _lap_ld(grid, _vals(u))).astype(float)


def grad_sq(u: RadialProfile) -> float:
    """``|grad u|^2`` as ``-<Lap u, u>``, the summation-by-parts form."""
    g = u.grid
    return float(-np.sum(g.weights_ld * _lap_ld(g, u.values) * u.values))


def norm_quadruple(u: RadialProfile, p: float, check: bool = True) -> NormQuadruple:
    """Quadratures of ``|Lap u|^2, |grad u|^2, |u|_p^p, |u|^2``.

    Emits :class:`TruncationWarning` if ``u`` has not decayed at ``rmax``.
    """
    g = u.grid
    if check and not u.truncation_ok():
        warnings.warn(f"tail ratio {u.tail_ratio():.3e} above truncation floor", TruncationWarning)
    v = np.asarray(u.values, dtype=LD)
    w = g.weights_ld
    Lu = _lap_ld(g, v)
    dd = np.sum(w * Lu * Lu)
    gg = -np.sum(w * Lu * v)
    pp = np.sum(w * np.abs(v) ** LD(p))
    mm = np.sum(w * v * v)
    return NormQuadruple(float(dd), float(gg), float(pp), float(mm), check_interpolation=False)


def energy_of(u: RadialProfile, params: ProblemParams) -> float:
    from .fiber import energy

    return energy(norm_quadruple(u, params.p, check=False), params)


def energy_gradient(u, grid: RadialGrid, p: float, mu: float, exact: bool = False) -> np.ndarray:
    """Euclidean gradient of the discrete energy in the nodal values."""
    w = grid.weights_ld
    v = np.asarray(_vals(u), dtype=LD)
    Lu = _lap_ld(grid, v)
    out = _lap_t_ld(grid, w * Lu)
    if mu:
        out += LD(mu) / 2 * (w * Lu + _lap_t_ld(grid, w * v))
    out -= w * np.abs(v) ** LD(p - 2) * v
    return out if exact else out.astype(float)


def _regular_extension(grid: RadialGrid, u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Even extension ``u0 + c r^2`` below ``rmin``."""
    r0, r1 = grid.r[0], grid.r[1]
    c = (u[1] - u[0]) / (r1**2 - r0**2)
    return u[0] + c * (np.exp(2 * rho) - r0**2)


def shift(u: RadialProfile, k: int) -> RadialProfile:
    """Exact dilation by ``s = k * eta``."""
    g = u.grid
    v = u.values
    out = np.zeros_like(v)
    if k >= 0:
        out[: g.n - k] = v[k:]
    else:
        out[-k:] = v[:k]
        out[:-k] = _regular_extension(g, v, g.rho[:-k] + k * g.eta)
    return RadialProfile(g, math.exp(g.N * k * g.eta / 2) * out)


def dilate(u: RadialProfile, s: float, overflow_tol: float = 1e-9) -> RadialProfile:
    """``(s * u)(r) = e^{Ns/2} u(e^s r)`` resampled on the same grid.

    Integer multiples of the spacing are exact shifts; other values use a
    cubic spline in ``rho``.

    Raises
    ------
    DomainOverflow
        If the dilated profile does not decay before ``rmax``.
    """
    g = u.grid
    t = s / g.eta
    k = round(t)
    if abs(t - k) < 1e-9:
        out = shift(u, int(k))
    else:
        v = u.values
        pad = 4
        lo = g.rho[0] - g.eta * np.arange(pad, 0, -1)
        hi = g.rho[-1] + g.eta * np.arange(1, pad + 1)
        x = np.concatenate([lo, g.rho, hi])
        y = np.concatenate([_regular_extension(g, v, lo), v, np.zeros(pad)])
        cs = CubicSpline(x, y)
        z = g.rho + s
        vals = np.where(z > hi[-1], 0.0, cs(np.minimum(z, hi[-1])))
        below = z < lo[0]
        if below.any():
            vals[below] = _regular_extension(g, v, z[below])
        out = RadialProfile(g, math.exp(g.N * s / 2) * vals)
    top = np.abs(out.values).max()
    if top > 0 and np.abs(out.values[-1]) > overflow_tol * top:
        raise DomainOverflow(f"dilation by s={s:.3g} leaves the grid")
    m0 = u.mass()
    if m0 > 0 and abs(out.mass() / m0 - 1) > 1e-6:
        raise DomainOverflow(f"dilation by s={s:.3g} loses mass below the grid resolution")
    return out


def constrained_gradient(u: RadialProfile, params: ProblemParams) -> tuple[RadialProfile, float]:
    """Tangent gradient on the mass sphere and the multiplier estimate.

    ``lambda = (dd - mu gg - pp) / mm`` and
    ``g = Lap^2 u + mu Lap u - lambda u - |u|^{p-2} u`` in nodal form, so
    that ``<g, u> = 0``.
    """
    g = u.grid
    q = norm_quadruple(u, params.p, check=False)
    lam = (q.dd - params.mu * q.gg - q.pp) / q.mm
    G = energy_gradient(u, g, params.p, params.mu, exact=True) / g.weights_ld
    out = (G - LD(lam) * np.asarray(u.values, dtype=LD)).astype(float)
    return RadialProfile(g, out), float(lam)


def concentration(u: RadialProfile, mu: float) -> float:
    """``|Lap u + (mu/2) u|^2 / |u|^2`` in real space."""
    g = u.grid
    v = np.asarray(u.values, dtype=LD)
    f = _lap_ld(g, v) + LD(mu) / 2 * v
    return float(np.sum(g.weights_ld * f * f) / np.sum(g.weights_ld * v * v))


def concentration_expanded(q: NormQuadruple, mu: float) -> float:
    """Same quantity from the norms: ``(dd - mu gg + mu^2 mm/4) / mm``."""
    return (q.dd - mu * q.gg + mu * mu * q.mm / 4) / q.mm


def sign_changes(u, floor: float = 1e-9) -> int:
    """Strict sign alternations among values above ``floor * max|u|``."""
    v = np.asarray(_vals(u), dtype=float)
    top = np.abs(v).max()
    if top == 0:
        return 0
    keep = v[np.abs(v) > floor * top]
    return int(np.count_nonzero(np.signbit(keep[1:]) != np.signbit(keep[:-1])))


def decay_rate_fit(r: np.ndarray, u: np.ndarray, window: tuple[float, float],
                   max_residual: float = 0.5) -> float:
    """Exponential decay rate of ``|u|`` on ``window``.

    When ``|u|`` oscillates on the window the fit uses the local maxima of
    ``|u|``; otherwise every sample enters.  Returns minus the least squares
    slope of ``log|u|`` against ``r``.

    Raises
    ------
    ValueError
        If the window has too few usable points or the fit residual exceeds
        ``max_residual`` (rms in ``log``).
    """
    r = np.asarray(r, dtype=float)
    a = np.abs(np.asarray(u, dtype=float))
    m = (r >= window[0]) & (r <= window[1]) & (a > 0)
    rr, aa = r[m], a[m]
    if len(rr) < 3:
        raise ValueError("window too noisy: fewer than three samples")
    if np.any(np.diff(aa) > 0):
        peaks = np.flatnonzero((aa[1:-1] >= aa[:-2]) & (aa[1:-1] >= aa[2:])) + 1
        rr, aa = rr[peaks], aa[peaks]
        if len(rr) < 3:
            raise ValueError("window too noisy: fewer than three envelope peaks")
    coef, res, *_ = np.polyfit(rr, np.log(aa), 1, full=True)
    rms = math.sqrt(res[0] / len(rr)) if len(res) else 0.0
    if rms > max_residual:
        raise ValueError(f"window too noisy: rms residual {rms:.3g}")
    return float(-coef[0])


def h2_distance(u: RadialProfile, v: RadialProfile) -> float:
    """``(|Lap(u-v)|^2 + |grad(u-v)|^2 + |u-v|^2)^{1/2}``."""
    if u.grid is not v.grid and u.grid.signature() != v.grid.signature():
        raise ValueError("profiles live on different grids")
    d = RadialProfile(u.grid, u.values - v.values)
    q = norm_quadruple(d, 2.0, check=False)
    return math.sqrt(q.dd + max(q.gg, 0.0) + q.mm)


def lq_norm(u: RadialProfile, q: float) -> float:
    return u.grid.integrate(np.abs(u.values) ** q) ** (1 / q)
