"""Verification experiments: Bessel witness, parameter sweeps, decay.

The witness evaluates everything from closed-form derivatives of
``psi(r) = r^{-nu} J_nu(r)`` and of the cutoff, integrated by composite
Gauss-Legendre quadrature, so it does not depend on the finite difference
grid used by the solvers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.interpolate import CubicSpline
from scipy.special import jv

from .analytic import (
    GNConstant,
    ProblemParams,
    landscape_h_tilde,
    multiplier_bounds,
    rescale_constants,
)
from .radial import (
    RadialProfile,
    concentration,
    decay_rate_fit,
    h2_distance,
    lq_norm,
    sphere_area,
)
from .solve import (
    SolveReport,
    SolverConfig,
    SolverError,
    solve_ground,
    solve_limit,
    solve_mountain_pass,
    _regrid,
)

__all__ = [
    "bessel_psi",
    "bessel_psi_prime",
    "bump",
    "WITNESS_EPS",
    "BesselWitness",
    "build_witness",
    "find_witness",
    "witness_profile",
    "SweepResult",
    "sweep_mu",
    "sweep_a",
    "decay_check",
    "MU_COLUMNS",
    "A_COLUMNS",
]

log = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)

# Flat-topped bump derivative; keeps the |(Lap+1) psi_m|^2 constant near its
# linear-cutoff minimum, which matters when p is close to 4.
WITNESS_EPS = 0.02


# ------------------------------------------------------------------ Bessel

def bessel_psi(N: int, r) -> np.ndarray:
    """``psi(r) = r^{-nu} J_nu(r)`` with ``nu = (N-2)/2``; solves ``(Lap + 1) psi = 0``.

    Small arguments use the series, which also supplies the finite value at
    ``r = 0``.
    """
    nu = (N - 2) / 2
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = r < 1e-3
    x = r[small]
    # r^{-nu} J_nu(r) = sum_k (-1)^k (r/2)^{2k} / (2^nu k! Gamma(nu+k+1))
    out[small] = (1 - x * x / (4 * (nu + 1)) + x**4 / (32 * (nu + 1) * (nu + 2))) / (2**nu * gamma_fn(nu + 1))
    big = ~small
    out[big] = r[big] ** (-nu) * jv(nu, r[big])
    return out


def bessel_psi_prime(N: int, r) -> np.ndarray:
    """``psi'(r) = -r^{-nu} J_{nu+1}(r)``."""
    nu = (N - 2) / 2
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = r < 1e-3
    x = r[small]
    out[small] = -(x / (2 * (nu + 1)) - x**3 / (8 * (nu + 1) * (nu + 2))) / (2**nu * gamma_fn(nu + 1))
    big = ~small
    out[big] = -r[big] ** (-nu) * jv(nu + 1, r[big])
    return out


def _plateau_bump(x: np.ndarray, eps: float):
    """``exp(-eps / (1 - x^2))`` on ``(-1, 1)`` and its first derivative."""
    inside = np.abs(x) < 1
    xs = np.where(inside, x, 0.0)
    q = 1 - xs * xs
    b = np.where(inside, np.exp(-eps / q), 0.0)
    b1 = np.where(inside, -2 * eps * xs / (q * q) * b, 0.0)
    return b, b1


@lru_cache(maxsize=16)
def _bump_table(eps: float):
    """Normalizing constant and cumulative integral of the plateau bump."""
    x = np.cos(np.linspace(np.pi, 0.0, 8193))  # Chebyshev-clustered at the ends
    lo, hi = x[:-1, None], x[1:, None]
    nodes = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
    b, _ = _plateau_bump(nodes, eps)
    pieces = np.sum(0.5 * (hi - lo) * _GL_WEIGHTS * b, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    z = cum[-1]
    return z, CubicSpline(x, cum / z)


def bump(t, eps: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smooth cutoff equal to 1 on ``[0, 1]`` and 0 on ``[2, inf)``, with two derivatives.

    On ``[1, 2]`` the cutoff falls as one minus the normalized integral of
    ``exp(-eps / (1 - x^2))`` with ``x = 2t - 3``.  ``eps = 1`` is the
    standard bump; smaller ``eps`` flattens the bump so the descent is
    closer to linear.
    """
    if not eps > 0:
        raise ValueError("cutoff sharpness must be positive")
    t = np.asarray(t, dtype=float)
    z, cdf = _bump_table(float(eps))
    x = 2 * t - 3
    b, b1 = _plateau_bump(x, eps)
    phi = np.where(x <= -1, 1.0, np.where(x >= 1, 0.0, 1 - cdf(np.clip(x, -1, 1))))
    return phi, -2 * b / z, -4 * b1 / z


# ------------------------------------------------------------------ witness

@dataclass(frozen=True)
class BesselWitness:
    m: float
    mass: float
    dd: float
    gg: float
    pp: float
    phi0_value: float
    phi0_alt: float
    bound_margin: float
    implied_bound: float
    lap_norm: float
    tau_tilde: float
    target_mass: float
    cutoff_eps: float = 1.0

    p: float = 0.0

    @property
    def certified(self) -> bool:
        return self.bound_margin > 0

    @property
    def scaled_margin(self) -> float:
        """``m^{p/2}`` times the margin; the factor removes the decay of both terms."""
        return self.m ** (self.p / 2) * self.bound_margin


def _panels(hi: float, width: float = 0.5):
    k = max(1, int(math.ceil(hi / width)))
    edges = np.linspace(0.0, hi, k + 1)
    a, b = edges[:-1, None], edges[1:, None]
    x = (0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * _GL_WEIGHTS).ravel()
    return x, w


def _witness_fields(N: int, m: float, r: np.ndarray, eps: float = 1.0):
    psi = bessel_psi(N, r)
    dpsi = bessel_psi_prime(N, r)
    phi, phi1, phi2 = bump(r / m, eps)
    u = psi * phi
    du = dpsi * phi + psi * phi1 / m
    # (Lap + 1) u = 2 psi' phi'/m + psi (phi''/m^2 + (N-1) phi'/(m r))
    helm = 2 * dpsi * phi1 / m + psi * (phi2 / m**2 + (N - 1) * phi1 / (m * r))
    lap_u = helm - u
    return u, du, lap_u, helm


def build_witness(params: ProblemParams, gn: GNConstant, m: float,
                  cutoff_eps: float = WITNESS_EPS) -> BesselWitness:
    """Evaluate the rescaled functional on the normalized Bessel test function.

    ``Phi0(v) = |Lap v|^2 - 2 |grad v|^2 - |v|_p^p / p`` is computed twice:
    directly, and as ``|(Lap+1) v|^2 - |v|^2 - |v|_p^p / p``.
    """
    if not params.p < 4:
        raise ValueError("the Bessel witness needs p < 4")
    if m < 1:
        raise ValueError("cutoff scale must be at least 1")
    N, p = params.N, params.p
    rc = rescale_constants(params)
    target = rc.c_tilde_mass * params.a**2
    r, w = _panels(2 * m)
    w = w * sphere_area(N) * r ** (N - 1)
    u, du, lap_u, helm = _witness_fields(N, m, r, cutoff_eps)
    mm0 = float(np.sum(w * u * u))
    k = math.sqrt(target / mm0)
    mm = k * k * mm0
    dd = k * k * float(np.sum(w * lap_u**2))
    gg = k * k * float(np.sum(w * du**2))
    hh = k * k * float(np.sum(w * helm**2))
    pp = k**p * float(np.sum(w * np.abs(u) ** p))
    phi0 = dd - 2 * gg - pp / p
    alt = hh - mm - pp / p
    tau, _, _ = landscape_h_tilde(params, gn)
    scale = rc.a_tilde**N * rc.b_tilde ** (-p)
    return BesselWitness(
        m=float(m),
        mass=mm,
        dd=dd,
        gg=gg,
        pp=pp,
        phi0_value=phi0,
        phi0_alt=alt,
        bound_margin=-target - phi0,
        implied_bound=scale * phi0,
        lap_norm=math.sqrt(dd),
        tau_tilde=tau,
        target_mass=target,
        cutoff_eps=float(cutoff_eps),
        p=float(p),
    )


def find_witness(params: ProblemParams, gn: GNConstant, m_start: float = 8.0,
                 m_max: float = 1024.0, cutoff_eps: float = WITNESS_EPS) -> tuple[BesselWitness, list[BesselWitness]]:
    """Doubling search for the first cutoff scale with a positive margin.

    Raises
    ------
    ValueError
        If no scale up to ``m_max`` certifies the bound.
    """
    tried = []
    m = m_start
    while m <= m_max:
        wit = build_witness(params, gn, m, cutoff_eps)
        tried.append(wit)
        if wit.certified:
            return wit, tried
        m *= 2
    raise ValueError(f"bound not achieved for m <= {m_max}")


def witness_profile(params: ProblemParams, wit: BesselWitness, grid) -> RadialProfile:
    """Normalized witness sampled on a radial grid (rescaled variables)."""
    u, *_ = _witness_fields(params.N, wit.m, grid.r, wit.cutoff_eps)
    return RadialProfile(grid, u).scaled_to_mass(math.sqrt(wit.target_mass))


# ------------------------------------------------------------------ sweeps

MU_COLUMNS = [
    "mu", "status", "m_r", "lambda_ground", "lap_norm_ground", "pohozaev_ground",
    "sigma", "lambda_mp", "pohozaev_mp", "sigma_limit", "sigma_rel_gap",
    "h2_distance_limit", "h2_relative_limit", "ground_window_ok",
]

A_COLUMNS = [
    "a", "status", "m_r", "ratio_m_over_vanishing", "epsilon", "lambda_ground",
    "lambda_gap_rel", "dd_over_mm", "gg_over_mm", "concentration", "pohozaev_ground",
    "lq_norm_1", "lq_norm_2", "q_1", "q_2", "ground_window_ok",
]


@dataclass
class SweepResult:
    axis: str
    values: list[float]
    rows: list[dict]
    columns: list[str]
    extras: dict = field(default_factory=dict)

    def column(self, name: str, converged_only: bool = True) -> np.ndarray:
        rows = [r for r in self.rows if r["status"] == "ok" or not converged_only]
        return np.array([r[name] for r in rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for row in self.rows:
            wr.writerow([_fmt(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def plot_data(self) -> str:
        """Parameter against each ratio column, one block per column."""
        ratio_cols = [c for c in self.columns if c not in (self.axis, "status")]
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["series", self.axis, "value"])
        for c in ratio_cols:
            for row in self.rows:
                if row["status"] == "ok":
                    wr.writerow([c, _fmt(row[self.axis]), _fmt(row.get(c))])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def _check_monotone(values: Sequence[float]):
    d = np.diff(np.asarray(values, dtype=float))
    if len(values) == 0:
        raise ValueError("empty parameter list")
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("sweep values must be strictly monotone")


def _in_window(rep: SolveReport, gn: GNConstant) -> bool:
    upper, lower = multiplier_bounds(rep.params, gn)
    return bool(lower < rep.lam < upper)


def _mu_point(args):
    params, gn, cfg, limit_profile = args
    row = {"mu": params.mu, "status": "ok"}
    try:
        g = solve_ground(params, gn, cfg)
        row.update(m_r=g.energy, lambda_ground=g.lam, lap_norm_ground=math.sqrt(g.dd),
                   pohozaev_ground=g.pohozaev_residual / (1 + g.dd),
                   ground_window_ok=_in_window(g, gn))
        mp = solve_mountain_pass(params, gn, cfg, grid=limit_profile.grid if limit_profile else None)
        row.update(sigma=mp.energy, lambda_mp=mp.lam, pohozaev_mp=mp.pohozaev_residual / (1 + mp.dd))
        if limit_profile is not None:
            dist, rel = _h2_pair(mp.profile, limit_profile)
            row.update(h2_distance_limit=dist, h2_relative_limit=rel)
    except (SolverError, ValueError) as exc:
        row["status"] = f"failed: {exc}"
    return row


def _h2_pair(u: RadialProfile, ref: RadialProfile) -> tuple[float, float]:
    """Absolute and relative H2 distance, moving both onto the longer grid if needed."""
    if u.grid.signature() != ref.grid.signature():
        g = u.grid if u.grid.rmax >= ref.grid.rmax else ref.grid
        u, ref = _regrid(u, g), _regrid(ref, g)
    dist = h2_distance(u, ref)
    zero = RadialProfile(ref.grid, np.zeros_like(ref.values))
    return dist, dist / h2_distance(ref, zero)


def sweep_mu(params: ProblemParams, gn: GNConstant, mu_values: Sequence[float],
             cfg: SolverConfig | None = None, workers: int = 1) -> SweepResult:
    """Ground and mountain-pass solves along ``mu`` at fixed ``(N, p, a)``.

    The mountain-pass states are solved on the grid of the ``mu = 0`` limit
    profile so that H2 distances need no interpolation.
    """
    _check_monotone(mu_values)
    cfg = cfg or SolverConfig()
    lim = solve_limit(params.with_mu(0.0), cfg)
    tasks = [(params.with_mu(mu), gn, cfg, lim.profile) for mu in mu_values]
    rows = _map(_mu_point, tasks, workers)
    for row in rows:
        row["sigma_limit"] = lim.energy
        if row["status"] == "ok":
            row["sigma_rel_gap"] = abs(row["sigma"] - lim.energy) / lim.energy
    return SweepResult("mu", [float(m) for m in mu_values], rows, MU_COLUMNS,
                       extras={"limit": lim.summary()})


def _a_point(args):
    params, gn, cfg, qs = args
    a, mu = params.a, params.mu
    row = {"a": a, "status": "ok", "q_1": qs[0], "q_2": qs[1]}
    try:
        g = solve_ground(params, gn, cfg)
        q = g.quadruple
        vanish = -mu * mu * a * a / 8
        ratio = g.energy / vanish
        unit = RadialProfile(g.profile.grid, g.profile.values / a)
        row.update(
            m_r=g.energy, ratio_m_over_vanishing=ratio, epsilon=ratio - 1, lambda_ground=g.lam,
            lambda_gap_rel=abs(g.lam + mu * mu / 4) / (mu * mu / 4),
            dd_over_mm=q.dd / q.mm, gg_over_mm=q.gg / q.mm,
            concentration=concentration(g.profile, mu),
            pohozaev_ground=g.pohozaev_residual / (1 + q.dd),
            lq_norm_1=lq_norm(unit, qs[0]), lq_norm_2=lq_norm(unit, qs[1]),
            ground_window_ok=_in_window(g, gn),
        )
    except (SolverError, ValueError) as exc:
        row["status"] = f"failed: {exc}"
    return row


def sweep_a(params: ProblemParams, gn: GNConstant, a_values: Sequence[float],
            cfg: SolverConfig | None = None, workers: int = 1,
            q_list: Sequence[float] | None = None) -> SweepResult:
    """Ground solves along decreasing mass at fixed ``mu``."""
    _check_monotone(a_values)
    if not np.all(np.diff(a_values) < 0) and len(a_values) > 1:
        raise ValueError("mass values must decrease")
    cfg = cfg or SolverConfig()
    qs = tuple(q_list) if q_list else (params.p, (params.p + params.p_bar) / 2)
    tasks = [(params.with_mass(a), gn, cfg, qs) for a in a_values]
    rows = _map(_a_point, tasks, workers)
    return SweepResult("a", [float(a) for a in a_values], rows, A_COLUMNS)


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


# ------------------------------------------------------------------ decay

def decay_check(report: SolveReport, window: tuple[float, float] | None = None) -> tuple[float, float, float]:
    """Compare the fitted tail rate with ``sqrt(2 sqrt(-lambda) + mu)/2``.

    Without ``window`` the fit uses the range where the envelope of ``|u|``
    lies between ``1e-4`` and ``1e-10`` of its maximum.

    Returns
    -------
    fitted, predicted, margin
        ``margin = fitted - (predicted - 0.05)``.
    """
    params = report.params
    lam = report.lam
    if not lam < -params.mu**2 / 4:
        raise ValueError("predicted rate needs lambda < -mu^2/4")
    u = report.profile
    r, v = u.r, np.abs(u.values)
    if window is None:
        top = v.max()
        env = np.maximum.accumulate(v[::-1])[::-1]
        inside = (env <= 1e-4 * top) & (env >= 1e-10 * top)
        if inside.sum() < 10:
            raise ValueError("window too noisy: tail not resolved")
        window = (float(r[inside][0]), float(r[inside][-1]))
    fitted = decay_rate_fit(r, u.values, window)
    predicted = math.sqrt(2 * math.sqrt(-lam) + params.mu) / 2
    return fitted, predicted, fitted - (predicted - 0.05)
