"""Constructive solvers on the mass sphere.

Three branches share one engine:

* ``solve_ground``: local minimizer inside the admissible disk, found by
  preconditioned descent on the sphere alternated with projection onto the
  ``P+`` part of the Pohozaev manifold;
* ``solve_mountain_pass``: minimizer of the energy over ``P-``, found by
  descent steps each followed by projection onto ``P-``;
* ``solve_limit``: the same scheme at ``mu = 0``.

Descent stalls once residuals reach the roundoff floor of fourth-order
differences.  Each branch therefore finishes with a bordered Newton polish
whose residuals are evaluated in extended precision.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analytic import (
    GNConstant,
    Landscape,
    NoPositiveWindow,
    ProblemParams,
    landscape_h,
    thresholds,
)
from .fiber import (
    GeometryError,
    ManifoldClass,
    NormQuadruple,
    classify,
    energy,
    fiber_geometry,
    limit_t_u,
    pohozaev,
)
from .radial import (
    LD,
    RadialGrid,
    RadialProfile,
    DomainOverflow,
    dilate,
    energy_gradient,
    lap,
    lap_adjoint,
    log_grid,
    norm_quadruple,
    shift,
)

__all__ = [
    "Branch",
    "SolverConfig",
    "SolveReport",
    "SolverError",
    "NotConverged",
    "LeftAdmissibleDisk",
    "project_plus",
    "project_minus",
    "solve_ground",
    "solve_mountain_pass",
    "solve_limit",
    "newton_polish",
    "fd_fiber_derivative",
    "gn_quotient",
    "gn_constant_estimate",
    "GNEstimate",
    "gaussian_start",
    "auto_grid",
    "random_profiles",
    "gn_validate",
    "multistart_mountain_pass",
    "MultiStartResult",
]

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class NotConverged(SolverError):
    pass


class LeftAdmissibleDisk(SolverError):
    pass


class Branch(str, enum.Enum):
    GROUND = "GroundLocalMin"
    MOUNTAIN_PASS = "MountainPass"
    LIMIT = "LimitMuZero"


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the descent-then-Newton scheme.

    ``cadence`` is the number of descent steps between fiber projections on
    the ground branch.  ``newton_switch`` is the preconditioned gradient norm
    below which descent hands over to Newton.
    """

    step0: float = 1.0
    max_iter: int = 4000
    tol_grad: float = 1e-8
    tol_pohozaev: float = 1e-8
    backtrack: float = 0.5
    armijo: float = 1e-4
    cadence: int = 10
    newton_switch: float = 1e-4
    newton_iter: int = 30
    tail_tol: float = 1e-12
    max_extend: int = 12

    def __post_init__(self):
        for k in ("step0", "max_iter", "tol_grad", "tol_pohozaev", "backtrack", "armijo",
                  "cadence", "newton_switch", "newton_iter"):
            if not getattr(self, k) > 0:
                raise ValueError(f"solver.{k} must be positive")
        if self.tol_grad > 1e-6 or self.tol_pohozaev > 1e-6:
            raise ValueError("solver tolerances must not exceed 1e-6")
        if not self.backtrack < 1:
            raise ValueError("solver.backtrack must be below 1")


@dataclass
class SolveReport:
    profile: RadialProfile
    energy: float
    lam: float
    pohozaev_residual: float
    grad_norm: float
    branch: Branch
    iterations: int
    quadruple: NormQuadruple
    manifold_class: ManifoldClass
    params: ProblemParams
    newton_steps: int = 0
    fd_fiber_derivative: float = float("nan")
    energy_history: list[float] = field(default_factory=list, repr=False)

    @property
    def dd(self) -> float:
        return self.quadruple.dd

    def summary(self) -> dict:
        q = self.quadruple
        g = self.profile.grid
        return {
            "branch": self.branch.value,
            "energy": self.energy,
            "lambda": self.lam,
            "pohozaev_residual": self.pohozaev_residual,
            "pohozaev_relative": self.pohozaev_residual / (1 + q.dd),
            "grad_norm": self.grad_norm,
            "fd_fiber_derivative": self.fd_fiber_derivative,
            "iterations": self.iterations,
            "newton_steps": self.newton_steps,
            "manifold_class": self.manifold_class.value,
            "dd": q.dd,
            "gg": q.gg,
            "pp": q.pp,
            "mm": q.mm,
            "grid": g.signature(),
        }


# ------------------------------------------------------------------ helpers

class _Problem:
    """Discrete energy on a fixed grid."""

    def __init__(self, grid: RadialGrid, params: ProblemParams):
        self.grid = grid
        self.params = params
        self.w = grid.weights
        self._pre = None
        self._pre_sigma = None

    def quad(self, v: np.ndarray) -> NormQuadruple:
        return norm_quadruple(RadialProfile(self.grid, v), self.params.p, check=False)

    def energy(self, v: np.ndarray) -> float:
        return energy(self.quad(v), self.params)

    def grad(self, v: np.ndarray, exact: bool = False) -> np.ndarray:
        return energy_gradient(v, self.grid, self.params.p, self.params.mu, exact=exact)

    def mass(self, v: np.ndarray) -> float:
        return float(np.sum(self.grid.weights_ld * np.asarray(v, dtype=LD) ** 2))

    def normalize(self, v: np.ndarray) -> np.ndarray:
        return v * (self.params.a / math.sqrt(self.mass(v)))

    def hessian(self, v: np.ndarray) -> sp.csc_matrix:
        g, pr = self.grid, self.params
        nl = (pr.p - 1) * self.w * np.abs(v) ** (pr.p - 2)
        return (g.bilap_form - pr.mu * g.grad_form - sp.diags(nl)).tocsc()

    def preconditioner(self, sigma: float):
        if self._pre is None or abs(sigma - self._pre_sigma) > 0.25 * abs(self._pre_sigma):
            g, pr = self.grid, self.params
            M = (g.bilap_form - pr.mu * g.grad_form + sigma * g.mass_matrix).tocsc()
            self._pre = spla.splu(M)
            self._pre_sigma = sigma
        return self._pre

    def residual(self, v: np.ndarray):
        """Euclidean constrained residual, multiplier, and gradient."""
        G = self.grad(v)
        lam = float(v @ G) / float(v @ (self.w * v))
        return G - lam * self.w * v, lam, G

    def sigma(self, lam: float, q: NormQuadruple) -> float:
        base = max(-lam, self.params.mu**2 / 4)
        return base + 0.05 * max(1.0, q.dd / q.mm, abs(lam))

    def grad_norm(self, v: np.ndarray) -> float:
        """Preconditioned norm of the constrained residual, relative to ``|u|``."""
        F, lam, _ = self.residual(v)
        q = self.quad(v)
        z = self.preconditioner(self.sigma(lam, q)).solve(F)
        return math.sqrt(max(float(z @ (self.w * z)), 0.0) / self.mass(v))


def _as_profile(grid, v):
    return RadialProfile(grid, v)


def fd_fiber_derivative(u: RadialProfile, params: ProblemParams) -> float:
    """Derivative of ``s -> E(s * u)`` at 0 from direct energy evaluations.

    Uses exact grid shifts ``s = k eta`` for ``k = -3..3`` and the sixth-order
    centered stencil.
    """
    eta = u.grid.eta
    e = {k: energy(norm_quadruple(shift(u, k), params.p, check=False), params) for k in (-3, -2, -1, 1, 2, 3)}
    return (45 * (e[1] - e[-1]) - 9 * (e[2] - e[-2]) + (e[3] - e[-3])) / (60 * eta)


def _landscape_or_none(params: ProblemParams, gn: GNConstant | None) -> Landscape | None:
    if gn is None or params.mu == 0:
        return None
    try:
        return landscape_h(params, gn)
    except NoPositiveWindow:
        return None


def _project(u: RadialProfile, params: ProblemParams, which: str, passes: int = 6) -> tuple[RadialProfile, float]:
    total = 0.0
    for _ in range(passes):
        q = norm_quadruple(u, params.p, check=False)
        if params.mu == 0:
            s = limit_t_u(q, params)
        else:
            geo = fiber_geometry(q, params)
            s = geo.s_u if which == "plus" else geo.t_u
        if abs(s) < 1e-13:
            break
        u = dilate(u, s)
        total += s
    return u, total


def project_plus(u: RadialProfile, params: ProblemParams, gn: GNConstant | None = None) -> RadialProfile:
    """Move ``u`` along its fiber to the local minimum ``s_u``.

    The dilation is repeated until the residual fiber offset is negligible,
    which removes the interpolation error of the first pass.
    """
    if params.mu <= 0:
        raise GeometryError("P+ is empty when mu = 0")
    out, _ = _project(u, params, "plus")
    ls = _landscape_or_none(params, gn)
    if ls is not None:
        dd = norm_quadruple(out, params.p, check=False).dd
        if math.sqrt(dd) >= ls.r0:
            raise LeftAdmissibleDisk(f"|Lap u| = {math.sqrt(dd):.6g} >= R0 = {ls.r0:.6g}")
    return out


def project_minus(u: RadialProfile, params: ProblemParams, gn: GNConstant | None = None) -> RadialProfile:
    """Move ``u`` along its fiber to the maximum ``t_u`` (closed form at ``mu = 0``)."""
    out, _ = _project(u, params, "minus")
    return out


def gaussian_start(grid: RadialGrid, params: ProblemParams, target_dd: float | None = None) -> RadialProfile:
    """Mass-normalized Gaussian ``exp(-(r/ell)^2)``.

    With ``target_dd`` the width gives ``|Lap u|^2 = target_dd``; otherwise
    the width is the one at the fiber maximum ``t_u`` of the unit Gaussian.
    The profile is rebuilt analytically rather than resampled.
    """
    def make(ell):
        return RadialProfile.from_function(grid, lambda r: np.exp(-(r / ell) ** 2)).scaled_to_mass(params.a)

    ell0 = math.sqrt(grid.rmin * grid.rmax)
    q = norm_quadruple(make(ell0), params.p, check=False)
    if target_dd is not None:
        return make(ell0 * (q.dd / target_dd) ** 0.25)
    if params.mu == 0:
        t = limit_t_u(q, params)
    else:
        t = fiber_geometry(q, params).t_u
    return make(ell0 * math.exp(-t))


def auto_grid(params: ProblemParams, branch: Branch, gn: GNConstant | None = None,
              nodes: int = 4096) -> RadialGrid:
    """Grid sized to the starting Gaussian of ``branch``.

    ``rmin`` sits a few hundred times below the profile width so that the
    truncated core carries negligible norm; ``rmax`` is a first guess that
    the solver extends while the tail has not decayed.
    """
    probe = log_grid(params.N, 1e-4, 1e4, 4096)
    if branch is Branch.GROUND:
        ls = landscape_h(params, gn)
        u = gaussian_start(probe, params, (ls.r0 / 2) ** 2)
        span = 70.0
    else:
        u = gaussian_start(probe, params)
        span = 100.0
    q = norm_quadruple(u, params.p, check=False)
    ell = (q.mm / q.dd) ** 0.25
    return log_grid(params.N, 3e-3 * ell, span * ell, nodes)


# ------------------------------------------------------------------ Newton

def newton_polish(u: RadialProfile, params: ProblemParams, lam: float | None = None,
                  max_iter: int = 30, tol: float = 1e-13) -> tuple[RadialProfile, float, int]:
    """Bordered Newton iteration for ``grad E = lambda W u``, ``|u|^2 = a^2``.

    The Jacobian is factored in double precision after symmetric diagonal
    scaling; residuals are formed in extended precision, so the iteration
    behaves like iterative refinement once the Jacobian is accurate enough.

    Returns
    -------
    profile, multiplier, steps
    """
    grid = u.grid
    prob = _Problem(grid, params)
    w, wl = grid.weights, grid.weights_ld
    v = np.asarray(u.values, dtype=LD)
    if lam is None:
        G = prob.grad(v, exact=True)
        lam = LD(np.sum(v * G) / np.sum(wl * v * v))
    lam = LD(lam)
    a2 = LD(params.a) ** 2
    prev = math.inf
    for it in range(1, max_iter + 1):
        vd = v.astype(float)
        F = prob.grad(v, exact=True) - lam * wl * v
        c = (np.sum(wl * v * v) - a2) / 2
        H = prob.hessian(vd) - float(lam) * grid.mass_matrix
        wu = w * vd
        d = 1 / np.sqrt(np.abs(H.diagonal()) + 1e-300)
        sc = math.sqrt(float(np.sum((wu * d) ** 2)))
        D = sp.diags(np.append(d, 1 / sc))
        K = sp.bmat([[H, -wu[:, None]], [-wu[None, :], None]], format="csc")
        lu = spla.splu((D @ K @ D).tocsc())
        rhs = np.append(-F.astype(float), float(c))
        sol = D @ lu.solve(D @ rhs)
        v = v + sol[:-1].astype(LD)
        lam = lam + LD(sol[-1])
        step = math.sqrt(float(np.sum(w * sol[:-1] ** 2)) / float(a2))
        log.debug("newton %d step %.3e lambda %.15g", it, step, float(lam))
        if not np.isfinite(step):
            raise NotConverged("Newton produced non-finite values")
        if step < tol or (step < 1e-10 and step >= prev):
            return RadialProfile(grid, v.astype(float)), float(lam), it
        prev = step
    raise NotConverged(f"Newton did not settle after {max_iter} steps (last step {step:.2e})")


# ------------------------------------------------------------------ descent

def _descent(prob: _Problem, v: np.ndarray, cfg: SolverConfig, project, history: list[float],
             every_step: bool) -> tuple[np.ndarray, int]:
    """Preconditioned sphere descent with periodic or per-step projection."""
    E = prob.energy(v)
    history.append(E)
    it = 0
    for it in range(1, cfg.max_iter + 1):
        F, lam, G = prob.residual(v)
        q = prob.quad(v)
        M = prob.preconditioner(prob.sigma(lam, q))
        d = -M.solve(F)
        d -= float(d @ (prob.w * v)) / float(v @ (prob.w * v)) * v
        gnorm = math.sqrt(max(float(d @ (prob.w * d)), 0.0) / prob.mass(v))
        if gnorm < cfg.newton_switch:
            break
        slope = float(G @ d)
        if slope >= 0:
            break
        st = cfg.step0
        while True:
            cand = prob.normalize(v + st * d)
            if every_step:
                cand = project(cand)
            Ec = math.inf if cand is None else prob.energy(cand)
            if Ec <= E + cfg.armijo * st * slope:
                break
            st *= cfg.backtrack
            if st < 1e-14:
                return v, it
        v, E = cand, Ec
        if not every_step and it % cfg.cadence == 0:
            vp = project(v)
            if vp is not None:
                Ep = prob.energy(vp)
                if Ep <= E:
                    v, E = vp, Ep
        history.append(E)
        if it % 100 == 0:
            log.info("descent %d E=%.12g lambda=%.8g |g|=%.3e", it, E, lam, gnorm)
    else:
        raise NotConverged(f"descent did not reach the Newton switch in {cfg.max_iter} steps")
    return v, it


def _finish(prob: _Problem, u: RadialProfile, lam: float, branch: Branch, iters: int,
            newton_steps: int, history: list[float], cfg: SolverConfig) -> SolveReport:
    params = prob.params
    q = norm_quadruple(u, params.p, check=False)
    P = pohozaev(q, params)
    E = energy(q, params)
    rep = SolveReport(
        profile=u,
        energy=E,
        lam=lam,
        pohozaev_residual=P,
        grad_norm=prob.grad_norm(u.values),
        branch=branch,
        iterations=iters,
        quadruple=q,
        manifold_class=classify(q, params, tol=max(cfg.tol_pohozaev, 1e-10) * 100),
        params=params,
        newton_steps=newton_steps,
        fd_fiber_derivative=fd_fiber_derivative(u, params),
        energy_history=history,
    )
    if rep.grad_norm > cfg.tol_grad or abs(P) > cfg.tol_pohozaev * (1 + q.dd):
        raise NotConverged(
            f"{branch.value}: grad {rep.grad_norm:.2e}, Pohozaev {abs(P) / (1 + q.dd):.2e}"
        )
    return rep


def _regrid(u: RadialProfile, grid: RadialGrid) -> RadialProfile:
    from scipy.interpolate import CubicSpline

    cs = CubicSpline(u.grid.rho, u.values)
    z = grid.rho
    v = np.where(z <= u.grid.rho[-1], cs(np.minimum(z, u.grid.rho[-1])), 0.0)
    return RadialProfile(grid, v)


def _safe(project):
    """Projection that reports a dilation overflow as ``None``."""
    def run(x):
        try:
            return project(x)
        except DomainOverflow:
            return None
    return run


def _run(params: ProblemParams, grid: RadialGrid, cfg: SolverConfig, u0: RadialProfile,
         branch: Branch, gn: GNConstant | None) -> SolveReport:
    history: list[float] = []
    ls = _landscape_or_none(params, gn)
    total_iters = 0
    u = u0 if u0.grid is grid else _regrid(u0, grid)
    for attempt in range(cfg.max_extend + 1):
        prob = _Problem(grid, params)
        v = prob.normalize(u.values)
        if branch is Branch.GROUND:
            proj = _safe(lambda x: project_plus(_as_profile(grid, x), params, gn).values)
        else:
            proj = _safe(lambda x: project_minus(_as_profile(grid, x), params).values)
        vp = proj(v)
        if vp is not None:
            v = vp
        v, iters = _descent(prob, v, cfg, proj, history, every_step=branch is not Branch.GROUND)
        total_iters += iters
        last = attempt == cfg.max_extend
        if not last and not _as_profile(grid, v).truncation_ok(1e-8):
            log.info("descent reached rmax, extending to %.4g", 1.5 * grid.rmax)
            grid = grid.extended(1.5 * grid.rmax)
            u = _regrid(_as_profile(prob.grid, v), grid)
            continue
        u, lam, nsteps = newton_polish(_as_profile(grid, v), params, max_iter=cfg.newton_iter)
        if u.truncation_ok(cfg.tail_tol) or last:
            break
        log.info("tail ratio %.2e, extending rmax to %.4g", u.tail_ratio(), 1.5 * grid.rmax)
        grid = grid.extended(1.5 * grid.rmax)
        u = _regrid(u, grid)
    if not u.truncation_ok(cfg.tail_tol):
        raise NotConverged(f"profile does not decay by rmax (tail ratio {u.tail_ratio():.2e})")
    rep = _finish(_Problem(grid, params), u, lam, branch, total_iters, nsteps, history, cfg)
    if branch is Branch.GROUND and ls is not None and math.sqrt(rep.dd) >= ls.r0:
        raise LeftAdmissibleDisk("Newton polish left the admissible disk")
    return rep


def solve_ground(params: ProblemParams, gn: GNConstant, cfg: SolverConfig | None = None,
                 u0: RadialProfile | None = None, grid: RadialGrid | None = None) -> SolveReport:
    """Local minimizer of the energy on the mass sphere inside ``|Lap u| < R0``.

    Raises
    ------
    SolverError
        On non-convergence, inadmissible parameters, or exit from the disk.
    """
    cfg = cfg or SolverConfig()
    if params.mu <= 0:
        raise SolverError("the ground branch needs mu > 0")
    if not thresholds(params, gn).admissible_min_flag:
        raise SolverError("parameters are not admissible")
    ls = landscape_h(params, gn)
    grid = grid or (u0.grid if u0 is not None else auto_grid(params, Branch.GROUND, gn))
    if u0 is None:
        u0 = gaussian_start(grid, params, (ls.r0 / 2) ** 2)
    rep = _run(params, grid, cfg, u0, Branch.GROUND, gn)
    if rep.manifold_class is not ManifoldClass.PPLUS or not rep.energy < 0:
        raise SolverError(f"ground branch converged to a {rep.manifold_class.value} state")
    return rep


def solve_mountain_pass(params: ProblemParams, gn: GNConstant | None = None,
                        cfg: SolverConfig | None = None, u0: RadialProfile | None = None,
                        grid: RadialGrid | None = None) -> SolveReport:
    """Minimizer of the energy over ``P-`` (a mountain-pass critical point)."""
    cfg = cfg or SolverConfig()
    if gn is not None and params.mu > 0 and not thresholds(params, gn).admissible_min_flag:
        raise SolverError("parameters are not admissible")
    branch = Branch.LIMIT if params.mu == 0 else Branch.MOUNTAIN_PASS
    grid = grid or (u0.grid if u0 is not None else auto_grid(params, branch, gn))
    if u0 is None:
        u0 = gaussian_start(grid, params)
    rep = _run(params, grid, cfg, u0, branch, gn)
    if rep.manifold_class is not ManifoldClass.PMINUS or not rep.energy > 0:
        raise SolverError(f"mountain-pass branch converged to a {rep.manifold_class.value} state")
    return rep


def solve_limit(params: ProblemParams, cfg: SolverConfig | None = None,
                u0: RadialProfile | None = None, grid: RadialGrid | None = None) -> SolveReport:
    """Mountain-pass state of the ``mu = 0`` problem."""
    return solve_mountain_pass(params.with_mu(0.0), None, cfg, u0, grid)


# ------------------------------------------------------------------ GN constant

@dataclass(frozen=True)
class GNEstimate:
    constant: GNConstant
    quotient: float
    quotient_refined: float
    profile: RadialProfile


def gn_quotient(u: RadialProfile, p: float) -> float:
    """Weinstein quotient ``|u|_p^p / (|u|_2^{p(1-g)} |Lap u|_2^{pg})``."""
    N = u.grid.N
    g = N * (p - 2) / (4 * p)
    q = norm_quadruple(u, p, check=False)
    return q.pp / (q.mm ** (p * (1 - g) / 2) * q.dd ** (p * g / 2))


def _gn_maximize(grid: RadialGrid, p: float, v0: np.ndarray, max_iter: int, tol: float):
    """Ascent on ``log`` of the quotient, then Newton on the profile equation."""
    N = grid.N
    g = N * (p - 2) / (4 * p)
    w = grid.weights
    B = grid.bilap_form
    W = grid.mass_matrix
    v = v0.copy()

    def parts(v):
        q = norm_quadruple(RadialProfile(grid, v), p, check=False)
        return q.dd, q.pp, q.mm

    def J(v):
        dd, pp, mm = parts(v)
        return math.log(pp) - p * (1 - g) / 2 * math.log(mm) - p * g / 2 * math.log(dd)

    lu = None
    Jv = J(v)
    for it in range(max_iter):
        dd, pp, mm = parts(v)
        Bu = lap_adjoint(w * lap(v, grid), grid)
        grad = p * w * np.abs(v) ** (p - 2) * v / pp - p * (1 - g) * w * v / mm - p * g * Bu / dd
        if lu is None or it % 50 == 0:
            lu = spla.splu((B / dd + W / mm).tocsc())
        d = lu.solve(grad)
        slope = float(grad @ d)
        if slope < tol:
            break
        st = 1.0
        while st > 1e-12:
            cand = v + st * d
            Jc = J(cand)
            if Jc >= Jv + 1e-4 * st * slope:
                break
            st *= 0.5
        v, Jv = cand, Jc
    # scale to Lap^2 Q + Q = |Q|^{p-2} Q, then polish with Newton
    dd, pp, mm = parts(v)
    k = ((1 - g) * dd / (g * mm)) ** 0.25
    amp = ((1 - g) * pp / mm) ** (1 / (p - 2))
    # dilate() carries the mass factor k^{-N/2}; undo it for a pure rescaling
    Q = dilate(RadialProfile(grid, v / amp), -math.log(k), overflow_tol=1e-6).values * k ** (N / 2)
    Q = _gn_newton(grid, p, Q)
    return Q


def _gn_newton(grid: RadialGrid, p: float, Q: np.ndarray, max_iter: int = 40) -> np.ndarray:
    w, wl = grid.weights, grid.weights_ld
    v = np.asarray(Q, dtype=LD)
    prev = math.inf
    for _ in range(max_iter):
        F = energy_gradient(v, grid, p, 0.0, exact=True) + wl * v
        vd = v.astype(float)
        H = (grid.bilap_form + grid.mass_matrix - sp.diags((p - 1) * w * np.abs(vd) ** (p - 2))).tocsc()
        d = 1 / np.sqrt(np.abs(H.diagonal()))
        D = sp.diags(d)
        step = D @ spla.splu((D @ H @ D).tocsc()).solve(D @ (-F.astype(float)))
        v = v + step.astype(LD)
        size = math.sqrt(float(np.sum(w * step**2)) / float(np.sum(w * vd**2)))
        if size < 1e-13 or (size < 1e-10 and size >= prev):
            break
        prev = size
    return v.astype(float)


def gn_constant_estimate(N: int, p: float, grid: RadialGrid | None = None,
                         max_iter: int = 400, tol: float = 1e-14) -> GNEstimate:
    """Estimate the optimal Gagliardo-Nirenberg constant ``C_{N,p}``.

    The quotient is maximized on ``grid`` and on the grid with half the
    spacing; the relative difference of the two constants is the reported
    refinement delta.
    """
    g_ = N * (p - 2) / (4 * p)
    if not (2 < p and (N <= 4 or p < 2 * N / (N - 4))):
        raise ValueError("GN estimate needs 2 < p < 4*")
    grid = grid or log_grid(N, 1e-3, 60.0, 4096)
    v0 = np.exp(-grid.r**2)
    Q = _gn_maximize(grid, p, v0, max_iter, tol)
    c1 = gn_quotient(RadialProfile(grid, Q), p)
    fine = grid.refined()
    Qf = _gn_newton(fine, p, _regrid(RadialProfile(grid, Q), fine).values)
    c2 = gn_quotient(RadialProfile(fine, Qf), p)
    delta = abs(c1 ** (1 / p) - c2 ** (1 / p)) / c2 ** (1 / p)
    const = GNConstant(c2 ** (1 / p), "estimated", delta)
    return GNEstimate(const, c1, c2, RadialProfile(fine, Qf))


def random_profiles(grid: RadialGrid, count: int, seed: int = 42) -> list[RadialProfile]:
    """Sums of three modulated Gaussians with random widths, frequencies and signs."""
    rng = np.random.default_rng(seed)
    r = grid.r
    out = []
    for _ in range(count):
        s = np.exp(rng.uniform(math.log(0.3), math.log(5.0), 3))
        k = rng.uniform(0.0, 3.0, 3)
        c = rng.normal(size=3)
        v = sum(c[j] * np.exp(-(r / s[j]) ** 2) * np.cos(k[j] * r) for j in range(3))
        out.append(RadialProfile(grid, v))
    return out


def gn_validate(gn: GNConstant, N: int, p: float, grid: RadialGrid | None = None,
                count: int = 200, seed: int = 42) -> float:
    """Largest ratio of the Weinstein quotient to ``C^p`` over random profiles."""
    grid = grid or log_grid(N, 1e-3, 60.0, 4096)
    return max(gn_quotient(u, p) for u in random_profiles(grid, count, seed)) / gn.power(p)


@dataclass(frozen=True)
class MultiStartResult:
    best: SolveReport
    energies: list[float]
    failures: int

    @property
    def spread(self) -> float:
        """Relative spread of the converged levels."""
        e = np.array(self.energies)
        return float((e.max() - e.min()) / abs(e.min()))


def _random_start(grid: RadialGrid, params: ProblemParams, rng: np.random.Generator) -> RadialProfile:
    """Modulated Gaussian at a random fraction of the fiber-maximum width."""
    base = gaussian_start(grid, params)
    q = norm_quadruple(base, params.p, check=False)
    ell = (q.mm / q.dd) ** 0.25 * math.exp(rng.uniform(-0.7, 0.7))
    k = rng.uniform(0.0, 2.0) / ell
    c = rng.uniform(-0.8, 0.8)
    f = lambda r: np.exp(-(r / ell) ** 2) * (1 + c * np.cos(k * r))
    return RadialProfile.from_function(grid, f).scaled_to_mass(params.a)


def _mp_task(args):
    params, gn, cfg, u0 = args
    try:
        return solve_mountain_pass(params, gn, cfg, u0=u0)
    except SolverError as exc:
        log.info("start failed: %s", exc)
        return None


def multistart_mountain_pass(params: ProblemParams, gn: GNConstant | None = None,
                             cfg: SolverConfig | None = None, starts: int = 50, seed: int = 42,
                             workers: int = 1, grid: RadialGrid | None = None) -> MultiStartResult:
    """Minimum of the ``P-`` level over seeded random starts.

    Raises
    ------
    NotConverged
        If no start converges.
    """
    from concurrent.futures import ProcessPoolExecutor

    branch = Branch.LIMIT if params.mu == 0 else Branch.MOUNTAIN_PASS
    grid = grid or auto_grid(params, branch, gn)
    rng = np.random.default_rng(seed)
    tasks = [(params, gn, cfg, _random_start(grid, params, rng)) for _ in range(starts)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reps = list(ex.map(_mp_task, tasks))
    else:
        reps = [_mp_task(t) for t in tasks]
    ok = [r for r in reps if r is not None]
    if not ok:
        raise NotConverged("no mountain-pass start converged")
    best = min(ok, key=lambda r: r.energy)
    return MultiStartResult(best, [r.energy for r in ok], len(reps) - len(ok))
