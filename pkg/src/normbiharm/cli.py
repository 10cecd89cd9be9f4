"""Command-line front end.

Configuration is line-oriented ``section.key = value`` text::

    # reference configuration
    problem.N = 5
    problem.p = 3.8
    problem.mu = 1.0
    problem.a = reference

Environment variables ``NORMBIHARM_<SECTION>__<KEY>`` (for example
``NORMBIHARM_SOLVER__TOL_GRAD``) fill in keys at the lowest precedence; the
config file overrides them and command-line flags override both.

Exit codes: 0 success or informational, 2 configuration or hypothesis
error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .analytic import (
    GNConstant,
    NoPositiveWindow,
    ProblemParams,
    derive_exponents,
    hypotheses,
    landscape_h,
    landscape_h_tilde,
    multiplier_bounds,
    reference_mass,
    rescale_constants,
    thresholds,
)
from .harness import find_witness, sweep_a, sweep_mu, witness_profile
from .radial import RadialGrid, RadialProfile, log_grid
from .solve import (
    Branch,
    SolverConfig,
    SolverError,
    auto_grid,
    gn_constant_estimate,
    gn_validate,
    multistart_mountain_pass,
    solve_ground,
    solve_limit,
    solve_mountain_pass,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config_text",
    "write_profile",
    "read_profile",
    "main",
]

log = logging.getLogger(__name__)

ENV_PREFIX = "NORMBIHARM_"
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValueError):
    """Bad or missing configuration; maps to exit code 2."""


# ------------------------------------------------------------------ schema

def _float(v: str) -> float:
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("not finite")
    return x


def _int(v: str) -> int:
    x = float(v)
    if x != int(x):
        raise ValueError("not an integer")
    return int(x)


def _float_or(*words: str) -> Callable[[str], Any]:
    def conv(v: str):
        return v if v in words else _float(v)
    return conv


def _choice(*words: str) -> Callable[[str], str]:
    def conv(v: str):
        if v not in words:
            raise ValueError(f"expected one of {', '.join(words)}")
        return v
    return conv


def _float_list(v: str) -> list[float]:
    return [_float(x) for x in v.replace(",", " ").split()] if v.strip() else []


_SOLVER_DEFAULTS = SolverConfig()

# key -> (converter, default); a default of None marks a required key
SCHEMA: dict[str, tuple[Callable[[str], Any], Any]] = {
    "problem.N": (_int, None),
    "problem.p": (_float, None),
    "problem.a": (_float_or("reference"), "reference"),
    "problem.a_fraction": (_float, 0.5),
    "problem.mu": (_float, 1.0),
    "grid.rmin": (_float_or("auto"), "auto"),
    "grid.rmax": (_float_or("auto"), "auto"),
    "grid.nodes": (_int, 4096),
    "grid.grading": (_choice("log"), "log"),
    "gn.value": (_float_or("estimate"), "estimate"),
    "gn.rmin": (_float, 1e-3),
    "gn.rmax": (_float, 60.0),
    "gn.nodes": (_int, 4096),
    "gn.validate_samples": (_int, 200),
    "mp.starts": (_int, 1),
    "witness.m_start": (_float, 8.0),
    "witness.m_max": (_float, 1024.0),
    "witness.cutoff_eps": (_float, 0.02),
    "sweep.q_list": (_float_list, []),
    "output.dir": (str, "out"),
    "output.formats": (str, "json,csv,txt"),
    "run.seed": (_int, 42),
    "run.workers": (_int, 1),
}
for _f in dataclasses.fields(SolverConfig):
    SCHEMA[f"solver.{_f.name}"] = (_int if _f.type in ("int", int) else _float,
                                   getattr(_SOLVER_DEFAULTS, _f.name))


@dataclasses.dataclass
class RunConfig:
    """Resolved configuration: every schema key with its typed value."""

    values: dict[str, Any]
    sources: dict[str, str]

    def __getitem__(self, key: str):
        return self.values[key]

    def section(self, name: str) -> dict[str, Any]:
        pre = name + "."
        return {k[len(pre):]: v for k, v in self.values.items() if k.startswith(pre)}

    def to_text(self) -> str:
        lines = []
        for k, v in self.values.items():
            if isinstance(v, list):
                v = " ".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict[str, Any]:
        return dict(self.values)

    @property
    def params(self) -> ProblemParams:
        try:
            a = self["problem.a"]
            if a == "reference":
                a = reference_mass(self["problem.N"], self["problem.p"], self["problem.mu"] or 1.0,
                                   self.gn, self["problem.a_fraction"])
            return ProblemParams(self["problem.N"], self["problem.p"], a, self["problem.mu"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def solver(self) -> SolverConfig:
        try:
            return SolverConfig(**self.section("solver"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def gn(self) -> GNConstant:
        v = self["gn.value"]
        if v == "estimate":
            return _gn_cached(self)[0]
        return GNConstant(v, "user-supplied")


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, tuple[str, str]]:
    """Parse ``key = value`` lines into ``{key: (raw value, location)}``.

    Raises
    ------
    ConfigError
        On malformed lines, unknown keys or duplicates.
    """
    out: dict[str, tuple[str, str]] = {}
    for num, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{origin}:{num}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{where}: unknown key '{key}'")
        if key in out:
            raise ConfigError(f"{where}: duplicate key '{key}'")
        out[key] = (raw, where)
    return out


def _env_entries(env: dict[str, str]) -> dict[str, tuple[str, str]]:
    lookup = {k.replace(".", "__").upper(): k for k in SCHEMA}
    out = {}
    for name, raw in env.items():
        if not name.startswith(ENV_PREFIX):
            continue
        tail = name[len(ENV_PREFIX):]
        if tail not in lookup:
            raise ConfigError(f"environment: unknown key '{name}'")
        out[lookup[tail]] = (raw, f"env:{name}")
    return out


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None,
                env: dict[str, str] | None = None) -> RunConfig:
    """Merge environment, file and override layers and type-check every key."""
    layers = [_env_entries(os.environ if env is None else env)]
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
        layers.append(parse_config_text(text, str(p)))
    layers.append({k: (v, "command line") for k, v in (overrides or {}).items()})
    merged: dict[str, tuple[str, str]] = {}
    for layer in layers:
        merged.update(layer)
    values, sources = {}, {}
    for key, (conv, default) in SCHEMA.items():
        if key in merged:
            raw, where = merged[key]
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{where}: bad value for '{key}': {exc}") from exc
            sources[key] = where
        elif default is None:
            raise ConfigError(f"missing required key '{key}'")
        else:
            values[key] = default
            sources[key] = "default"
    if values["run.workers"] < 1:
        raise ConfigError("run.workers must be at least 1")
    return RunConfig(values, sources)


# ------------------------------------------------------------------ persistence

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _write_json(path: Path, payload: dict, cfg: RunConfig):
    body = dict(payload)
    body["config"] = cfg.as_dict()
    body["version"] = __version__
    path.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")


def write_profile(path: str | Path, u: RadialProfile, meta: dict[str, Any]):
    """Two-column text: ``r`` and ``u(r)`` at 17 significant digits under a ``#`` header."""
    g = u.grid
    head = [f"# grid = {g.rmin!r} {g.rmax!r} {g.n}"]
    head += [f"# {k} = {v!r}" if isinstance(v, float) else f"# {k} = {v}" for k, v in meta.items()]
    rows = [f"{r:.17g} {v:.17g}" for r, v in zip(g.r, u.values)]
    Path(path).write_text("\n".join(head + rows) + "\n")


def read_profile(path: str | Path) -> tuple[RadialProfile, dict[str, str]]:
    """Inverse of :func:`write_profile`; the grid is rebuilt from the header."""
    meta: dict[str, str] = {}
    vals = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, v = (s.strip() for s in line[1:].split("=", 1))
            meta[k] = v
        elif line.strip():
            vals.append(float(line.split()[1]))
    rmin, rmax, n = meta["grid"].split()
    grid = RadialGrid(int(meta["N"]), float(rmin), float(rmax), int(n))
    return RadialProfile(grid, np.array(vals)), meta


def _gn_cache_path(cfg: RunConfig, grid: RadialGrid) -> Path:
    key = f"{cfg['problem.N']}|{cfg['problem.p']!r}|{grid.signature()}"
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    return Path(cfg["output.dir"]) / "gn_cache" / f"gn_{digest}.json"


def _gn_cached(cfg: RunConfig) -> tuple[GNConstant, bool, Path]:
    """Estimated constant from the cache, computing and storing it on a miss."""
    N, p = cfg["problem.N"], cfg["problem.p"]
    grid = log_grid(N, cfg["gn.rmin"], cfg["gn.rmax"], cfg["gn.nodes"])
    path = _gn_cache_path(cfg, grid)
    if path.exists():
        d = json.loads(path.read_text())
        return GNConstant(d["c_np"], "estimated", d["refinement_delta"]), True, path
    try:
        est = gn_constant_estimate(N, p, grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({
        "N": N, "p": p, "grid": grid.signature(), "c_np": est.constant.c_np,
        "refinement_delta": est.constant.refinement_delta,
        "quotient": est.quotient, "quotient_refined": est.quotient_refined,
    }, indent=2, sort_keys=True) + "\n")
    return est.constant, False, path


# ------------------------------------------------------------------ commands

def _grid_for(cfg: RunConfig, params: ProblemParams, branch: Branch, gn: GNConstant | None):
    rmin, rmax = cfg["grid.rmin"], cfg["grid.rmax"]
    if rmin == "auto" and rmax == "auto":
        return auto_grid(params, branch, gn, cfg["grid.nodes"])
    auto = auto_grid(params, branch, gn, cfg["grid.nodes"])
    return RadialGrid(params.N, auto.rmin if rmin == "auto" else rmin,
                      auto.rmax if rmax == "auto" else rmax, cfg["grid.nodes"])


def cmd_constants(cfg: RunConfig, out: Path) -> dict:
    params, gn = cfg.params, cfg.gn
    gamma_p, p_bar, p_star4 = derive_exponents(params.N, params.p)
    th = thresholds(params, gn)
    report: dict[str, Any] = {
        "params": dataclasses.asdict(params),
        "gn": dataclasses.asdict(gn),
        "exponents": {"gamma_p": gamma_p, "p_bar": p_bar, "p_star4": p_star4, "p_gamma_p": params.pg},
        "thresholds": {**dataclasses.asdict(th), "minimum": th.minimum},
        "verdict": "admissible" if th.admissible_min_flag else "inadmissible",
        "hypotheses": hypotheses(params),
    }
    if params.mu > 0:
        try:
            report["landscape"] = dataclasses.asdict(landscape_h(params, gn))
            tau, r0, r1 = landscape_h_tilde(params, gn)
            report["landscape_tilde"] = {"tau_tilde": tau, "r0": r0, "r1": r1}
        except NoPositiveWindow as exc:
            report["landscape"] = f"none: {exc}"
        report["rescale"] = dataclasses.asdict(rescale_constants(params))
        upper, lower = multiplier_bounds(params, gn)
        report["multiplier_bounds"] = {"upper": upper, "lower": lower}
    _write_json(out / "constants.json", report, cfg)
    print(f"verdict: {report['verdict']}  lhs={th.lhs:.6g}  min threshold={th.minimum:.6g}")
    return report


_BRANCHES = {"ground": Branch.GROUND, "mp": Branch.MOUNTAIN_PASS, "limit": Branch.LIMIT}


def cmd_solve(cfg: RunConfig, out: Path, branch: str) -> dict:
    params = cfg.params
    if branch == "limit":
        if params.mu != 0:
            warnings.warn(f"limit branch ignores problem.mu = {params.mu}", UserWarning)
        params = params.with_mu(0.0)
        gn = None
    else:
        gn = cfg.gn
        if params.mu <= 0:
            raise ConfigError(f"branch {branch} needs problem.mu > 0")
        if not thresholds(params, gn).admissible_min_flag:
            raise ConfigError("parameters are not admissible: mu^(p gamma_p - 2) a^(p-2) "
                              "is not below the minimum threshold")
    solver = cfg.solver
    extra: dict[str, Any] = {}
    grid = _grid_for(cfg, params, _BRANCHES[branch], gn)
    if branch == "ground":
        rep = solve_ground(params, gn, solver, grid=grid)
    elif branch == "mp" and cfg["mp.starts"] > 1:
        ms = multistart_mountain_pass(params, gn, solver, cfg["mp.starts"], cfg["run.seed"],
                                      cfg["run.workers"], grid)
        rep = ms.best
        extra = {"starts": cfg["mp.starts"], "start_failures": ms.failures,
                 "start_energies": ms.energies, "start_spread": ms.spread}
    elif branch == "mp":
        rep = solve_mountain_pass(params, gn, solver, grid=grid)
    else:
        rep = solve_limit(params, solver, grid=grid)
    summary = rep.summary()
    summary["params"] = dataclasses.asdict(params)
    summary.update(extra)
    _write_json(out / f"solve_{branch}.json", summary, cfg)
    write_profile(out / f"profile_{branch}.txt", rep.profile, {
        "N": params.N, "p": params.p, "a": params.a, "mu": params.mu,
        "lambda": rep.lam, "branch": rep.branch.value,
    })
    print(f"{rep.branch.value}: energy={rep.energy:.17g} lambda={rep.lam:.17g} "
          f"pohozaev={summary['pohozaev_relative']:.3e} grad={rep.grad_norm:.3e}")
    return summary


def cmd_sweep(cfg: RunConfig, out: Path, axis: str, values: list[float]) -> dict:
    if not values:
        raise ConfigError("sweep needs at least one value")
    params, gn = cfg.params, cfg.gn
    try:
        if axis == "mu":
            if any(v <= 0 for v in values):
                raise ConfigError("mu sweep values must be positive")
            res = sweep_mu(params, gn, values, cfg.solver, cfg["run.workers"])
        else:
            res = sweep_a(params, gn, values, cfg.solver, cfg["run.workers"],
                          cfg["sweep.q_list"] or None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    (out / f"sweep_{axis}.csv").write_text(res.to_csv())
    (out / f"sweep_{axis}_plot.csv").write_text(res.plot_data())
    meta = {"axis": axis, "values": res.values, "columns": res.columns, "rows": res.rows,
            "extras": res.extras}
    _write_json(out / f"sweep_{axis}.json", meta, cfg)
    ok = sum(r["status"] == "ok" for r in res.rows)
    print(f"sweep {axis}: {ok}/{len(res.rows)} points converged -> {out / f'sweep_{axis}.csv'}")
    return meta


def cmd_witness(cfg: RunConfig, out: Path) -> dict:
    params, gn = cfg.params, cfg.gn
    if not params.p < 4:
        raise ConfigError(f"witness needs p < 4 (the Bessel test-function bound assumes "
                          f"N >= 5 and p < 4), got p = {params.p}")
    if params.mu <= 0:
        raise ConfigError("witness needs problem.mu > 0")
    try:
        wit, tried = find_witness(params, gn, cfg["witness.m_start"], cfg["witness.m_max"],
                                  cfg["witness.cutoff_eps"])
    except ValueError as exc:
        print(f"witness: {exc}", file=sys.stderr)
        raise SolverError(str(exc)) from exc
    payload = dataclasses.asdict(wit)
    payload["vanishing_level"] = -params.a**2 * params.mu**2 / 8
    payload["search"] = [{"m": w.m, "bound_margin": w.bound_margin} for w in tried]
    payload["params"] = dataclasses.asdict(params)
    _write_json(out / "witness.json", payload, cfg)
    rc = rescale_constants(params)
    grid = log_grid(params.N, 1e-3, 2.5 * wit.m, cfg["grid.nodes"] * 4)
    write_profile(out / "witness_profile.txt", witness_profile(params, wit, grid), {
        "N": params.N, "p": params.p, "a": params.a * math.sqrt(rc.c_tilde_mass), "mu": params.mu,
        "lambda": float("nan"), "branch": "BesselWitness", "m": wit.m,
    })
    print(f"witness: m={wit.m:g} margin={wit.bound_margin:.6e} implied bound={wit.implied_bound:.17g}")
    return payload


def cmd_gn(cfg: RunConfig, out: Path) -> dict:
    const, hit, path = _gn_cached(cfg)
    N, p = cfg["problem.N"], cfg["problem.p"]
    worst = gn_validate(const, N, p, count=cfg["gn.validate_samples"], seed=cfg["run.seed"])
    payload = {"c_np": const.c_np, "c_np_power_p": const.power(p),
               "refinement_delta": const.refinement_delta, "cache_hit": hit, "cache_file": str(path),
               "validation_max_ratio": worst, "validation_samples": cfg["gn.validate_samples"]}
    _write_json(out / "gn.json", payload, cfg)
    print(f"gn: C={const.c_np:.17g} delta={const.refinement_delta:.3e} "
          f"cache {'hit' if hit else 'miss'} max ratio={worst:.6f}")
    return payload


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="normbiharm",
                                 description="Normalized solutions of the mixed-dispersion biharmonic equation.")
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    ap.add_argument("--workers", type=int, help="sweep worker processes (overrides run.workers)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key; may repeat")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", help="exponents, thresholds, landscape and verdicts")
    s = sub.add_parser("solve", help="solve one branch")
    s.add_argument("--branch", choices=sorted(_BRANCHES), required=True)
    w = sub.add_parser("sweep", help="parameter sweep")
    w.add_argument("--axis", choices=["mu", "a"], required=True)
    w.add_argument("--values", type=float, nargs="*", default=[])
    sub.add_parser("witness", help="Bessel test-function bound")
    sub.add_parser("gn", help="estimate the Gagliardo-Nirenberg constant")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return EXIT_CONFIG
        k, v = item.split("=", 1)
        if k.strip() not in SCHEMA:
            print(f"error: command line: unknown key '{k.strip()}'", file=sys.stderr)
            return EXIT_CONFIG
        overrides[k.strip()] = v.strip()
    for flag, key in (("out", "output.dir"), ("seed", "run.seed"), ("workers", "run.workers")):
        if getattr(args, flag) is not None:
            overrides[key] = str(getattr(args, flag))
    try:
        cfg = load_config(args.config, overrides)
        out = Path(cfg["output.dir"])
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "constants":
            cmd_constants(cfg, out)
        elif args.command == "solve":
            cmd_solve(cfg, out, args.branch)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, args.axis, args.values)
        elif args.command == "witness":
            cmd_witness(cfg, out)
        else:
            cmd_gn(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
