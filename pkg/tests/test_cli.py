import json
import math

import numpy as np
import pytest

from normbiharm.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    load_config,
    main,
    parse_config_text,
    read_profile,
    write_profile,
)
from normbiharm.radial import RadialProfile, log_grid

BASE = ["--set", "problem.N=5", "--set", "problem.p=3.8"]


@pytest.fixture(scope="module")
def shared(tmp_path_factory, gn):
    """Output directory plus options pinning the constant to the session estimate."""
    out = tmp_path_factory.mktemp("cli")
    return out, BASE + ["--set", f"gn.value={gn.c_np!r}", "--out", str(out)]


def _json(path):
    return json.loads(path.read_text())


# ---------------------------------------------------------------- config

def test_unknown_key_and_missing_required(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem.N = 5\nproblem.p = 3.8\nproblem.nu = 1\n")
    assert main(["--config", str(cfg), "constants"]) == EXIT_CONFIG
    assert f"{cfg}:3: unknown key 'problem.nu'" in capsys.readouterr().err
    cfg.write_text("problem.N = 5\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path), "constants"]) == EXIT_CONFIG
    assert "missing required key 'problem.p'" in capsys.readouterr().err
    assert main(BASE + ["--set", "bogus=1", "constants"]) == EXIT_CONFIG


def test_config_parse_errors():
    with pytest.raises(ConfigError, match="<config>:2: duplicate"):
        parse_config_text("problem.N = 5\nproblem.N = 6\n")
    with pytest.raises(ConfigError, match="expected 'key = value'"):
        parse_config_text("problem.N 5\n")
    with pytest.raises(ConfigError, match="bad value"):
        load_config(overrides={"problem.N": "five", "problem.p": "3.8"}, env={})


def test_config_round_trip():
    cfg = load_config(overrides={"problem.N": "5", "problem.p": "3.8", "problem.mu": "0.3",
                                 "sweep.q_list": "3.7 3.9"}, env={})
    raw = {k: v for k, (v, _) in parse_config_text(cfg.to_text()).items()}
    again = load_config(overrides=raw, env={})
    assert again.values == cfg.values


def test_config_precedence(tmp_path):
    env = {"NORMBIHARM_PROBLEM__N": "5", "NORMBIHARM_PROBLEM__P": "3.8", "NORMBIHARM_PROBLEM__MU": "0.1"}
    assert load_config(env=env)["problem.mu"] == 0.1
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem.mu = 0.2  # file beats environment\n")
    c = load_config(cfg, env=env)
    assert c["problem.mu"] == 0.2 and c.sources["problem.mu"] == f"{cfg}:1"
    c = load_config(cfg, {"problem.mu": "0.3"}, env=env)
    assert c["problem.mu"] == 0.3 and c.sources["problem.N"] == "env:NORMBIHARM_PROBLEM__N"
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(env={"NORMBIHARM_PROBLEM__Q": "1"})


# ---------------------------------------------------------------- constants

def test_constants_admissible_and_not(shared, ref_params):
    out, opts = shared
    assert main(opts + ["constants"]) == EXIT_OK
    rep = _json(out / "constants.json")
    assert rep["verdict"] == "admissible"
    assert rep["params"]["a"] == pytest.approx(ref_params.a, rel=1e-14)
    assert rep["thresholds"]["lhs"] == pytest.approx(0.5 * rep["thresholds"]["minimum"], rel=1e-12)
    assert rep["landscape"]["r0"] < rep["landscape"]["t_bar"] < rep["landscape"]["r1"]
    assert rep["config"]["problem.N"] == 5 and "version" in rep
    assert main(opts + ["--set", f"problem.a={4 * ref_params.a!r}", "constants"]) == EXIT_OK
    rep = _json(out / "constants.json")
    assert rep["verdict"] == "inadmissible"
    assert rep["landscape"].startswith("none")


# ---------------------------------------------------------------- solve

def test_solve_branches(shared, ref_params):
    out, opts = shared
    assert main(opts + ["solve", "--branch", "ground"]) == EXIT_OK
    g = _json(out / "solve_ground.json")
    assert main(opts + ["solve", "--branch", "mp"]) == EXIT_OK
    m = _json(out / "solve_mp.json")
    assert g["energy"] < 0 < m["energy"]
    with pytest.warns(UserWarning, match="ignores problem.mu"):
        assert main(opts + ["solve", "--branch", "limit"]) == EXIT_OK
    assert _json(out / "solve_limit.json")["energy"] > 0
    # same config and seed: identical scalars
    assert main(opts + ["solve", "--branch", "ground"]) == EXIT_OK
    g2 = _json(out / "solve_ground.json")
    scalars = [k for k, v in g.items() if isinstance(v, (int, float))]
    assert scalars and all(g[k] == g2[k] for k in scalars)
    u, meta = read_profile(out / "profile_ground.txt")
    assert math.sqrt(u.mass()) == pytest.approx(ref_params.a, rel=1e-8)
    assert meta["branch"] == "GroundLocalMin"


def test_solve_inadmissible(shared, ref_params, capsys):
    _, opts = shared
    assert main(opts + ["--set", f"problem.a={4 * ref_params.a!r}", "solve", "--branch", "ground"]) == EXIT_CONFIG
    assert "not admissible" in capsys.readouterr().err


# ---------------------------------------------------------------- sweeps

def test_sweep_empty_and_a_columns(shared, ref_params):
    out, opts = shared
    assert main(opts + ["sweep", "--axis", "mu"]) == EXIT_CONFIG
    a = ref_params.a
    assert main(opts + ["sweep", "--axis", "a", "--values", repr(a), repr(0.9 * a)]) == EXIT_OK
    lines = (out / "sweep_a.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["a", "status", "m_r", "ratio_m_over_vanishing"]
    assert len(lines) == 3
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    assert all(r["status"] == "ok" for r in rows)
    assert all(float(r["ratio_m_over_vanishing"]) > 1 for r in rows)
    assert (out / "sweep_a_plot.csv").read_text().startswith("series,a,value")


# ---------------------------------------------------------------- witness

def test_witness(shared, ref_params, capsys):
    out, opts = shared
    assert main(opts + ["--set", "problem.p=4.5", "--set", "problem.a=0.1", "witness"]) == EXIT_CONFIG
    assert "p < 4" in capsys.readouterr().err
    assert main(opts + ["--set", "witness.m_max=16", "witness"]) == 3
    assert main(opts + ["witness"]) == EXIT_OK
    w = _json(out / "witness.json")
    assert w["implied_bound"] < w["vanishing_level"]
    assert w["search"][-1]["bound_margin"] > 0
    u, meta = read_profile(out / "witness_profile.txt")
    assert meta["branch"] == "BesselWitness"
    assert u.mass() == pytest.approx(w["target_mass"], rel=1e-6)


# ---------------------------------------------------------------- GN cache

def test_gn_cache(tmp_path):
    opts = BASE + ["--out", str(tmp_path), "--set", "gn.nodes=1024", "--set", "gn.validate_samples=20"]
    assert main(opts + ["gn"]) == EXIT_OK
    first = _json(tmp_path / "gn.json")
    assert first["cache_hit"] is False and first["refinement_delta"] > 0
    assert main(opts + ["gn"]) == EXIT_OK
    second = _json(tmp_path / "gn.json")
    assert second["cache_hit"] is True and second["c_np"] == first["c_np"]
    assert main(opts[:-2] + ["--set", "gn.validate_samples=20", "--set", "gn.nodes=1100", "gn"]) == EXIT_OK
    third = _json(tmp_path / "gn.json")
    assert third["cache_hit"] is False and third["cache_file"] != first["cache_file"]


# ---------------------------------------------------------------- profiles

def test_profile_bit_exact_round_trip(tmp_path):
    g = log_grid(5, 1e-3, 37.5, 777)
    rng = np.random.default_rng(42)
    u = RadialProfile(g, rng.normal(size=g.n) * np.exp(-g.r))
    write_profile(tmp_path / "u.txt", u, {"N": 5, "p": 3.8, "lambda": -1 / 3})
    v, meta = read_profile(tmp_path / "u.txt")
    assert np.array_equal(v.values, u.values)
    assert np.array_equal(v.grid.r, g.r)
    assert float(meta["lambda"]) == -1 / 3
