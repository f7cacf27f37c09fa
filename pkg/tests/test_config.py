from pathlib import Path

import numpy as np
import pytest

from aoisa.config import ConfigFileMissing, CrossFieldError, SchemaError, parse_config, parse_config_text
from aoisa.dynamics import LinearField, QuadraticObjective

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """
[drift]
kind = linear
matrix = [[-1.0, 0.0], [0.0, -1.0]]
blocks = [1, 1]
"""


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.cfg")))
def test_shipped_configs_parse(name):
    cfg = parse_config(CONFIGS / name)
    assert cfg.horizon >= 1
    cfg.sim_config()


def test_defaults():
    cfg = parse_config_text(BASE)
    assert isinstance(cfg.field, LinearField)
    assert cfg.schedule.regime == "harmonic"
    assert cfg.x1.tolist() == [1.0, 1.0]
    assert cfg.seeds == [0]
    assert cfg.format == "both"


def test_overrides_and_seed_list():
    cfg = parse_config_text(BASE + "[run]\nseed = 3\nreplications = 3\n", overrides={("run", "seed"): 10})
    assert cfg.seeds == [10, 11, 12]


def test_auto_regime_follows_p():
    cfg = parse_config_text(BASE + "[delays]\np = 1.5\n")
    assert cfg.schedule.regime == "power" and cfg.schedule.q == 1.25


def test_delay_pairs():
    cfg = parse_config_text(BASE + '[delays]\ndefault = bernoulli-refresh(0.2)\n"1,2" = constant(3)\n2,1 = zero\n')
    assert cfg.delays[0][1].label == "constant(3)"
    assert cfg.delays[1][0].kind == "zero"


def test_scripted_delay_relative_path(tmp_path):
    (tmp_path / "tau.txt").write_text("\n".join(["0", "1", "2", "0"] * 5))
    (tmp_path / "c.cfg").write_text(BASE + "[delays]\ndefault = scripted(tau.txt)\n[run]\nhorizon = 20\n")
    cfg = parse_config(tmp_path / "c.cfg")
    assert cfg.delays[0][1].kind == "scripted"


def test_quadratic_objective_kind():
    cfg = parse_config_text("[drift]\nkind = quadratic-objective\nA_support = [0.5, 1.5]\nb_support = [1.0, 3.0]\n")
    assert isinstance(cfg.objective, QuadraticObjective)
    assert cfg.objective.minimizer().tolist() == [-1.0]


def test_regularized_kind():
    cfg = parse_config_text("[drift]\nkind = regularized\nmatrix = [[-1.0]]\namplitude = 0.5\nkappa = 0.25\n")
    x = np.array([2.0])
    assert cfg.field(x)[0] == pytest.approx(-2.0 + 0.5 * np.sin(2.0) - 1.0)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigFileMissing):
        parse_config(tmp_path / "nope.cfg")


def test_schema_errors_are_collected():
    text = BASE + "[run]\nhorizon = 0\nvariant = sideways\nbogus = 1\n[extra]\nx = 1\n"
    with pytest.raises(SchemaError) as ei:
        parse_config_text(text)
    msgs = " | ".join(ei.value.errors)
    for frag in ("horizon", "variant", "bogus", "[extra]"):
        assert frag in msgs


@pytest.mark.parametrize(
    "extra, frag",
    [
        ("[drift]\nkind = spline\n", "kind"),
        ("[drift]\nkind = linear\n", "matrix"),
        ("[drift]\nkind = linear\nmatrix = [[1, 2, 3]]\n", "square"),
        ("[noise]\nkind = cauchy\n", "noise"),
        ("[delays]\ndefault = bernoulli-refresh(2)\n", "delays"),
        ("[delays]\n3,1 = zero\n", "outside"),
        ("[run]\nx1 = [1, 2, 3]\n", "x1"),
        ("[analysis]\nverifiers = [\"magic\"]\n", "verifiers"),
        ("[analysis]\neps = small\n", "eps"),
        ("[output]\nformat = xml\n", "format"),
    ],
)
def test_schema_error_cases(extra, frag):
    text = extra if extra.startswith("[drift]") else BASE + extra
    with pytest.raises(SchemaError, match=frag):
        parse_config_text(text)


@pytest.mark.parametrize(
    "extra, frag",
    [
        ("[delays]\np = 1.5\n[schedule]\nregime = harmonic\n", "power regime"),
        ("[delays]\np = 0.8\n[schedule]\nregime = power\n", "power regime requires"),
        ("[run]\nvariant = heavy-ball\nbeta = 1.0\n", "beta"),
        ("[run]\nbeta = 0.5\n", "variant is plain"),
        ("[delays]\np = 1.5\n[run]\nvariant = heavy-ball\nbeta = 0.5\n", "harmonic"),
    ],
)
def test_cross_field_errors(extra, frag):
    with pytest.raises(CrossFieldError, match=frag):
        parse_config_text(BASE + extra)


def test_scripted_shorter_than_horizon(tmp_path):
    (tmp_path / "tau.txt").write_text("0\n1\n")
    with pytest.raises(CrossFieldError, match="shorter"):
        parse_config_text(BASE + "[delays]\ndefault = scripted(tau.txt)\n[run]\nhorizon = 5\n", base_dir=tmp_path)


def test_indefinite_hessian_rejected():
    with pytest.raises(CrossFieldError, match="positive definite"):
        parse_config_text("[drift]\nkind = quadratic-objective\nA_support = [-1.0, 0.5]\nb_support = [1.0]\n")
